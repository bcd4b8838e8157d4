"""scikit-learn style wrappers around the mixture-mean posterior.

>>> from langevin_bench.estimators import EMMixtureMeans
>>> est = EMMixtureMeans(n_components=2, random_state=0).fit(X)   # doctest: +SKIP
>>> est.means_.shape                                             # doctest: +SKIP
(2, X.shape[1])

Both estimators fit the means of ``n_components`` isotropic Gaussians of
width ``sigma`` next to a constant background component. ``transform``
returns responsibilities and ``predict`` the most responsible component,
with ``-1`` for points the background explains best.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_data, check_fraction, check_positive, check_seed
from .numerics import RngStream
from .objectives import GmmPosterior
from .optimizers import em_init_from_data, run_em
from .samplers import ChainConfig, StepSchedule, run_chain

__all__ = ["EMMixtureMeans", "LangevinMixtureMeans"]


class _MixtureMeansBase(TransformerMixin, ClusterMixin, BaseEstimator):
    def _posterior(self, X: np.ndarray) -> GmmPosterior:
        N, d = X.shape
        M = self.n_components if self.n_components is not None else max(1, int(math.log2(max(d, 2))))
        if not (isinstance(M, int) and M >= 1):
            raise ValueError(f"n_components must be a positive int, got {M!r}")
        if N < M:
            raise ValueError(f"need at least n_components={M} samples, got {N}")
        sigma = check_positive("sigma", self.sigma, allow_none=True) or 1.0 / math.sqrt(d)
        check_positive("weight_scale", self.weight_scale)
        if self.prior_radius is None:
            # enclose every datum: the prior ball has radius sqrt(M) R in the stacked means
            radius = float(np.linalg.norm(X, axis=1).max()) or 1.0
        else:
            radius = check_positive("prior_radius", self.prior_radius)
        return GmmPosterior(X, sigma, M, self.weight_scale * sigma**2, self.constant_component,
                            check_positive("prior_strength", self.prior_strength), radius)

    def transform(self, X) -> np.ndarray:
        """Responsibilities, shape ``(n_samples, n_components)``."""
        check_is_fitted(self, "means_")
        X = check_data(X, n_features=self.n_features_in_)
        post = self._posterior_for(X)
        return post.responsibilities(self.means_.reshape(-1)).T

    def predict(self, X) -> np.ndarray:
        gamma = self.transform(X)
        labels = gamma.argmax(axis=1)
        labels[gamma.sum(axis=1) < 0.5] = -1
        return labels

    def score(self, X, y=None) -> float:
        """Average log-posterior per sample (higher is better)."""
        check_is_fitted(self, "means_")
        X = check_data(X, n_features=self.n_features_in_)
        return -self._posterior_for(X).value(self.means_.reshape(-1)) / X.shape[0]

    def _posterior_for(self, X: np.ndarray) -> GmmPosterior:
        p = self.posterior_
        return GmmPosterior(X, p.sigma, p.n_components, p.weight_coeff, p.constant_component,
                            p.prior_m, p.prior_R)


class EMMixtureMeans(_MixtureMeansBase):
    """Expectation maximization started from data points.

    Fitted attributes: ``means_`` ``(n_components, n_features)``,
    ``n_iter_``, ``objective_`` (final negative log-posterior),
    ``converged_`` and ``posterior_``.
    """

    def __init__(self, n_components=None, sigma=None, weight_scale=1e-3, constant_component=1.0,
                 prior_strength=1.0 / 64.0, prior_radius=None, max_iter=1000, tol=1e-12,
                 init_jitter=0.0, random_state=None):
        self.n_components = n_components
        self.sigma = sigma
        self.weight_scale = weight_scale
        self.constant_component = constant_component
        self.prior_strength = prior_strength
        self.prior_radius = prior_radius
        self.max_iter = max_iter
        self.tol = tol
        self.init_jitter = init_jitter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_data(X)
        post = self._posterior(X)
        seed = check_seed(self.random_state)
        mu0 = em_init_from_data(post, RngStream(seed), self.init_jitter)
        record, state, _ = run_em(post, mu0, max_iters=int(self.max_iter), stall_tol=self.tol,
                                  record_trajectory=False)
        self.posterior_ = post
        self.means_ = post.means(state.mu).copy()
        self.n_iter_ = record.iterations
        self.objective_ = record.final_value
        self.converged_ = "stalled_at" in record.notes
        self.n_features_in_ = X.shape[1]
        return self


class LangevinMixtureMeans(_MixtureMeansBase):
    """Posterior mean of the mixture means from a ULA or MALA chain.

    ``step_size=None`` uses ``0.5 / L`` with ``L`` the posterior's smoothness
    constant. The chain starts from randomly chosen data points and the
    first ``burn_in`` fraction of it is discarded.
    Fitted attributes: ``means_``, ``samples_`` ``(n_kept, n_components,
    n_features)``, ``step_size_``, ``acceptance_rate_`` (MALA only),
    ``n_gradient_queries_`` and ``posterior_``.
    """

    def __init__(self, n_components=None, sigma=None, weight_scale=1e-3, constant_component=1.0,
                 prior_strength=1.0 / 64.0, prior_radius=None, method="ula", step_size=None,
                 n_steps=10_000, burn_in=0.1, thin=1, random_state=None):
        self.n_components = n_components
        self.sigma = sigma
        self.weight_scale = weight_scale
        self.constant_component = constant_component
        self.prior_strength = prior_strength
        self.prior_radius = prior_radius
        self.method = method
        self.step_size = step_size
        self.n_steps = n_steps
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.method not in ("ula", "mala"):
            raise ValueError(f"method must be 'ula' or 'mala', got {self.method!r}")
        burn = check_fraction("burn_in", self.burn_in)
        X = check_data(X)
        post = self._posterior(X)
        h = check_positive("step_size", self.step_size, allow_none=True) or 0.5 / post.constants.L
        seed = check_seed(self.random_state)
        # start on data points like EM; the background plateau has almost no drift
        x0 = em_init_from_data(post, RngStream(seed, 1))
        cfg = ChainConfig(StepSchedule("constant", h), int(self.n_steps), seed=seed, thin=int(self.thin),
                          init="fixed", x0=tuple(x0))
        record, stream = run_chain(post, cfg, self.method)
        keep = stream.positions[stream.steps > burn * record.iterations]
        if len(keep) == 0:
            raise ValueError("no samples left after burn-in; raise n_steps or lower burn_in")
        self.posterior_ = post
        self.samples_ = keep.reshape(len(keep), post.n_components, post.data_dim)
        self.means_ = self.samples_.mean(axis=0)
        self.step_size_ = h
        self.acceptance_rate_ = record.acceptance_rate
        self.n_gradient_queries_ = record.queries
        self.n_features_in_ = X.shape[1]
        return self
