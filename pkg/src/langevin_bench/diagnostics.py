"""Correctness oracles and convergence detection.

Grid densities give an exact (up to quadrature) target for one- and
two-dimensional objectives; histograms of chain output are compared with them
in total variation. Convergence of EM is judged on the objective gap to a
reference optimum, convergence of a sampler on its running averages of ``U``
and of the position against reference posterior expectations.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .numerics import RngStream, log_sum_exp
from .objectives import GmmPosterior, Objective
from .samplers import ChainConfig, ChainState, StepSchedule, run_chain

__all__ = [
    "GridSpec",
    "GridDensity",
    "grid_density",
    "histogram",
    "tv_distance",
    "ConvergenceCriterion",
    "check_convergence",
    "first_passage",
    "RunningAverageMonitor",
    "NonConvergentReferenceError",
    "References",
    "ReferenceProtocol",
    "estimate_optimum",
    "estimate_posterior_moments",
    "estimate_references",
]


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Regular grid: one ``(lo, hi, bins)`` triple per axis, at most two axes."""

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple((float(lo), float(hi), int(b)) for lo, hi, b in self.axes))
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("grids support one or two dimensions")
        for lo, hi, b in self.axes:
            if not (hi > lo and b >= 1):
                raise ValueError(f"bad axis ({lo}, {hi}, {b})")

    @classmethod
    def regular(cls, lo: float, hi: float, bins: int, dim: int = 1) -> "GridSpec":
        return cls(tuple((lo, hi, bins) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b for _, _, b in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([(hi - lo) / b for lo, hi, b in self.axes]))

    def centers(self) -> list[np.ndarray]:
        return [lo + (np.arange(b) + 0.5) * (hi - lo) / b for lo, hi, b in self.axes]


@dataclass
class GridDensity:
    """Cell probabilities on a grid; ``clipped_mass`` is the fraction of samples outside it."""

    spec: GridSpec
    probs: np.ndarray
    clipped_mass: float = 0.0
    boundary_mass: float = 0.0


def _boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[ax] = 0
        mask[tuple(idx)] = True
        idx[ax] = -1
        mask[tuple(idx)] = True
    return mask


def grid_density(obj: Objective, spec: GridSpec, boundary_tol: float = 1e-6) -> GridDensity:
    """Cell masses proportional to ``exp(-U(center)) * volume``, normalized."""
    if obj.dim != spec.dim:
        raise ValueError(f"objective has dim {obj.dim}, grid has dim {spec.dim}")
    if spec.dim > 2:
        raise ValueError("grid densities are limited to d <= 2")
    axes = spec.centers()
    logw = np.empty(spec.shape)
    for idx in product(*(range(b) for b in spec.shape)):
        x = np.array([axes[a][i] for a, i in enumerate(idx)])
        logw[idx] = -obj.value(x)
    logw += math.log(spec.cell_volume)
    probs = np.exp(logw - log_sum_exp(logw))
    probs /= probs.sum()
    edge = float(probs[_boundary_mask(spec.shape)].sum())
    if edge >= boundary_tol:
        warnings.warn(f"boundary cells carry {edge:.3g} of the mass; widen the grid", stacklevel=2)
    return GridDensity(spec, probs, 0.0, edge)


def histogram(samples, spec: GridSpec) -> GridDensity:
    """Normalized histogram of in-grid samples; out-of-grid samples go to ``clipped_mass``."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1, spec.dim) if spec.dim > 1 \
        else np.asarray(samples, dtype=np.float64).reshape(-1, 1)
    n = x.shape[0]
    if n == 0:
        raise ValueError("no samples")
    inside = np.ones(n, dtype=bool)
    idx = []
    for a, (lo, hi, b) in enumerate(spec.axes):
        pos = (x[:, a] - lo) / (hi - lo) * b
        inside &= (pos >= 0) & (pos < b)
        idx.append(np.clip(np.floor(pos), 0, b - 1).astype(np.int64))
    counts = np.zeros(spec.shape)
    np.add.at(counts, tuple(i[inside] for i in idx), 1.0)
    kept = int(inside.sum())
    probs = counts / kept if kept else counts
    return GridDensity(spec, probs, clipped_mass=1.0 - kept / n)


def tv_distance(p: GridDensity, q: GridDensity) -> float:
    """``0.5 * sum |p_i - q_i|`` on a shared grid."""
    if p.spec != q.spec:
        raise ValueError("densities live on different grids")
    return float(min(1.0, 0.5 * np.abs(p.probs - q.probs).sum()))


# --------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceCriterion:
    """``em_value``: ``U(mu_K) - U*`` below ``value_tol``.

    ``sampler_value_and_mean``: running average of ``U`` within ``value_tol`` of
    ``E[U]`` and running mean of the position within ``mean_tol`` (Euclidean,
    i.e. Frobenius over all mixture means) of ``E[mu]``.
    """

    kind: str
    value_tol: float = 1e-6
    mean_tol: float = 1e-3
    ref_value: float | None = None
    ref_mean: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("em_value", "sampler_value_and_mean"):
            raise ValueError(f"unknown criterion kind {self.kind!r}")
        if not (self.value_tol > 0 and self.mean_tol > 0):
            raise ValueError("tolerances must be positive")


def check_convergence(criterion: ConvergenceCriterion, value: float,
                      mean_position=None) -> bool:
    """``value`` is ``U(mu_K)`` for EM and the running average of ``U`` for samplers."""
    if criterion.ref_value is None:
        raise ValueError("criterion has no reference value")
    if criterion.kind == "em_value":
        return value - criterion.ref_value < criterion.value_tol
    if criterion.ref_mean is None or mean_position is None:
        raise ValueError("sampler criterion needs a reference mean and a running mean")
    if abs(value - criterion.ref_value) >= criterion.value_tol:
        return False
    gap = np.asarray(mean_position, dtype=np.float64) - criterion.ref_mean
    return float(np.sqrt(gap @ gap)) < criterion.mean_tol


def first_passage(values: Sequence[float], reference: float, tol: float) -> int | None:
    """First index ``k`` with ``values[k] - reference < tol``, else ``None``."""
    for k, v in enumerate(values):
        if v - reference < tol:
            return k
    return None


class RunningAverageMonitor:
    """Stop predicate for :func:`run_chain` implementing the sampler criterion.

    Running sums are recorded at geometrically spaced checkpoints (ratio
    ``growth``). At checkpoint ``K`` the averages cover the steps after the
    largest recorded checkpoint not exceeding ``burn_in * K``.
    """

    def __init__(self, criterion: ConvergenceCriterion, burn_in: float = 0.1, growth: float = 1.01):
        if criterion.kind != "sampler_value_and_mean":
            raise ValueError("monitor needs a sampler criterion")
        self.criterion = criterion
        self.burn_in = burn_in
        self.growth = growth
        self._sum_u = 0.0
        self._sum_x = None
        self._marks: list[int] = [0]
        self._marks_u: list[float] = [0.0]
        self._marks_x: list[np.ndarray] = []
        self._next = 1
        self.last_gap: tuple[float, float] | None = None

    def __call__(self, state: ChainState) -> bool:
        k = state.iteration
        if self._sum_x is None:
            self._sum_x = np.zeros_like(state.position)
            self._marks_x.append(self._sum_x.copy())
        self._sum_u += state.value
        self._sum_x += state.position
        if k < self._next:
            return False
        self._marks.append(k)
        self._marks_u.append(self._sum_u)
        self._marks_x.append(self._sum_x.copy())
        self._next = max(k + 1, int(math.ceil(k * self.growth)))
        j = int(np.searchsorted(self._marks, self.burn_in * k, side="right")) - 1
        start = self._marks[j]
        n = k - start
        avg_u = (self._sum_u - self._marks_u[j]) / n
        avg_x = (self._sum_x - self._marks_x[j]) / n
        c = self.criterion
        gap = avg_x - c.ref_mean
        self.last_gap = (abs(avg_u - c.ref_value), float(np.sqrt(gap @ gap)))
        return check_convergence(c, avg_u, avg_x)


# --------------------------------------------------------------------------
# references


class NonConvergentReferenceError(RuntimeError):
    """Replicated reference runs failed to agree within the retry cap."""


@dataclass
class References:
    mu_star: np.ndarray | None = None
    value_star: float | None = None
    mean_value: float | None = None
    mean_mu: np.ndarray | None = None
    value_sd: float | None = None
    mu_spread: float | None = None
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "mu_star": arr(self.mu_star), "value_star": self.value_star,
            "mean_value": self.mean_value, "mean_mu": arr(self.mean_mu),
            "value_sd": self.value_sd, "mu_spread": self.mu_spread, "info": self.info,
        }

    @classmethod
    def from_json(cls, d: dict) -> "References":
        def arr(a):
            return None if a is None else np.asarray(a, dtype=np.float64)

        return cls(arr(d["mu_star"]), d["value_star"], d["mean_value"], arr(d["mean_mu"]),
                   d["value_sd"], d["mu_spread"], d.get("info", {}))


@dataclass(frozen=True)
class ReferenceProtocol:
    """Budgets and agreement tolerances for reference estimation.

    ``opt_*`` control the multi-start EM search for the optimum; ``sampler_*``
    the replicated long ULA runs. With ``sampler_relative`` the agreement
    tolerances are multiples of the posterior scale (standard deviation of
    ``U`` and root total variance of the position) measured by the replicas.
    A failed agreement check multiplies the run length by the growth factor.
    """

    opt_starts: int = 20
    opt_screen_points: int = 512
    opt_screen_iters: int = 200
    opt_polish: int = 8
    opt_iters: int = 2000
    opt_agreement_tol: float = 1e-8
    opt_growth: int = 10
    opt_retries: int = 2
    sampler_replicas: int = 4
    sampler_steps: int = 20000
    sampler_step_size: float | None = None
    sampler_value_tol: float = 1e-8
    sampler_mean_tol: float = 1e-5
    sampler_relative: bool = False
    sampler_growth: int = 10
    sampler_retries: int = 2
    identical_replicas: bool = False
    burn_in: float = 0.1

    def __post_init__(self):
        if self.opt_growth < 2 or self.sampler_growth < 2:
            raise ValueError("growth factors must be at least 2")
        if self.sampler_replicas < 2:
            raise ValueError("agreement needs at least two replicas")


def _batch_em(post: GmmPosterior, starts: np.ndarray, iters: int) -> np.ndarray:
    """EM from many starts at once; ``starts`` has shape ``(S, M, d)``."""
    mu = starts.copy()
    Y = post.data
    log_c, log_C = math.log(post.weight_coeff), (math.log(post.constant_component)
                                                 if post.constant_component > 0 else -math.inf)
    inv = 0.5 / post.sigma**2
    sqy = np.einsum("nd,nd->n", Y, Y)
    for _ in range(iters):
        sq = np.maximum(np.einsum("smd,smd->sm", mu, mu)[:, :, None]
                        - 2.0 * mu @ Y.T + sqy[None, None, :], 0.0)
        logw = log_c - sq * inv
        top = np.maximum(logw.max(axis=1), log_C)
        norm = np.log(np.exp(logw - top[:, None, :]).sum(axis=1)
                      + (np.exp(log_C - top) if post.constant_component > 0 else 0.0)) + top
        gamma = np.exp(logw - norm[:, None, :])
        mass = gamma.sum(axis=2)
        new = gamma @ Y / np.where(mass > 0, mass, 1.0)[:, :, None]
        mu = np.where((mass > 0)[:, :, None], new, mu)
    return mu


def _greedy_configuration(post: GmmPosterior, modes: np.ndarray) -> np.ndarray:
    """Place components one at a time on the mode that lowers ``U`` the most."""
    chosen: list[np.ndarray] = []
    for i in range(post.n_components):
        partial = GmmPosterior(post.data, post.sigma, i + 1, post.weight_coeff,
                               post.constant_component, post.prior_m, post.prior_R)
        best, best_v = None, math.inf
        for mode in modes:
            v = partial.value(np.concatenate([*chosen, mode]))
            if v < best_v:
                best, best_v = mode, v
        chosen.append(best)
    return np.concatenate(chosen)


def estimate_optimum(post: GmmPosterior, rng: RngStream,
                     protocol: ReferenceProtocol = ReferenceProtocol()) -> tuple[np.ndarray, float, dict]:
    """Best optimum found by a multi-start EM search.

    Starts: single-component modes reached from the data points (at most
    ``opt_screen_points`` of them), used stacked and greedily combined, plus
    ``opt_starts`` random data initializations. The best ``opt_polish``
    candidates are run for ``opt_iters`` EM iterations; the winner is accepted
    when a replicate run continuing for as long again moves ``U`` by less than
    ``opt_agreement_tol``; otherwise the length grows by ``opt_growth``, up to
    ``opt_retries`` times.
    """
    M, d = post.n_components, post.data_dim
    single = GmmPosterior(post.data, post.sigma, 1, post.weight_coeff,
                          post.constant_component, post.prior_m, post.prior_R)
    seeds = post.data
    if post.n_data > protocol.opt_screen_points:
        seeds = seeds[np.sort(rng.derive(1).choice(post.n_data, protocol.opt_screen_points, replace=False))]
    modes = _batch_em(single, seeds[:, None, :], protocol.opt_screen_iters)[:, 0, :]
    mode_vals = np.array([single.value(m) for m in modes])
    order = np.argsort(mode_vals, kind="stable")
    uniq: list[np.ndarray] = []
    for i in order:
        if all(np.linalg.norm(modes[i] - u) > 1e-6 for u in uniq):
            uniq.append(modes[i])
        if len(uniq) >= 32:
            break
    top = np.asarray(uniq)
    cands = [np.tile(top[0], M), _greedy_configuration(post, top)]
    if len(top) >= M:
        cands.append(top[:M].reshape(-1))
    for j in range(protocol.opt_starts):
        idx = rng.choice(post.n_data, min(M, post.n_data), replace=False)
        if len(idx) < M:
            idx = np.resize(idx, M)
        cands.append(post.data[idx].reshape(-1))
    starts = np.asarray(cands).reshape(-1, M, d)
    screened = _batch_em(post, starts, protocol.opt_screen_iters)
    vals = np.array([post.value(s.reshape(-1)) for s in screened])
    keep = np.argsort(vals, kind="stable")[:protocol.opt_polish]
    iters = protocol.opt_iters
    for attempt in range(protocol.opt_retries + 1):
        polished = _batch_em(post, screened[keep], iters)
        pvals = np.array([post.value(p.reshape(-1)) for p in polished])
        b = int(np.argmin(pvals))
        replica = _batch_em(post, polished[b:b + 1], iters)[0]
        rv = post.value(replica.reshape(-1))
        if abs(rv - pvals[b]) < protocol.opt_agreement_tol:
            info = {"opt_iters": iters, "opt_attempts": attempt + 1,
                    "opt_candidates": int(len(starts)), "opt_agreement": abs(rv - pvals[b])}
            best = replica.reshape(-1) if rv < pvals[b] else polished[b].reshape(-1)
            return best, min(rv, float(pvals[b])), info
        screened[keep] = polished
        last = iters
        iters *= protocol.opt_growth
    raise NonConvergentReferenceError(
        f"EM reference did not settle: |dU| = {abs(rv - pvals[b]):.3g} after {last} iterations")


def _chain_moments(obj: Objective, h: float, steps: int, rng: RngStream,
                   burn_in: float) -> tuple[float, np.ndarray, float, float]:
    seed = int(rng.generator.integers(2**63))
    cfg = ChainConfig(StepSchedule("constant", h), steps, seed=seed)
    _, s = run_chain(obj, cfg, "ula")
    start = int(burn_in * steps)
    x, u = s.positions[start:], s.values[start:]
    return float(u.mean()), x.mean(axis=0), float(u.std()), float(np.sqrt(x.var(axis=0).sum()))


def estimate_posterior_moments(obj: Objective, rng: RngStream,
                               protocol: ReferenceProtocol = ReferenceProtocol(),
                               step_size: float | None = None) -> tuple[float, np.ndarray, float, float, dict]:
    """``E[U]`` and ``E[x]`` under ``exp(-U)`` from replicated long ULA runs.

    Returns ``(mean_U, mean_x, sd_U, spread_x, info)``. Replicas use
    independent streams derived from ``rng`` (or one shared stream with
    ``identical_replicas``); they must agree pairwise within the protocol
    tolerances, otherwise the run length grows by ``sampler_growth`` up to
    ``sampler_retries`` times before :class:`NonConvergentReferenceError`.
    """
    h = step_size or protocol.sampler_step_size
    if h is None:
        h = 0.1 / obj.constants.L
    steps = protocol.sampler_steps
    for attempt in range(protocol.sampler_retries + 1):
        reps = []
        for r in range(protocol.sampler_replicas):
            sub = rng.derive(attempt, 0 if protocol.identical_replicas else r)
            reps.append(_chain_moments(obj, h, steps, sub, protocol.burn_in))
        mean_u = float(np.mean([r[0] for r in reps]))
        mean_x = np.mean([r[1] for r in reps], axis=0)
        sd_u = float(np.mean([r[2] for r in reps]))
        spread = float(np.mean([r[3] for r in reps]))
        vtol, mtol = protocol.sampler_value_tol, protocol.sampler_mean_tol
        if protocol.sampler_relative:
            vtol, mtol = vtol * sd_u, mtol * spread
        du = max(abs(a[0] - b[0]) for a in reps for b in reps)
        dx = max(float(np.linalg.norm(a[1] - b[1])) for a in reps for b in reps)
        if du < vtol and dx < mtol:
            info = {"sampler_steps": steps, "sampler_attempts": attempt + 1,
                    "sampler_step_size": h, "replica_value_spread": du, "replica_mean_spread": dx}
            return mean_u, mean_x, sd_u, spread, info
        last = steps
        steps *= protocol.sampler_growth
    raise NonConvergentReferenceError(
        f"sampler replicas disagree: dU={du:.3g} (tol {vtol:.3g}), dmu={dx:.3g} (tol {mtol:.3g}) "
        f"after {last} steps")


def estimate_references(obj: Objective, protocol: ReferenceProtocol, rng: RngStream, *,
                        optimum: bool = True, moments: bool = True,
                        step_size: float | None = None) -> References:
    """Reference optimum (EM, mixture posteriors only) and posterior expectations."""
    ref = References()
    if optimum:
        if not isinstance(obj, GmmPosterior):
            raise TypeError("the optimum reference needs a GmmPosterior")
        ref.mu_star, ref.value_star, info = estimate_optimum(obj, rng.derive(0), protocol)
        ref.info.update(info)
    if moments:
        mu, mx, sd, spread, info = estimate_posterior_moments(obj, rng.derive(1), protocol, step_size)
        ref.mean_value, ref.mean_mu, ref.value_sd, ref.mu_spread = mu, mx, sd, spread
        ref.info.update(info)
    return ref
