"""Gradient descent and EM for the mixture-mean posterior."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import NonFiniteError, RngStream, as_vector
from .objectives import GmmPosterior, Objective
from .records import RunRecord

__all__ = [
    "EmState",
    "EmTrajectory",
    "gd_step",
    "run_gd",
    "em_e_step",
    "em_m_step",
    "em_iteration",
    "em_init_from_data",
    "run_em",
]


def gd_step(obj: Objective, x, h: float) -> np.ndarray:
    """``x - h grad U(x)``."""
    if h <= 0:
        raise ValueError("step size must be positive")
    g = obj.grad(x)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("non-finite gradient")
    return as_vector(x, obj.dim) - h * g


def run_gd(obj: Objective, x0, h: float, max_steps: int,
           stop: Callable[[int, np.ndarray], bool] | None = None) -> tuple[np.ndarray, int]:
    """Iterate :func:`gd_step`; returns the last iterate and the number of steps taken."""
    x = as_vector(x0, obj.dim).copy()
    for k in range(1, max_steps + 1):
        x = gd_step(obj, x, h)
        if stop is not None and stop(k, x):
            return x, k
    return x, max_steps


@dataclass(frozen=True)
class EmState:
    """EM iterate; one E+M sweep is charged as one gradient-query equivalent."""

    mu: np.ndarray
    iteration: int = 0
    gradient_query_equivalents: int = 0
    value: float = math.nan
    dormant: tuple[int, ...] = ()


def em_e_step(post: GmmPosterior, mu) -> np.ndarray:
    """Responsibilities ``gamma`` of shape ``(M, N)``."""
    return post.responsibilities(mu)


def em_m_step(post: GmmPosterior, gamma, previous=None) -> tuple[np.ndarray, np.ndarray]:
    """Weighted data means, one per row of ``gamma``.

    Returns ``(mu, dormant)``. A row with zero total weight keeps its
    component at ``previous`` and is flagged in the boolean ``dormant`` mask.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    M, N = post.n_components, post.n_data
    if gamma.shape != (M, N):
        raise ValueError(f"gamma must have shape {(M, N)}, got {gamma.shape}")
    mass = gamma.sum(axis=1)
    dormant = ~(mass > 0)
    safe = np.where(dormant, 1.0, mass)
    means = (gamma @ post.data) / safe[:, None]
    if dormant.any():
        if previous is None:
            raise ValueError("zero responsibility mass and no previous means to keep")
        prev = post.means(previous)
        means[dormant] = prev[dormant]
    return means.reshape(-1), dormant


def em_iteration(post: GmmPosterior, mu) -> tuple[np.ndarray, np.ndarray]:
    gamma = em_e_step(post, mu)
    return em_m_step(post, gamma, previous=mu)


def em_init_from_data(post: GmmPosterior, rng: RngStream, jitter: float = 0.0) -> np.ndarray:
    """``M`` distinct data points drawn without replacement, plus optional N(0, jitter^2) noise."""
    M, N = post.n_components, post.n_data
    if N < M:
        raise ValueError(f"need at least {M} data points, got {N}")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    idx = rng.choice(N, M, replace=False)
    mu = post.data[idx].copy()
    if jitter > 0:
        mu = mu + jitter * rng.normal(mu.shape)
    return mu.reshape(-1)


@dataclass
class EmTrajectory:
    iterations: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    movement: list[np.ndarray] = field(default_factory=list)

    def rows(self):
        for k, v, mv in zip(self.iterations, self.values, self.movement):
            yield [k, v, *mv.tolist()]


def run_em(post: GmmPosterior, mu0, stop: Callable[[EmState], bool] | None = None,
           max_iters: int = 1000, *, stall_tol: float | None = None,
           record_trajectory: bool = True) -> tuple[RunRecord, EmState, EmTrajectory]:
    """Iterate E and M steps until ``stop(state)`` fires or ``max_iters`` is reached.

    With ``stall_tol`` set, the run also ends once no component moves by more
    than ``stall_tol`` in an iteration; ``notes["stalled_at"]`` records where.
    With ``stall_tol=0`` this only triggers at an exact fixed point, after
    which every later iterate would be identical.
    """
    t0 = time.perf_counter()
    mu = as_vector(mu0, post.dim).copy()
    value = post.value(mu)
    state = EmState(mu, 0, 0, value)
    traj = EmTrajectory()
    if record_trajectory:
        traj.iterations.append(0)
        traj.values.append(value)
        traj.movement.append(np.zeros(post.n_components))
    converged, first, stalled = False, None, None
    dormant_seen: set[int] = set()
    d = post.data_dim
    for t in range(1, max_iters + 1):
        new_mu, dormant = em_iteration(post, state.mu)
        value = post.value(new_mu)
        if not (math.isfinite(value) and np.all(np.isfinite(new_mu))):
            raise NonFiniteError(f"EM iteration {t} produced non-finite values")
        dormant_seen.update(np.flatnonzero(dormant).tolist())
        move = np.linalg.norm((new_mu - state.mu).reshape(-1, d), axis=1)
        state = EmState(new_mu, t, t, value, tuple(np.flatnonzero(dormant).tolist()))
        if record_trajectory:
            traj.iterations.append(t)
            traj.values.append(value)
            traj.movement.append(move)
        if stop is not None and stop(state):
            converged, first = True, t
            break
        if stall_tol is not None and float(move.max()) <= stall_tol:
            stalled = t
            break
    record = RunRecord(
        algo="em",
        objective=post.kind,
        dim=post.data_dim,
        mixtures=post.n_components,
        n_data=post.n_data,
        queries=state.gradient_query_equivalents,
        converged=converged,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        final_value=state.value,
        iterations=state.iteration,
        value_queries=state.iteration + 1,
        first_passage=first,
        budget=max_iters,
    )
    if stalled is not None:
        record.notes["stalled_at"] = stalled
    if dormant_seen:
        record.notes["dormant_components"] = sorted(dormant_seen)
    return record, state, traj
