"""Unadjusted and Metropolis-adjusted Langevin chains.

One ULA step is ``x' = x - h grad U(x) + xi`` with ``xi ~ N(0, 2h I)``. MALA
uses the same move as a proposal and accepts it with probability
``min(1, exp(A))``,

    A = U(x) - U(z) - |x - z + h grad U(z)|^2 / (4h) + |z - x + h grad U(x)|^2 / (4h),

which is the standard Metropolis-Hastings ratio for the Gaussian proposal.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .numerics import NonFiniteError, RngStream, as_vector
from .objectives import Objective, ObjectiveConstants
from .records import RunRecord

__all__ = [
    "ChainError",
    "ChainState",
    "StepSchedule",
    "ChainConfig",
    "SampleStream",
    "init_state",
    "ula_step",
    "mala_step",
    "mala_log_acceptance",
    "ula_theorem_stepsize",
    "mala_theorem_stepsize",
    "run_chain",
    "write_samples_csv",
]

_NOISE_BLOCK = 4096


class ChainError(RuntimeError):
    """A step failed; ``iteration`` is the index of the step being attempted."""

    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"step {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause


@dataclass(frozen=True)
class ChainState:
    """Chain position with cached ``U`` and ``grad U`` at that position.

    Counters follow the accounting convention: one gradient query per ULA
    step, two per MALA step. The evaluation at the initial point is not
    counted.
    """

    position: np.ndarray
    value: float
    grad: np.ndarray
    iteration: int = 0
    gradient_queries: int = 0
    value_queries: int = 0
    accepted_count: int = 0


def _evaluate(obj: Objective, x: np.ndarray) -> tuple[float, np.ndarray]:
    v, g = obj.value_and_grad(x)
    # NaN/Inf in g propagate into the sum
    if not (math.isfinite(v) and math.isfinite(float(g.sum()))):
        raise NonFiniteError("non-finite U or grad U")
    return v, g


def init_state(obj: Objective, x0) -> ChainState:
    x0 = as_vector(x0, obj.dim).copy()
    v, g = _evaluate(obj, x0)
    return ChainState(x0, v, g)


def mala_log_acceptance(x, z, value_x: float, value_z: float, grad_x, grad_z, h: float) -> float:
    """Log Metropolis-Hastings ratio for a Langevin proposal ``x -> z``."""
    fwd = z - x + h * grad_x
    bwd = x - z + h * grad_z
    return (value_x - value_z) + (float(fwd @ fwd) - float(bwd @ bwd)) / (4.0 * h)


def _ula_move(obj, state: ChainState, h: float, xi: np.ndarray) -> ChainState:
    x = state.position - h * state.grad + xi
    v, g = _evaluate(obj, x)
    return ChainState(x, v, g, state.iteration + 1, state.gradient_queries + 1,
                      state.value_queries + 1, state.accepted_count)


def _mala_move(obj, state: ChainState, h: float, xi: np.ndarray, u: float) -> ChainState:
    x = state.position
    z = x - h * state.grad + xi
    vz, gz = _evaluate(obj, z)
    # forward residual z - x + h grad(x) is xi itself
    bwd = h * (state.grad + gz) - xi
    log_a = (state.value - vz) + (xi.dot(xi) - bwd.dot(bwd)) / (4.0 * h)
    accept = u == 0.0 or math.log(u) < log_a
    if accept:
        return ChainState(z, vz, gz, state.iteration + 1, state.gradient_queries + 2,
                          state.value_queries + 1, state.accepted_count + 1)
    return replace(state, iteration=state.iteration + 1,
                   gradient_queries=state.gradient_queries + 2,
                   value_queries=state.value_queries + 1)


def ula_step(obj: Objective, state: ChainState, h: float, rng: RngStream) -> ChainState:
    if h <= 0:
        raise ValueError("step size must be positive")
    xi = rng.normal(obj.dim) * math.sqrt(2.0 * h)
    return _ula_move(obj, state, h, xi)


def mala_step(obj: Objective, state: ChainState, h: float, rng: RngStream) -> ChainState:
    """One MALA transition; draws the proposal noise, then the uniform."""
    if h <= 0:
        raise ValueError("step size must be positive")
    xi = rng.normal(obj.dim) * math.sqrt(2.0 * h)
    u = float(rng.uniform())
    return _mala_move(obj, state, h, xi, u)


def ula_theorem_stepsize(constants: ObjectiveConstants, eps: float, prefactor: float = 1.0) -> float:
    """``c e^{-16 L R^2} (m/L) (1/L) eps^2 / d``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    L, m, R, d = constants.L, constants.m, constants.R, constants.dim
    return prefactor * math.exp(-16.0 * L * R * R) * (m / L) / L * eps * eps / d


def mala_theorem_stepsize(constants: ObjectiveConstants, eps: float, prefactor: float = 1.0) -> float:
    """``c e^{-8 L R^2} kappa^{-1/2} L^{-1} (d ln kappa + ln 1/eps)^{-1/2} d^{-1/2}``.

    ``ln kappa`` is floored at ``ln 2`` so that a unit condition number
    does not send the step to infinity.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    L, R, d = constants.L, constants.R, constants.dim
    kappa = constants.condition_number()
    log_kappa = max(math.log(kappa), math.log(2.0))
    return (prefactor * math.exp(-8.0 * L * R * R) / math.sqrt(kappa) / L
            / math.sqrt(d * log_kappa + math.log(1.0 / eps)) / math.sqrt(d))


@dataclass(frozen=True)
class StepSchedule:
    """``constant`` uses ``h``; the theorem kinds use ``prefactor`` and ``eps``."""

    kind: str = "constant"
    h: float | None = None
    prefactor: float = 1.0
    eps: float = 0.1

    def __post_init__(self):
        if self.kind not in ("constant", "theorem_ula", "theorem_mala"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant" and not (self.h is not None and self.h > 0):
            raise ValueError("constant schedule needs h > 0")

    def step_size(self, constants: ObjectiveConstants, k: int = 0) -> float:
        if self.kind == "constant":
            h = float(self.h)
        elif self.kind == "theorem_ula":
            h = ula_theorem_stepsize(constants, self.eps, self.prefactor)
        else:
            h = mala_theorem_stepsize(constants, self.eps, self.prefactor)
        if not h > 0:
            raise ValueError(f"schedule produced a non-positive step {h!r}")
        return h


@dataclass(frozen=True)
class ChainConfig:
    schedule: StepSchedule
    max_steps: int
    init: str = "gaussian_over_L"
    x0: tuple | None = None
    seed: int = 0
    stream_id: int = 0
    thin: int = 1
    keep_samples: bool = True

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if self.init not in ("gaussian_over_L", "fixed"):
            raise ValueError(f"unknown init law {self.init!r}")
        if self.init == "fixed" and self.x0 is None:
            raise ValueError("fixed init needs x0")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")


@dataclass
class SampleStream:
    """Retained samples (``steps[j]`` is the iteration that produced ``positions[j]``)."""

    steps: np.ndarray
    positions: np.ndarray
    final_state: ChainState | None = None
    values: np.ndarray = field(default_factory=lambda: np.empty(0))


def _initial_position(obj: Objective, config: ChainConfig, rng: RngStream) -> np.ndarray:
    if config.init == "fixed":
        return as_vector(config.x0, obj.dim).copy()
    return rng.normal(obj.dim) / math.sqrt(obj.constants.L)


def run_chain(obj: Objective, config: ChainConfig, kind: str = "ula",
              stop: Callable[[ChainState], bool] | None = None) -> tuple[RunRecord, SampleStream]:
    """Run ULA or MALA until ``stop(state)`` is true or ``max_steps`` is reached.

    Randomness comes from three streams derived from ``(seed, stream_id)``:
    initial point, proposal noise and acceptance uniforms, so a chain is a
    deterministic function of its config.
    """
    kind = kind.lower()
    if kind not in ("ula", "mala"):
        raise ValueError(f"unknown chain kind {kind!r}")
    master = RngStream(config.seed, config.stream_id)
    noise_rng, accept_rng = master.derive(1), master.derive(2)
    t0 = time.perf_counter()
    state = init_state(obj, _initial_position(obj, config, master.derive(0)))
    d = obj.dim
    constants = obj.constants
    steps, kept, kept_values = [], [], []
    converged, first = False, None
    h = config.schedule.step_size(constants, 0)
    noise = uniforms = None
    for k in range(config.max_steps):
        j = k % _NOISE_BLOCK
        if j == 0:
            n = min(_NOISE_BLOCK, config.max_steps - k)
            noise = noise_rng.normal((n, d))
            if kind == "mala":
                uniforms = accept_rng.uniform(n)
        if config.schedule.kind != "constant":
            h = config.schedule.step_size(constants, k)
        xi = noise[j] * math.sqrt(2.0 * h)
        try:
            if kind == "ula":
                state = _ula_move(obj, state, h, xi)
            else:
                state = _mala_move(obj, state, h, xi, float(uniforms[j]))
        except (NonFiniteError, FloatingPointError, ValueError) as exc:
            raise ChainError(k + 1, exc) from exc
        if config.keep_samples and state.iteration % config.thin == 0:
            steps.append(state.iteration)
            kept.append(state.position)
            kept_values.append(state.value)
        if stop is not None and stop(state):
            converged, first = True, state.iteration
            break
    wall = (time.perf_counter() - t0) * 1e3
    record = RunRecord(
        algo=kind,
        objective=getattr(obj, "kind", type(obj).__name__),
        dim=d,
        seed=config.seed,
        step_size=h,
        queries=state.gradient_queries,
        converged=converged,
        wall_ms=wall,
        final_value=state.value,
        acceptance_rate=(state.accepted_count / state.iteration
                         if kind == "mala" and state.iteration else float("nan")),
        iterations=state.iteration,
        value_queries=state.value_queries,
        first_passage=first,
        budget=config.max_steps * (2 if kind == "mala" else 1),
    )
    positions = np.asarray(kept).reshape(-1, d)
    stream = SampleStream(np.asarray(steps, dtype=np.int64), positions, state,
                          np.asarray(kept_values, dtype=np.float64))
    return record, stream


def write_samples_csv(path, stream: SampleStream) -> None:
    """One row per retained sample: ``step, x0, ..., x{d-1}``."""
    d = stream.positions.shape[1] if stream.positions.ndim == 2 else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + [f"x{i}" for i in range(d)])
        for s, x in zip(stream.steps, stream.positions):
            w.writerow([int(s)] + [repr(float(v)) for v in x])
