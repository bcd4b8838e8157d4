"""Target functions U (and grad U) for sampling and optimization.

Every objective maps a flat float64 vector to a scalar and exposes
``value``, ``grad`` and ``value_and_grad``. The density being sampled is
proportional to ``exp(-U)``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import RngStream, as_vector

__all__ = [
    "WELL_FACTOR",
    "ObjectiveConstants",
    "Objective",
    "QuadraticObjective",
    "PackedWellObjective",
    "GmmPosterior",
    "TemperedObjective",
    "packing_centers",
    "hard_objective_new",
    "hard_value",
    "hard_grad",
    "gmm_value",
    "gmm_grad",
    "gmm_responsibilities",
    "fact_d1_weight_coeff",
    "temper",
    "quadratic_objective",
    "objective_to_dict",
    "objective_from_dict",
    "save_objective",
    "load_objective",
]

#: 2*pi^2 + pi, the constant tying well depth, radius and smoothness together.
WELL_FACTOR = 2.0 * math.pi**2 + math.pi


@dataclass(frozen=True)
class ObjectiveConstants:
    """Smoothness ``L``, outside-ball strong convexity ``m``, nonconvex radius ``R``."""

    L: float
    m: float
    R: float
    dim: int

    def __post_init__(self):
        if not (self.m > 0 and self.L >= self.m):
            raise ValueError(f"need L >= m > 0, got L={self.L}, m={self.m}")
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        if self.dim < 1:
            raise ValueError("dim must be positive")

    def condition_number(self) -> float:
        return self.L / self.m

    def scaled(self, beta: float) -> "ObjectiveConstants":
        return ObjectiveConstants(beta * self.L, beta * self.m, self.R, self.dim)


class Objective:
    """Base class: subclasses implement ``value`` and ``grad``."""

    kind = "objective"
    constants: ObjectiveConstants

    @property
    def dim(self) -> int:
        return self.constants.dim

    def value(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def value_and_grad(self, x) -> tuple[float, np.ndarray]:
        return self.value(x), self.grad(x)


class QuadraticObjective(Objective):
    """``U(x) = a |x|^2 / 2``; the target is N(0, I/a)."""

    kind = "quadratic"

    def __init__(self, dim: int, curvature: float = 1.0):
        if curvature <= 0:
            raise ValueError("curvature must be positive")
        self.curvature = float(curvature)
        self.constants = ObjectiveConstants(self.curvature, self.curvature, 0.0, int(dim))

    def value(self, x) -> float:
        x = as_vector(x, self.dim)
        return 0.5 * self.curvature * float(x @ x)

    def grad(self, x) -> np.ndarray:
        return self.curvature * as_vector(x, self.dim)

    def value_and_grad(self, x):
        x = as_vector(x, self.dim)
        return 0.5 * self.curvature * float(x @ x), self.curvature * x


def quadratic_objective(dim: int, curvature: float = 1.0) -> QuadraticObjective:
    return QuadraticObjective(dim, curvature)


# --------------------------------------------------------------------------
# packed wells


def packing_centers(R_outer: float, r: float, dim: int, max_count: int) -> np.ndarray:
    """Centers of disjoint radius-``r`` balls inside ``B(0, R_outer)``.

    Points of the axis-aligned grid ``2r * Z^dim`` with norm at most
    ``R_outer - r``, enumerated in lexicographic order of their integer
    coordinates and truncated at ``max_count``. Returns a ``(k, dim)`` array.
    """
    if r <= 0 or R_outer <= 0:
        raise ValueError("radii must be positive")
    if R_outer <= r:
        raise ValueError(f"no ball of radius {r} fits in B(0, {R_outer})")
    if dim < 1 or max_count < 1:
        raise ValueError("dim and max_count must be positive")
    pitch = 2.0 * r
    limit = R_outer - r
    # squared-norm budget in grid units; tiny slack absorbs rounding at exact fits
    budget = (limit / pitch) ** 2 * (1.0 + 1e-12)
    kmax = int(math.floor(math.sqrt(budget)))
    out: list[tuple[int, ...]] = []
    coords = [0] * dim

    def fill(j: int, used: float) -> bool:
        if j == dim:
            out.append(tuple(coords))
            return len(out) >= max_count
        room = budget - used
        top = min(kmax, int(math.floor(math.sqrt(max(room, 0.0)))))
        for k in range(-top, top + 1):
            if used + k * k > budget:
                continue
            coords[j] = k
            if fill(j + 1, used + k * k):
                return True
        coords[j] = 0
        return False

    fill(0, 0.0)
    centers = np.asarray(out, dtype=np.float64).reshape(-1, dim) * pitch
    norms = np.linalg.norm(centers, axis=1)
    keep = norms <= limit
    return centers[keep]


class PackedWellObjective(Objective):
    """Cosine well of depth ``eps`` at one secret center, flat plateau, quadratic growth.

    ``U(x) = A cos(pi (|x - c|^2 - r^2) / r^2) - A`` inside the well,
    ``0`` on the rest of ``B(0, R/2)`` and ``m (|x| - R/2)^2`` outside, with
    ``A = L r^2 / (4 pi^2 + 2 pi)`` so that the minimum is ``-eps``.
    """

    kind = "packed_well"

    def __init__(self, constants: ObjectiveConstants, centers, secret_index: int,
                 well_radius: float, eps_gap: float):
        self.constants = constants
        self.centers = np.asarray(centers, dtype=np.float64).reshape(-1, constants.dim)
        if not 0 <= secret_index < len(self.centers):
            raise ValueError("secret_index out of range")
        self.secret_index = int(secret_index)
        self.well_radius = float(well_radius)
        self.eps_gap = float(eps_gap)
        self._center = self.centers[self.secret_index].copy()
        self._r2 = self.well_radius**2
        self._amp = constants.L * self._r2 / (2.0 * WELL_FACTOR)
        self._half = constants.R / 2.0
        self._m = constants.m

    @property
    def secret_center(self) -> np.ndarray:
        return self._center.copy()

    @property
    def n_wells(self) -> int:
        return len(self.centers)

    def value(self, x) -> float:
        x = as_vector(x, self.dim)
        diff = x - self._center
        s = float(diff @ diff)
        if s < self._r2:
            return self._amp * math.cos(math.pi * (s - self._r2) / self._r2) - self._amp
        n = math.sqrt(float(x @ x))
        if n >= self._half:
            return self._m * (n - self._half) ** 2
        return 0.0

    def grad(self, x) -> np.ndarray:
        return self.value_and_grad(x)[1]

    def value_and_grad(self, x):
        x = as_vector(x, self.dim)
        diff = x - self._center
        s = float(diff @ diff)
        if s < self._r2:
            phase = math.pi * (s - self._r2) / self._r2
            val = self._amp * math.cos(phase) - self._amp
            g = (-self._amp * math.sin(phase) * 2.0 * math.pi / self._r2) * diff
            return val, g
        n = math.sqrt(float(x @ x))
        if n >= self._half:
            if n == 0.0:
                return 0.0, np.zeros_like(x)
            return self._m * (n - self._half) ** 2, (2.0 * self._m * (1.0 - self._half / n)) * x
        return 0.0, np.zeros_like(x)


def hard_objective_new(L: float, m: float, R: float, eps: float, dim: int, rng: RngStream,
                       max_wells: int = 10**6, *, strict: bool = True) -> PackedWellObjective:
    """Build the packed-well instance with ``r = sqrt((2 pi^2 + pi) eps / L)``.

    With ``strict=False`` an ``eps`` above ``L R^2 / (64 (2 pi^2 + pi))`` (or
    ``L < 2m``) only warns; the construction stays well defined as long as at
    least one well fits in ``B(0, R/2)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    constants = ObjectiveConstants(L, m, R, dim)
    problems = []
    if eps > L * R**2 / (64.0 * WELL_FACTOR):
        problems.append(f"eps={eps} exceeds L R^2/(64(2pi^2+pi))={L * R**2 / (64.0 * WELL_FACTOR):.6g}")
    if L < 2 * m:
        problems.append(f"L={L} < 2m={2 * m}")
    if problems:
        if strict:
            raise ValueError("; ".join(problems))
        warnings.warn("outside the lower-bound regime: " + "; ".join(problems), stacklevel=2)
    r = math.sqrt(WELL_FACTOR * eps / L)
    if R / 2.0 <= r:
        raise ValueError(f"well radius {r:.6g} does not fit in B(0, R/2={R / 2})")
    centers = packing_centers(R / 2.0, r, dim, max_wells)
    if len(centers) == 0:
        raise ValueError("packing produced no centers")
    secret = int(rng.integers(len(centers)))
    return PackedWellObjective(constants, centers, secret, r, eps)


def hard_value(obj: PackedWellObjective, x) -> float:
    return obj.value(x)


def hard_grad(obj: PackedWellObjective, x) -> np.ndarray:
    return obj.grad(x)


# --------------------------------------------------------------------------
# Gaussian mixture log-posterior


class GmmPosterior(Objective):
    """Negative log-posterior of M isotropic mixture means plus a constant component.

    ``U(mu) = m (|mu|_F - sqrt(M) R)^2 1{|mu|_F >= sqrt(M) R}
    - sum_n log(sum_i c exp(-|y_n - mu_i|^2 / (2 sigma^2)) + C)``

    ``mu`` is a flat vector of length ``d*M``; component ``i`` occupies
    ``mu[i*d:(i+1)*d]``.
    """

    kind = "gmm"

    def __init__(self, data, sigma: float, n_components: int, weight_coeff: float,
                 constant_component: float = 1.0, prior_m: float = 1.0 / 64.0,
                 prior_R: float = 0.5):
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("data must be a nonempty (N, d) array")
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if n_components < 1:
            raise ValueError("need at least one component")
        if weight_coeff <= 0:
            raise ValueError("weight_coeff must be positive")
        if constant_component < 0:
            raise ValueError("constant_component must be nonnegative")
        if prior_m <= 0 or prior_R <= 0:
            raise ValueError("prior parameters must be positive")
        self.data = data
        self.sigma = float(sigma)
        self.n_components = int(n_components)
        self.weight_coeff = float(weight_coeff)
        self.constant_component = float(constant_component)
        self.prior_m = float(prior_m)
        self.prior_R = float(prior_R)
        self._log_c = math.log(self.weight_coeff)
        self._log_C = math.log(self.constant_component) if self.constant_component > 0 else -math.inf
        self._inv2s2 = 0.5 / self.sigma**2
        self._radius = math.sqrt(self.n_components) * self.prior_R
        self._sq_data = np.einsum("nd,nd->n", data, data)
        self._data_t = np.ascontiguousarray(data.T)
        self._constants: ObjectiveConstants | None = None

    @property
    def n_data(self) -> int:
        return self.data.shape[0]

    @property
    def data_dim(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data_dim * self.n_components

    @property
    def constants(self) -> ObjectiveConstants:
        """Smoothness from the Fact D.1 weight relation, prior curvature outside ``2 sqrt(M) R``."""
        if self._constants is None:
            if self.constant_component > 0:
                alpha = _fact_d1_alpha(self.data, self.sigma)
                l_data = alpha * self.weight_coeff / self.constant_component
            else:
                l_data = self.n_data / self.sigma**2
            # radial curvature of the prior is 2m; tangential is >= m beyond twice its radius
            self._constants = ObjectiveConstants(2.0 * self.prior_m + l_data, self.prior_m,
                                                 2.0 * self._radius, self.dim)
        return self._constants

    def means(self, mu) -> np.ndarray:
        return as_vector(mu, self.dim).reshape(self.n_components, self.data_dim)

    def _log_weights(self, means: np.ndarray) -> np.ndarray:
        sq = np.einsum("md,md->m", means, means)[:, None] - 2.0 * (means @ self._data_t) \
            + self._sq_data[None, :]
        np.maximum(sq, 0.0, out=sq)
        return self._log_c - sq * self._inv2s2

    def _normalized(self, logw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(lse, gamma)``: per-datum log of ``sum_i W_in + C`` and responsibilities."""
        top = logw.max(axis=0)
        if self.constant_component > 0:
            np.maximum(top, self._log_C, out=top)
        e = np.exp(logw - top[None, :])
        total = e.sum(axis=0)
        if self.constant_component > 0:
            total += np.exp(self._log_C - top)
        return np.log(total) + top, e / total[None, :]

    def _normalizer(self, logw: np.ndarray) -> np.ndarray:
        return self._normalized(logw)[0]

    def responsibilities(self, mu) -> np.ndarray:
        """``gamma[i, n] = W_in / (sum_k W_kn + C)``, shape ``(M, N)``."""
        return self._normalized(self._log_weights(self.means(mu)))[1]

    def _prior(self, mu: np.ndarray) -> tuple[float, np.ndarray | None]:
        norm = math.sqrt(float(mu @ mu))
        if norm < self._radius:
            return 0.0, None
        excess = norm - self._radius
        grad = None if norm == 0 else (2.0 * self.prior_m * excess / norm) * mu
        return self.prior_m * excess**2, grad

    def value(self, mu) -> float:
        mu = as_vector(mu, self.dim)
        logw = self._log_weights(mu.reshape(self.n_components, self.data_dim))
        prior, _ = self._prior(mu)
        return prior - float(np.sum(self._normalizer(logw)))

    def value_and_grad(self, mu):
        mu = as_vector(mu, self.dim)
        means = mu.reshape(self.n_components, self.data_dim)
        logw = self._log_weights(means)
        lse, gamma = self._normalized(logw)
        g = (gamma.sum(axis=1)[:, None] * means - gamma @ self.data) / self.sigma**2
        g = g.reshape(-1)
        prior, pg = self._prior(mu)
        if pg is not None:
            g = g + pg
        return prior - float(np.sum(lse)), g

    def grad(self, mu) -> np.ndarray:
        return self.value_and_grad(mu)[1]


def gmm_value(post: GmmPosterior, mu) -> float:
    return post.value(mu)


def gmm_grad(post: GmmPosterior, mu) -> np.ndarray:
    return post.grad(mu)


def gmm_responsibilities(post: GmmPosterior, mu) -> np.ndarray:
    return post.responsibilities(mu)


def _fact_d1_alpha(data: np.ndarray, sigma: float, chunk: int = 1024) -> float:
    # sup over candidate means taken at the data points
    s2 = sigma**2
    best_a = best_b = 0.0
    sqn = np.einsum("nd,nd->n", data, data)
    for start in range(0, data.shape[0], chunk):
        block = data[start:start + chunk]
        sq = np.maximum(sqn[start:start + chunk, None] - 2.0 * block @ data.T + sqn[None, :], 0.0)
        k = np.exp(-sq / (2.0 * s2))
        best_a = max(best_a, float(np.max(np.sum(sq / s2 * k, axis=1))))
        best_b = max(best_b, float(np.max(np.sum(k, axis=1))))
    return max(2.0 * best_a, best_b) / s2


def fact_d1_weight_coeff(data, sigma: float, smoothness: float, constant_component: float = 1.0) -> float:
    """Weight ``lambda_i / Z_i = l C / alpha`` making the data term ``l``-smooth."""
    if smoothness <= 0 or sigma <= 0:
        raise ValueError("smoothness and sigma must be positive")
    alpha = _fact_d1_alpha(np.asarray(data, dtype=np.float64), sigma)
    return smoothness * constant_component / alpha


# --------------------------------------------------------------------------
# tempering


class TemperedObjective(Objective):
    """``beta * U`` for a base objective ``U``."""

    def __init__(self, base: Objective, beta: float):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.base = base
        self.beta = float(beta)
        self.kind = f"tempered_{base.kind}"

    @property
    def constants(self) -> ObjectiveConstants:
        return self.base.constants.scaled(self.beta)

    def value(self, x) -> float:
        return self.beta * self.base.value(x)

    def grad(self, x) -> np.ndarray:
        return self.beta * self.base.grad(x)

    def value_and_grad(self, x):
        v, g = self.base.value_and_grad(x)
        return self.beta * v, self.beta * g


def temper(obj: Objective, beta: float) -> TemperedObjective:
    return TemperedObjective(obj, beta)


# --------------------------------------------------------------------------
# JSON layout


def objective_to_dict(obj: Objective) -> dict:
    if isinstance(obj, PackedWellObjective):
        c = obj.constants
        return {
            "kind": "packed_well",
            "constants": {"L": c.L, "m": c.m, "R": c.R, "dim": c.dim},
            "centers": obj.centers.tolist(),
            "secret_index": obj.secret_index,
            "well_radius": obj.well_radius,
            "eps_gap": obj.eps_gap,
        }
    if isinstance(obj, GmmPosterior):
        return {
            "kind": "gmm",
            "data": obj.data.tolist(),
            "sigma": obj.sigma,
            "M": obj.n_components,
            "weight_coeff": obj.weight_coeff,
            "constant_component": obj.constant_component,
            "prior_m": obj.prior_m,
            "prior_R": obj.prior_R,
            "dim": obj.data_dim,
        }
    if isinstance(obj, QuadraticObjective):
        return {"kind": "quadratic", "dim": obj.dim, "curvature": obj.curvature}
    if isinstance(obj, TemperedObjective):
        return {"kind": "tempered", "beta": obj.beta, "base": objective_to_dict(obj.base)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def objective_from_dict(d: dict) -> Objective:
    kind = d["kind"]
    if kind == "packed_well":
        c = d["constants"]
        constants = ObjectiveConstants(c["L"], c["m"], c["R"], int(c["dim"]))
        return PackedWellObjective(constants, d["centers"], d["secret_index"],
                                   d["well_radius"], d["eps_gap"])
    if kind == "gmm":
        data = np.asarray(d["data"], dtype=np.float64).reshape(-1, int(d["dim"]))
        return GmmPosterior(data, d["sigma"], d["M"], d["weight_coeff"],
                            d["constant_component"], d["prior_m"], d["prior_R"])
    if kind == "quadratic":
        return QuadraticObjective(int(d["dim"]), d["curvature"])
    if kind == "tempered":
        return TemperedObjective(objective_from_dict(d["base"]), d["beta"])
    raise ValueError(f"unknown objective kind {kind!r}")


def save_objective(obj: Objective, path) -> None:
    Path(path).write_text(json.dumps(objective_to_dict(obj), indent=1) + "\n")


def load_objective(path) -> Objective:
    return objective_from_dict(json.loads(Path(path).read_text()))
