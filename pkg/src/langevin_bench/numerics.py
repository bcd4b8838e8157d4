"""Dense-vector helpers, seeded random streams and a finite-difference gradient."""
from __future__ import annotations

import copy
import math
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "RNG_ALGORITHM",
    "NonFiniteError",
    "RngStream",
    "as_vector",
    "gaussian_vector",
    "finite_diff_grad",
    "log_sum_exp",
]

#: Recorded in every persisted artifact so that tables can be tied to a generator.
RNG_ALGORITHM = f"numpy-{np.__version__}/Philox4x64-10/SeedSequence"


class NonFiniteError(FloatingPointError):
    """Raised when a computation that must stay finite produced NaN or Inf."""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Return ``x`` as a contiguous 1-d float64 array, checking its length."""
    v = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected a vector of length {dim}, got {v.shape[0]}")
    return v


class RngStream:
    """Deterministic random source keyed by ``(seed, stream_id)``.

    Backed by numpy's counter-based Philox generator seeded through a
    ``SeedSequence`` whose spawn key is the stream id (plus any derived
    sub-keys). Equal keys give equal draws; different keys give independent
    streams.
    """

    def __init__(self, seed: int, stream_id: int = 0, *, path: Sequence[int] = ()):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"

    def derive(self, *keys: int) -> "RngStream":
        """Child stream; depends only on this stream's key and ``keys``."""
        return RngStream(self.seed, self.stream_id, path=self.path + tuple(keys))

    def copy(self) -> "RngStream":
        """Independent copy at the current position of the stream."""
        return copy.deepcopy(self)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, size, std: float = 1.0) -> np.ndarray:
        return self._gen.standard_normal(size) * std

    def uniform(self, size=None):
        return self._gen.random(size)

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size=size)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)


def gaussian_vector(rng: RngStream, dim: int, std: float = 1.0) -> np.ndarray:
    """``dim`` i.i.d. draws from N(0, std^2)."""
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if std < 0:
        raise ValueError("std must be nonnegative")
    z = rng.normal(dim)
    if std == 0:
        return np.zeros(dim)
    return z * std


def finite_diff_grad(
    f: Callable[[np.ndarray], float], x, eps: float | None = None
) -> np.ndarray:
    """Central-difference gradient of ``f`` at ``x``.

    The default step is ``1e-5 * max(1, |x|_inf)``.
    """
    x = as_vector(x)
    if eps is None:
        eps = 1e-5 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = np.empty_like(x)
    xp = x.copy()
    for j in range(x.shape[0]):
        xp[j] = x[j] + eps
        fp = float(f(xp))
        xp[j] = x[j] - eps
        fm = float(f(xp))
        xp[j] = x[j]
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteError(f"non-finite function value near coordinate {j}")
        g[j] = (fp - fm) / (2.0 * eps)
    return g


def log_sum_exp(values, axis: int | None = None):
    """``log(sum(exp(values)))`` with a max shift.

    With ``axis=None`` the input is flattened and a float is returned.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty sequence")
    if axis is None:
        vmax = float(np.max(v))
        if not math.isfinite(vmax):
            return vmax
        return vmax + math.log(float(np.sum(np.exp(v - vmax))))
    vmax = np.max(v, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(vmax), vmax, 0.0)
    with np.errstate(divide="ignore"):  # all -inf rows give log(0) = -inf
        out = np.log(np.sum(np.exp(v - shift), axis=axis, keepdims=True)) + shift
    return np.squeeze(out, axis=axis)
