"""Synthetic datasets for the mixture-mean experiments.

``sparse``: every point has ``floor(log2 d)`` nonzero coordinates drawn
uniformly from [-1, 1] on a uniformly chosen support.

``adversarial``: ``N - 9M`` points with norm at most 0.45 and pairwise
separation at least 0.11, followed by ``M`` clusters of nine points, each
within ``sigma/2`` of a distinct anchor taken from the separated group.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import RngStream
from .objectives import packing_centers

__all__ = [
    "SEPARATED_RADIUS",
    "SEPARATION",
    "Dataset",
    "Violation",
    "gen_sparse_dataset",
    "gen_adversarial_dataset",
    "adversarial_sigma",
    "validate_dataset",
    "save_dataset",
    "load_dataset",
]

SEPARATED_RADIUS = 0.45
SEPARATION = 0.11
CLUSTER_SIZE = 9


@dataclass
class Dataset:
    kind: str
    points: np.ndarray
    d: int
    M: int
    sigma: float
    seed: int | None = None
    anchors: list[int] = field(default_factory=list)
    requested_N: int | None = None

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def n_separated(self) -> int:
        return self.N - CLUSTER_SIZE * self.M if self.kind == "adversarial" else self.N

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "d": self.d,
            "N": self.N,
            "M": self.M,
            "sigma": self.sigma,
            "seed": self.seed,
            "anchors": list(self.anchors),
            "points": self.points.tolist(),
        }
        if self.requested_N is not None and self.requested_N != self.N:
            out["requested_N"] = self.requested_N
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Dataset":
        pts = np.asarray(d["points"], dtype=np.float64).reshape(-1, int(d["d"]))
        if pts.shape[0] != int(d["N"]):
            raise ValueError("N does not match the number of points")
        return cls(d["kind"], pts, int(d["d"]), int(d["M"]), float(d["sigma"]), d.get("seed"),
                   [int(a) for a in d.get("anchors", [])], d.get("requested_N"))


@dataclass(frozen=True)
class Violation:
    rule: str
    indices: tuple

    def __str__(self) -> str:
        shown = ", ".join(map(str, self.indices[:10]))
        more = "" if len(self.indices) <= 10 else f", ... ({len(self.indices)} total)"
        return f"{self.rule}: {shown}{more}"


def _support_size(d: int) -> int:
    return int(math.floor(math.log2(d)))


def gen_sparse_dataset(d: int, N: int, rng: RngStream, M: int | None = None,
                       sigma: float | None = None) -> Dataset:
    """Sparse uniform data; ``M`` defaults to ``floor(log2 d)``, ``sigma`` to ``1/sqrt(d)``."""
    if d < 2:
        raise ValueError("sparse data needs d >= 2")
    if N < 1:
        raise ValueError("N must be positive")
    k = _support_size(d)
    gen = rng.generator
    # argsort of uniform keys gives a uniform k-subset per row
    support = np.argsort(gen.random((N, d)), axis=1)[:, :k]
    pts = np.zeros((N, d))
    np.put_along_axis(pts, support, gen.uniform(-1.0, 1.0, size=(N, k)), axis=1)
    return Dataset("sparse", pts, d, k if M is None else M,
                   1.0 / math.sqrt(d) if sigma is None else sigma, rng.seed)


def adversarial_sigma(N: int) -> float:
    return 0.01 / math.sqrt(math.log2(N))


def _uniform_ball(gen: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    z = gen.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * (radius * gen.random(n) ** (1.0 / d))[:, None]


def gen_adversarial_dataset(d: int, M: int, N: int, rng: RngStream) -> Dataset:
    """Separated points plus ``M`` tight clusters; ``sigma = 0.01/sqrt(log2 N)``."""
    if M < 1 or N < 10 * M:
        raise ValueError(f"need M >= 1 and N >= 10M, got M={M}, N={N}")
    n_sep = N - CLUSTER_SIZE * M
    sigma = adversarial_sigma(N)
    pool = packing_centers(SEPARATED_RADIUS, SEPARATION / 2.0, d, max(4 * n_sep, 64))
    if len(pool) < n_sep:
        raise ValueError(
            f"only {len(pool)} points with separation {SEPARATION} fit in "
            f"B(0, {SEPARATED_RADIUS}) at d={d}; need {n_sep}"
        )
    gen = rng.generator
    sep = pool[np.sort(gen.choice(len(pool), size=n_sep, replace=False))]
    anchors = sorted(int(a) for a in gen.choice(n_sep, size=M, replace=False))
    clusters = [sep[a] + _uniform_ball(gen, CLUSTER_SIZE, d, sigma / 2.0) for a in anchors]
    pts = np.vstack([sep, *clusters])
    return Dataset("adversarial", pts, d, M, sigma, rng.seed, anchors)


def _pairs_closer_than(points: np.ndarray, dist: float) -> list[tuple[int, int]]:
    sq = np.einsum("nd,nd->n", points, points)
    g = sq[:, None] - 2.0 * points @ points.T + sq[None, :]
    # confirm candidates exactly on the raw differences
    i, j = np.nonzero(np.triu(g < dist * dist * (1 + 1e-9), k=1))
    out = []
    for a, b in zip(i.tolist(), j.tolist()):
        if np.linalg.norm(points[a] - points[b]) < dist:
            out.append((a, b))
    return out


def validate_dataset(ds: Dataset) -> list[Violation]:
    """Empty list iff every rule of the dataset kind holds."""
    out: list[Violation] = []
    pts = ds.points
    if pts.ndim != 2 or pts.shape[1] != ds.d:
        return [Violation("shape", (pts.shape,))]
    if not np.all(np.isfinite(pts)):
        out.append(Violation("finite", tuple(np.flatnonzero(~np.isfinite(pts).all(axis=1)).tolist())))
    if ds.kind == "sparse":
        k = _support_size(ds.d)
        bad = np.flatnonzero(np.count_nonzero(pts, axis=1) != k)
        if bad.size:
            out.append(Violation("support_size", tuple(bad.tolist())))
        bad = np.flatnonzero(np.any(np.abs(pts) > 1.0, axis=1))
        if bad.size:
            out.append(Violation("entry_range", tuple(bad.tolist())))
        return out
    if ds.kind != "adversarial":
        return [Violation("kind", (ds.kind,))]
    n_sep = ds.n_separated
    if n_sep < 1 or len(ds.anchors) != ds.M:
        return out + [Violation("layout", (ds.N, ds.M, len(ds.anchors)))]
    anchors = list(ds.anchors)
    if len(set(anchors)) != len(anchors) or any(not 0 <= a < n_sep for a in anchors):
        out.append(Violation("anchors", tuple(anchors)))
    norms = np.linalg.norm(pts, axis=1)
    limit = np.full(ds.N, SEPARATED_RADIUS + ds.sigma / 2.0)
    limit[:n_sep] = SEPARATED_RADIUS
    bad = np.flatnonzero(norms > limit * (1 + 1e-12))
    if bad.size:
        out.append(Violation("norm", tuple(bad.tolist())))
    close = _pairs_closer_than(pts[:n_sep], SEPARATION)
    if close:
        out.append(Violation("separation", tuple(close)))
    far = []
    for k, a in enumerate(anchors):
        if not 0 <= a < n_sep:
            continue
        lo = n_sep + CLUSTER_SIZE * k
        dist = np.linalg.norm(pts[lo:lo + CLUSTER_SIZE] - pts[a], axis=1)
        far.extend((lo + np.flatnonzero(dist > ds.sigma / 2.0 * (1 + 1e-12))).tolist())
    if far:
        out.append(Violation("cluster", tuple(far)))
    return out


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(json.dumps(ds.to_json()) + "\n")


def load_dataset(path) -> Dataset:
    return Dataset.from_json(json.loads(Path(path).read_text()))
