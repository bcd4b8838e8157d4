"""Oracle checks behind ``langevin-bench validate`` and the acceptance tests.

Each ``check_*`` function returns a :class:`Check`. The quick suite covers
gradients, the hard instance, packing, bound calculators, the TV metric and
dataset round-trips; ``quick=False`` adds the long sampler oracles and the
EM trapping replication.
"""
from __future__ import annotations

import math
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds
from .data import gen_adversarial_dataset, gen_sparse_dataset, load_dataset, save_dataset, validate_dataset
from .diagnostics import GridDensity, GridSpec, grid_density, histogram, tv_distance
from .numerics import RngStream, finite_diff_grad
from .objectives import (
    WELL_FACTOR,
    GmmPosterior,
    ObjectiveConstants,
    PackedWellObjective,
    hard_objective_new,
    packing_centers,
    quadratic_objective,
    temper,
)
from .optimizers import run_em
from .samplers import ChainConfig, StepSchedule, mala_theorem_stepsize, run_chain, ula_theorem_stepsize

__all__ = [
    "Check",
    "check_gradients",
    "check_hard_instance",
    "check_packing",
    "check_bounds",
    "check_tv_metric",
    "check_datasets",
    "check_d1_sampler",
    "check_quadratic_moments",
    "check_em_trapping",
    "run_suite",
]

SUITE_SEED = 20240611


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str

    def __iter__(self):
        return iter((self.name, self.ok, self.detail))


def _rel_err(g: np.ndarray, ref: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(g)), float(np.linalg.norm(ref)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(g - ref)) / scale


def _unit(gen: np.random.Generator, d: int) -> np.ndarray:
    z = gen.standard_normal(d)
    return z / np.linalg.norm(z)


def _hard_instance(dim: int, seed: int = SUITE_SEED) -> PackedWellObjective:
    # valid regime: eps below L R^2 / (64 (2 pi^2 + pi)) and L >= 2m
    return hard_objective_new(1.0, 0.25, 2.0, 0.002, dim, RngStream(seed, dim))


def _packed_points(obj: PackedWellObjective, gen: np.random.Generator, n: int,
                   margin: float = 1e-3) -> np.ndarray:
    """Points spread over the well, the plateau and the quadratic shell, away from seams."""
    c, r, half, d = obj.secret_center, obj.well_radius, obj.constants.R / 2, obj.dim
    out = []
    while len(out) < n:
        kind = len(out) % 3
        if kind == 0:
            x = c + _unit(gen, d) * r * gen.uniform(0.05, 1 - margin)
        elif kind == 1:
            x = _unit(gen, d) * half * gen.uniform(0, 1 - margin)
            if np.linalg.norm(x - c) < r * (1 + margin):
                continue
        else:
            x = _unit(gen, d) * half * gen.uniform(1 + margin, 4.0)
        out.append(x)
    return np.asarray(out)


def _gmm_instance(gen: np.random.Generator, d: int, M: int, N: int, C: float) -> GmmPosterior:
    data = gen.uniform(-1, 1, size=(N, d))
    sigma = 0.5
    return GmmPosterior(data, sigma, M, sigma * sigma / 10.0, C, prior_m=0.5, prior_R=0.4)


def _gmm_points(post: GmmPosterior, gen: np.random.Generator, n: int) -> np.ndarray:
    out = []
    radius = math.sqrt(post.n_components) * post.prior_R
    while len(out) < n:
        idx = gen.choice(post.n_data, post.n_components, replace=False)
        mu = post.data[idx] + 0.3 * post.sigma * gen.standard_normal((post.n_components, post.data.shape[1]))
        mu = mu.reshape(-1)
        if len(out) % 4 == 3:
            mu *= gen.uniform(0.2, 3.0)
        if abs(np.linalg.norm(mu) - radius) < 1e-3 * radius:
            continue
        out.append(mu)
    return np.asarray(out)


def check_gradients(n_points: int = 100, tol: float = 1e-5) -> Check:
    """Analytic against central-difference gradients, tempered variants included."""
    gen = np.random.default_rng(SUITE_SEED)
    cases = []
    for d in (1, 3, 6):
        obj = _hard_instance(d)
        cases.append((f"packed_well d={d}", obj, _packed_points(obj, gen, n_points)))
    for d, M, C in ((2, 1, 1.0), (5, 2, 1.0), (10, 2, 1e-9)):
        post = _gmm_instance(gen, d, M, 40, C)
        cases.append((f"gmm d={d} M={M} C={C:g}", post, _gmm_points(post, gen, n_points)))
    for d in (1, 4, 10):
        obj = quadratic_objective(d, curvature=gen.uniform(0.5, 3.0))
        cases.append((f"quadratic d={d}", obj, gen.standard_normal((n_points, d)) * 2.0))
    worst, where = 0.0, ""
    for label, obj, pts in list(cases):
        for name, target in ((label, obj), (label + " tempered", temper(obj, 2.5))):
            for x in pts:
                e = _rel_err(target.grad(x), finite_diff_grad(target.value, x))
                if e > worst:
                    worst, where = e, name
    return Check("gradient fidelity", worst < tol,
                 f"worst relative error {worst:.2e} ({where}) over {len(cases) * 2} objectives")


def check_hard_instance(n_pairs: int = 1000, n_boundary: int = 100) -> Check:
    gen = np.random.default_rng(SUITE_SEED + 1)
    failures = []
    stats = {"bottom": 0.0, "plateau": 0.0, "value_jump": 0.0, "grad_jump": 0.0,
             "smooth": 0.0, "convex": math.inf, "swap": 0.0}
    for d in (1, 2, 3):
        obj = _hard_instance(d)
        L, m, R = obj.constants.L, obj.constants.m, obj.constants.R
        c, r, half = obj.secret_center, obj.well_radius, R / 2
        stats["bottom"] = max(stats["bottom"], abs(obj.value(c) + obj.eps_gap))

        others = [j for j in range(obj.n_wells) if j != obj.secret_index]
        plateau = [x for x in _packed_points(obj, gen, 300)[1::3]]
        plateau += [obj.centers[j] for j in others[:50]]
        for x in plateau:
            stats["plateau"] = max(stats["plateau"], abs(obj.value(x)), float(np.abs(obj.grad(x)).max()))

        delta = 1e-10
        for _ in range(n_boundary):
            u = _unit(gen, d)
            for centre, rad in ((c, r), (np.zeros(d), half)):
                vi, gi = obj.value_and_grad(centre + u * rad * (1 - delta))
                vo, go = obj.value_and_grad(centre + u * rad * (1 + delta))
                stats["value_jump"] = max(stats["value_jump"], abs(vi - vo))
                stats["grad_jump"] = max(stats["grad_jump"], float(np.linalg.norm(gi - go)))

        for k in range(n_pairs):
            if k % 2 == 0:
                x = c + _unit(gen, d) * r * gen.uniform(0, 1.5)
                z = x + _unit(gen, d) * gen.uniform(0, min(R, 2 * r))
            else:
                x = _unit(gen, d) * gen.uniform(0, 1.5 * R)
                z = x + _unit(gen, d) * gen.uniform(0, R)
            dist = float(np.linalg.norm(x - z))
            if dist > 0:
                ratio = float(np.linalg.norm(obj.grad(x) - obj.grad(z))) / (L * dist)
                stats["smooth"] = max(stats["smooth"], ratio)

        for _ in range(n_pairs // 2):
            u = _unit(gen, d)
            t1, t2 = gen.uniform(R * (1 + 1e-9), 5 * R, size=2)
            x, z = t1 * u, t2 * u
            gap = float((obj.grad(x) - obj.grad(z)) @ (x - z)) / (m * float((x - z) @ (x - z)))
            stats["convex"] = min(stats["convex"], gap)

        if others:
            twin = PackedWellObjective(obj.constants, obj.centers, others[0], r, obj.eps_gap)
            for x in plateau:
                if min(np.linalg.norm(x - c), np.linalg.norm(x - twin.secret_center)) > r:
                    stats["swap"] = max(stats["swap"], abs(obj.value(x) - twin.value(x)),
                                        float(np.abs(obj.grad(x) - twin.grad(x)).max()))

    if stats["bottom"] > 1e-12:
        failures.append("well bottom")
    if stats["plateau"] != 0.0 or stats["swap"] != 0.0:
        failures.append("plateau")
    if stats["value_jump"] >= 1e-9 or stats["grad_jump"] >= 1e-6:
        failures.append("continuity")
    if stats["smooth"] > 1 + 1e-6:
        failures.append("smoothness")
    if stats["convex"] < 1 - 1e-6:
        failures.append("strong convexity")
    detail = (f"|U(x*)+eps|={stats['bottom']:.1e} jump(U)={stats['value_jump']:.1e} "
              f"jump(grad)={stats['grad_jump']:.1e} max|dg|/(L|dx|)={stats['smooth']:.4f} "
              f"min convexity ratio={stats['convex']:.4f}")
    if failures:
        detail += "; failed: " + ", ".join(failures)
    return Check("hard-instance exactness", not failures, detail)


def _min_pairwise(points: np.ndarray) -> float:
    if len(points) < 2:
        return math.inf
    best = math.inf
    sq = np.einsum("nd,nd->n", points, points)
    for start in range(0, len(points), 512):
        block = points[start:start + 512]
        g = sq[start:start + 512, None] - 2.0 * block @ points.T + sq[None, :]
        for i in range(len(block)):
            g[i, start + i] = math.inf
        best = min(best, float(g.min()))
    return math.sqrt(max(best, 0.0))


def check_packing(n_cases: int = 50) -> Check:
    gen = np.random.default_rng(SUITE_SEED + 2)
    bad = []
    for case in range(n_cases):
        d = int(gen.integers(1, 7))
        R_outer = float(gen.uniform(0.5, 5.0))
        r = R_outer / float(gen.uniform(1.2, 6.0 if d > 3 else 12.0))
        pts = packing_centers(R_outer, r, d, 5000)
        norms = np.linalg.norm(pts, axis=1)
        if (norms > (R_outer - r) * (1 + 1e-12)).any() or _min_pairwise(pts) < 2 * r * (1 - 1e-12):
            bad.append((R_outer, r, d))
    hand = [((1.0, 0.1, 2), 20), ((1.0, 1.0, 3), 0), ((1.0, 2.0, 2), 0), ((1.0, 0.25, 3), 3)]
    hand += [((3.0, 1.0, d), 1) for d in range(1, 7)]
    wrong = [(args, want, bounds.packing_number(*args)) for args, want in hand
             if bounds.packing_number(*args) != want]
    ok = not bad and not wrong
    detail = f"{n_cases} random packings, {len(hand)} hand values"
    if bad:
        detail += f"; invalid packings: {bad[:3]}"
    if wrong:
        detail += f"; packing_number mismatches: {wrong}"
    return Check("packing validity", ok, detail)


def _bound_examples() -> list[tuple[str, float, float]]:
    """(label, computed, independently evaluated) pairs."""
    WF = WELL_FACTOR
    ln2 = math.log(2.0)
    d = 3
    return [
        ("rho m=1 L=1 R=0", bounds.log_sobolev_lower_bound(1, 1, 0), 0.5),
        ("rho m=2 L=1 R=0", bounds.log_sobolev_lower_bound(2, 1, 0), 1.0),
        ("rho m=1 L=1 R=1/4", bounds.log_sobolev_lower_bound(1, 1, 0.25), 0.5 / math.e),
        ("ula eps ratio", bounds.ula_mixing_bound(0.1, d, 1, 1, 0) / bounds.ula_mixing_bound(0.2, d, 1, 1, 0),
         4 * math.log(100 * d) / math.log(25 * d)),
        ("ula unit kappa", bounds.ula_mixing_bound(0.3, 5, 2, 2, 0), (5 / 0.09) * math.log(5 / 0.09)),
        ("ula example", bounds.ula_mixing_bound(0.5, 4, 1, 0.5, 0.5), math.exp(8) * 4 * 16 * math.log(16)),
        ("mala example", bounds.mala_mixing_bound(math.exp(-1), 1, 2, 1, 0), 2**1.5 * (ln2 + 1) ** 1.5),
        ("mala linear in c", bounds.mala_mixing_bound(0.2, 3, 4, 1, 0.1, prefactor=7.5),
         7.5 * bounds.mala_mixing_bound(0.2, 3, 4, 1, 0.1)),
        ("mala eps shape", bounds.mala_mixing_bound(1e-3, 2, 8, 1, 0) / bounds.mala_mixing_bound(1e-1, 2, 8, 1, 0),
         ((2 * math.log(8) + math.log(1e3)) / (2 * math.log(8) + math.log(10))) ** 1.5),
        ("packing 4.5^2", bounds.packing_number(1, 0.1, 2), 20),
        ("opt example", bounds.optimization_lower_bound(WF, 4, 1 / 16, 2, 1), 12),
        ("opt p=0", bounds.optimization_lower_bound(WF, 4, 1 / 16, 2, 0), 0),
        ("opt above threshold", bounds.optimization_lower_bound(1, 1, 1.0, 3), 1),
        ("beta example", bounds.beta_requirement(0.5, 2, 4 * WF, 1, 1), 2 * ln2),
        ("beta p=1", bounds.beta_requirement(0.1, 3, 50, 2, 1),
         3 / 0.2 * math.log(50 * 4 / (4 * WF * 0.1))),
        ("beta doubling d", bounds.beta_requirement(0.1, 6, 50, 2, 1), 2 * bounds.beta_requirement(0.1, 3, 50, 2, 1)),
        ("ula step unit", ula_theorem_stepsize(ObjectiveConstants(1, 1, 0, 1), 1.0), 1.0),
        ("ula step example", ula_theorem_stepsize(ObjectiveConstants(2, 1, 0.5, 4), 0.5),
         math.exp(-8) * 0.5 * 0.5 * 0.0625),
        ("ula step halves in d", ula_theorem_stepsize(ObjectiveConstants(2, 1, 0.5, 8), 0.5),
         0.5 * ula_theorem_stepsize(ObjectiveConstants(2, 1, 0.5, 4), 0.5)),
        ("mala step example", mala_theorem_stepsize(ObjectiveConstants(2, 1, 0, 1), math.exp(-1)),
         0.5 * 2**-0.5 * (ln2 + 1) ** -0.5),
    ]


def _monotone_violations(gen: np.random.Generator, n: int = 200) -> list[str]:
    out = []
    for _ in range(n):
        eps = float(gen.uniform(0.01, 0.9))
        d = int(gen.integers(1, 50))
        m = float(gen.uniform(0.1, 2.0))
        L = m * float(gen.uniform(1.0, 20.0))
        R = float(gen.uniform(0.0, 0.5))
        for f, name in ((bounds.ula_mixing_bound, "ula"), (bounds.mala_mixing_bound, "mala")):
            base = f(eps, d, L, m, R)
            if f(eps, d, L, m, R * 1.1 + 0.01) < base:
                out.append(f"{name} in R")
            if f(eps, d + 1, L, m, R) < base:
                out.append(f"{name} in d")
            # kappa up at fixed L
            if f(eps, d, L, m / 1.5, R) < base:
                out.append(f"{name} in kappa")
            if f(min(eps * 1.2, 0.99), d, L, m, R) > base:
                out.append(f"{name} in eps")
        Lo, Ro = float(gen.uniform(1, 100)), float(gen.uniform(0.5, 4))
        e_max = bounds.optimization_validity_threshold(Lo, Ro)
        e = e_max * float(gen.uniform(0.001, 1.0))
        t = bounds.optimization_lower_bound(Lo, Ro, e, d)
        if bounds.optimization_lower_bound(Lo, Ro, e, d + 1) < t:
            out.append("opt in d")
        if bounds.optimization_lower_bound(Lo, Ro, e * 0.7, d) < t:
            out.append("opt in 1/eps")
    return out


def check_bounds() -> Check:
    worst, where = 0.0, "all exact"
    for label, got, want in _bound_examples():
        err = abs(got - want) / max(abs(want), 1e-300) if want else abs(got)
        if err > worst:
            worst, where = err, label
    mono = _monotone_violations(np.random.default_rng(SUITE_SEED + 3))
    ok = worst < 1e-9 and not mono
    detail = f"worst relative error {worst:.1e} ({where}); monotonicity violations: {len(mono)}"
    if mono:
        detail += f" e.g. {sorted(set(mono))[:3]}"
    return Check("bound calculators", ok, detail)


def check_tv_metric(trials: int = 200) -> Check:
    gen = np.random.default_rng(SUITE_SEED + 4)
    spec = GridSpec.regular(-1, 1, 40)

    def rand() -> GridDensity:
        w = gen.random(40) ** 3
        return GridDensity(spec, w / w.sum(), 0.0, 0.0)

    worst = 0.0
    for _ in range(trials):
        p, q, s = rand(), rand(), rand()
        worst = max(worst, abs(tv_distance(p, q) - tv_distance(q, p)), tv_distance(p, p),
                    tv_distance(p, s) - tv_distance(p, q) - tv_distance(q, s))
    quad = quadratic_objective(1)
    qspec = GridSpec.regular(-6, 6, 120)
    ref = grid_density(quad, qspec)
    n = 10**6
    tv = tv_distance(histogram(gen.standard_normal(n), qspec), ref)
    limit = 3 * 2 * math.sqrt(120 / n)
    ok = worst <= 1e-12 and tv <= limit
    return Check("tv metric", ok, f"axiom slack {worst:.1e}; iid histogram TV {tv:.4f} <= {limit:.4f}")


def check_datasets(path: str | None = None) -> Check:
    problems = []
    with tempfile.TemporaryDirectory() as tmp:
        made = [gen_sparse_dataset(8, 64, RngStream(SUITE_SEED, 8)),
                gen_adversarial_dataset(16, 4, 64, RngStream(SUITE_SEED, 16))]
        for k, ds in enumerate(made):
            f = Path(tmp) / f"ds{k}.json"
            save_dataset(ds, f)
            back = load_dataset(f)
            if not np.array_equal(back.points, ds.points) or back.sigma != ds.sigma or back.anchors != ds.anchors:
                problems.append(f"{ds.kind} round-trip changed the data")
            problems += [f"{ds.kind}: {v}" for v in validate_dataset(back)]
    if path is not None:
        problems += [f"{path}: {v}" for v in validate_dataset(load_dataset(path))]
    detail = "sparse and adversarial round-trip and re-validate" + (f", plus {path}" if path else "")
    if problems:
        detail = "; ".join(problems[:5])
    return Check("datasets", not problems, detail)


def check_d1_sampler(steps: int = 2_000_000, seeds=(0, 1, 2), h: float = 1e-3,
                     tol: float = 0.05, noise: float = 0.01) -> Check:
    """Grid TV of ULA and MALA on the one-dimensional packed well.

    Both chains use the same step size and step count. Each seed yields one
    TV per sampler; the median over seeds is compared with ``tol`` and the
    MALA-minus-ULA gap is checked seed by seed.
    """
    spec = GridSpec.regular(-6.0, 6.0, 1200)
    with warnings.catch_warnings():
        # eps=0.02 sits above the optimization validity threshold at L=1, R=2, and
        # the fixed grid leaves ~7e-6 of the mass in its edge cells
        warnings.simplefilter("ignore")
        obj = hard_objective_new(1.0, 0.25, 2.0, 0.02, 1, RngStream(SUITE_SEED, 1), strict=False)
        ref = grid_density(obj, spec)
    burn = steps // 10
    tvs = {"ula": [], "mala": []}
    for seed in seeds:
        for kind in tvs:
            cfg = ChainConfig(StepSchedule("constant", h), steps, seed=seed, stream_id=0, keep_samples=True)
            _, stream = run_chain(obj, cfg, kind)
            tvs[kind].append(tv_distance(histogram(stream.positions[burn:], spec), ref))
    ula, mala = float(np.median(tvs["ula"])), float(np.median(tvs["mala"]))
    gap = max(m - u for m, u in zip(tvs["mala"], tvs["ula"]))
    ok = ula < tol and mala < tol and gap <= noise
    per = ", ".join(f"{u:.3f}/{m:.3f}" for u, m in zip(tvs["ula"], tvs["mala"]))
    return Check("d=1 sampler oracle", ok,
                 f"median TV ula {ula:.4f} mala {mala:.4f}; per seed ula/mala {per}; max gap {gap:+.4f}")


def check_quadratic_moments(steps: int = 10**6, h: float = 0.1, seed: int = 0) -> Check:
    obj = quadratic_objective(1)
    burn = steps // 10
    cfg = ChainConfig(StepSchedule("constant", h), steps, seed=seed, stream_id=0)
    _, ula = run_chain(obj, cfg, "ula")
    rec, mala = run_chain(obj, cfg, "mala")
    v_ula = float(np.var(ula.positions[burn:]))
    v_mala = float(np.var(mala.positions[burn:]))
    target = 1.0 / (1.0 - h / 2.0)
    e_ula, e_mala = v_ula / target - 1.0, v_mala - 1.0
    ok = abs(e_ula) <= 0.02 and abs(e_mala) <= 0.03 and rec.acceptance_rate > 0.5
    return Check("quadratic moments", ok,
                 f"ULA var {v_ula:.4f} vs {target:.4f} ({e_ula:+.2%}); MALA var {v_mala:.4f} "
                 f"({e_mala:+.2%}), acceptance {rec.acceptance_rate:.3f}")


def check_em_trapping(trials: int = 20, iters: int = 1000, radius: float = 0.01) -> Check:
    """Data-initialized EM stays at the separated points it starts next to."""
    held = 0
    worst = 0.0
    for t in range(trials):
        rng = RngStream(SUITE_SEED, 6).derive(t)
        ds = gen_adversarial_dataset(16, 4, 64, rng.derive(0))
        post = GmmPosterior(ds.points, ds.sigma, ds.M, ds.sigma**2 / 3200.0, 1.0)
        gen = rng.derive(1).generator
        pool = [i for i in range(ds.n_separated) if i not in ds.anchors]
        picks = gen.choice(pool, size=ds.M, replace=False)
        start = ds.points[picks] + np.stack([_unit(gen, ds.d) * radius * gen.uniform(0, 1) for _ in picks])
        _, state, _ = run_em(post, start.reshape(-1), max_iters=iters, record_trajectory=False)
        dist = np.linalg.norm(state.mu.reshape(ds.M, ds.d) - ds.points[picks], axis=1)
        worst = max(worst, float(dist.max()))
        held += bool((dist <= radius).all())
    return Check("em trapping", held == trials,
                 f"{held}/{trials} trials stayed within {radius} (worst distance {worst:.2e})")


def run_suite(quick: bool = True, data: str | None = None) -> list[Check]:
    checks = [check_gradients(), check_hard_instance(), check_packing(), check_bounds(),
              check_tv_metric(), check_datasets(data)]
    if not quick:
        checks += [check_d1_sampler(), check_quadratic_moments(), check_em_trapping()]
    return checks
