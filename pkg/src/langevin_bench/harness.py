"""Dimension sweeps comparing EM and Langevin samplers on mixture-mean posteriors.

Gradient-query accounting used in every table: one EM iteration (E+M sweep)
is one query, one ULA step is one query, one MALA step is two.

Each dimension ``d`` gets one sparse dataset derived from the master seed;
trials vary the algorithm's own randomness (EM initialization, chain noise),
so reference values are estimated once per dimension and cached next to the
results.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np

from .data import Dataset, gen_sparse_dataset
from .diagnostics import (
    ConvergenceCriterion,
    NonConvergentReferenceError,
    ReferenceProtocol,
    RunningAverageMonitor,
    check_convergence,
    estimate_optimum,
    estimate_posterior_moments,
)
from .numerics import RNG_ALGORITHM, RngStream
from .objectives import GmmPosterior
from .optimizers import em_init_from_data, run_em
from .records import CSV_COLUMNS, RunRecord
from .samplers import ChainConfig, ChainError, StepSchedule, mala_theorem_stepsize, run_chain, \
    ula_theorem_stepsize

__all__ = [
    "ALGOS",
    "QUERY_ACCOUNTING",
    "WORKERS_ENV",
    "Cell",
    "SweepConfig",
    "SweepResult",
    "build_instance",
    "cell_seed",
    "sampler_step_size",
    "instance_references",
    "run_experiment",
    "sweep",
    "summarize",
    "headline_checks",
    "write_csv",
    "read_csv",
    "emit_plot",
]

ALGOS = ("em", "em_ball", "ula", "mala")
QUERY_ACCOUNTING = "1 EM iteration = 1 query; 1 ULA step = 1 query; 1 MALA step = 2 queries"
WORKERS_ENV = "LANGEVIN_BENCH_WORKERS"

_STREAM_DATA, _STREAM_REF, _STREAM_CELL = 1, 2, 3
_COST = {"em": 1, "em_ball": 1, "ula": 1, "mala": 2}


def _default_protocol() -> dict:
    return {
        "opt_starts": 20, "opt_screen_points": 512, "opt_screen_iters": 200, "opt_polish": 8,
        "opt_iters": 2000, "opt_agreement_tol": 1e-8, "opt_growth": 10, "opt_retries": 2,
        "sampler_replicas": 4, "sampler_steps": 10000, "sampler_growth": 2, "sampler_retries": 6,
    }


@dataclass
class SweepConfig:
    """Everything that determines a sweep's output. Field names double as JSON keys.

    ``dims`` overrides ``em_dims``/``sampler_dims`` for every algorithm.
    ``sigma = sigma_scale / sqrt(d)``, ``c = weight_factor * sigma^2``,
    ``M = floor(log2 d)``, ``N = min(2^d, n_max)``, prior radius
    ``prior_R_scale * M``. Sampler tolerances are multiples of the posterior
    scale when ``sampler_relative`` is set, absolute otherwise; reference
    replicas must agree within ``reference_agreement`` times those tolerances.
    """

    algos: list[str] = field(default_factory=lambda: ["em", "ula"])
    dims: list[int] | None = None
    em_dims: list[int] = field(default_factory=lambda: list(range(2, 10)))
    sampler_dims: list[int] = field(default_factory=lambda: list(range(2, 17)))
    trials: int = 20
    budget: int = 1_000_000
    master_seed: int = 0
    sigma_scale: float = 0.7
    weight_factor: float = 1e-3
    constant_component: float = 1.0
    n_max: int = 4096
    prior_m: float = 1.0 / 64.0
    prior_R_scale: float = 2.0
    step_rule: str = "inverse_L"
    step_prefactor: float = 0.5
    step_eps: float = 0.1
    max_backoff: int = 20
    em_value_tol: float = 1e-6
    stall_tol: float = 1e-12
    sampler_value_tol: float = 0.1
    sampler_mean_tol: float = 0.1
    sampler_relative: bool = True
    burn_in: float = 0.1
    reference_agreement: float = 1.0
    reference: dict = field(default_factory=_default_protocol)
    workers: int = 1
    out_dir: str = "sweep_out"
    timing: bool = False

    def __post_init__(self):
        bad = [a for a in self.algos if a not in ALGOS]
        if bad or not self.algos:
            raise ValueError(f"unknown algorithms {bad}; choose from {', '.join(ALGOS)}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        for ds in (self.dims or []), self.em_dims, self.sampler_dims:
            if any(int(d) < 2 for d in ds):
                raise ValueError("dimensions must be at least 2")
        if self.step_rule not in ("inverse_L", "theorem", "fixed"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if not (self.em_value_tol > 0 and self.sampler_value_tol > 0 and self.sampler_mean_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        unknown = set(self.reference) - {f.name for f in fields(ReferenceProtocol)}
        if unknown:
            raise ValueError(f"unknown reference settings {sorted(unknown)}")
        self.reference = {**_default_protocol(), **self.reference}

    def dims_for(self, algo: str) -> list[int]:
        if self.dims is not None:
            return [int(d) for d in self.dims]
        return [int(d) for d in (self.em_dims if algo.startswith("em") else self.sampler_dims)]

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "SweepConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def fingerprint(self) -> str:
        """Identity of the results: every field except execution and output settings."""
        d = self.to_json()
        for k in ("workers", "out_dir", "timing"):
            d.pop(k)
        return json.dumps(d, sort_keys=True)

    def protocol(self) -> ReferenceProtocol:
        return ReferenceProtocol(
            **self.reference,
            sampler_value_tol=self.reference_agreement * self.sampler_value_tol,
            sampler_mean_tol=self.reference_agreement * self.sampler_mean_tol,
            sampler_relative=self.sampler_relative,
            burn_in=self.burn_in,
        )


@dataclass(frozen=True, order=True)
class Cell:
    algo: str
    d: int
    trial: int

    @property
    def key(self) -> str:
        return f"{self.algo}:{self.d}:{self.trial}"


def _cells(cfg: SweepConfig) -> list[Cell]:
    return [Cell(a, d, t) for a in cfg.algos for d in cfg.dims_for(a) for t in range(cfg.trials)]


def cell_seed(cfg: SweepConfig, cell: Cell) -> int:
    ss = np.random.SeedSequence(cfg.master_seed,
                                spawn_key=(_STREAM_CELL, ALGOS.index(cell.algo), cell.d, cell.trial))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


# --------------------------------------------------------------------------
# instances and references


def build_instance(cfg: SweepConfig, d: int) -> tuple[Dataset, GmmPosterior]:
    return _build_instance(cfg.fingerprint(), d)


@lru_cache(maxsize=32)
def _build_instance(fingerprint: str, d: int) -> tuple[Dataset, GmmPosterior]:
    c = json.loads(fingerprint)
    M = int(math.floor(math.log2(d)))
    sigma = c["sigma_scale"] / math.sqrt(d)
    requested = 2**d
    ds = gen_sparse_dataset(d, min(requested, c["n_max"]), RngStream(c["master_seed"], _STREAM_DATA, path=(d,)),
                            M=M, sigma=sigma)
    ds.requested_N = requested
    post = GmmPosterior(ds.points, sigma, M, c["weight_factor"] * sigma * sigma, c["constant_component"],
                        c["prior_m"], c["prior_R_scale"] * M)
    return ds, post


def sampler_step_size(cfg: SweepConfig, post: GmmPosterior, algo: str = "ula") -> float:
    """Initial step before any divergence back-off."""
    if cfg.step_rule == "fixed":
        return cfg.step_prefactor
    if cfg.step_rule == "inverse_L":
        return cfg.step_prefactor / post.constants.L
    if algo == "mala":
        return mala_theorem_stepsize(post.constants, min(cfg.step_eps, 0.5), cfg.step_prefactor)
    return ula_theorem_stepsize(post.constants, cfg.step_eps, cfg.step_prefactor)


def _ref_key(kind: str, d: int, h: float | None = None) -> str:
    return f"{kind}:{d}" if h is None else f"{kind}:{d}:{h!r}"


def instance_references(cfg: SweepConfig, d: int, kind: str, h: float | None = None) -> dict:
    """JSON-ready reference entry: ``{"ok": ..., ...}``.

    ``kind="opt"`` estimates the EM optimum; ``kind="moments"`` the ULA
    expectations at step ``h``. Divergent reference chains halve ``h``; the
    entry reports the step actually used.
    """
    _, post = build_instance(cfg, d)
    proto = cfg.protocol()
    rng = RngStream(cfg.master_seed, _STREAM_REF, path=(d, 0 if kind == "opt" else 1))
    try:
        if kind == "opt":
            mu, v, info = estimate_optimum(post, rng, proto)
            return {"ok": True, "mu_star": mu.tolist(), "value_star": v, "info": info}
        for attempt in range(cfg.max_backoff + 1):
            try:
                mu_u, mean_x, sd_u, spread, info = estimate_posterior_moments(post, rng, proto, h)
                break
            except ChainError:
                if attempt == cfg.max_backoff:
                    raise
                h = h / 2.0
        return {"ok": True, "mean_value": mu_u, "mean_mu": mean_x.tolist(), "value_sd": sd_u,
                "mu_spread": spread, "step_size": h, "info": info}
    except NonConvergentReferenceError as exc:
        return {"ok": False, "error": f"non_convergent_reference: {exc}"}
    except ChainError as exc:
        return {"ok": False, "error": f"reference_diverged: {exc}"}


# --------------------------------------------------------------------------
# single cells


def _base_record(cell: Cell, cfg: SweepConfig, post: GmmPosterior, seed: int) -> RunRecord:
    return RunRecord(algo=cell.algo, objective="gmm_sparse", dim=cell.d, mixtures=post.n_components,
                     n_data=post.n_data, trial=cell.trial, seed=seed, budget=cfg.budget)


def _ball_init(post: GmmPosterior, rng: RngStream) -> np.ndarray:
    M, d = post.n_components, post.data_dim
    z = rng.normal((M, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = post.prior_R * rng.uniform(M) ** (1.0 / d)
    return (z * r[:, None]).reshape(-1)


def _run_em_cell(cell, cfg, post, ref, seed) -> RunRecord:
    rng = RngStream(seed)
    mu0 = em_init_from_data(post, rng) if cell.algo == "em" else _ball_init(post, rng)
    crit = ConvergenceCriterion("em_value", cfg.em_value_tol, ref_value=ref["value_star"])
    rec, _, _ = run_em(post, mu0, stop=lambda s: check_convergence(crit, s.value),
                       max_iters=cfg.budget, stall_tol=cfg.stall_tol, record_trajectory=False)
    return rec


def _run_chain_cell(cell, cfg, post, ref, seed, refs_for_step) -> RunRecord:
    h = ref["step_size"]
    backoffs = 0
    while True:
        scale_u = ref["value_sd"] if cfg.sampler_relative else 1.0
        scale_x = ref["mu_spread"] if cfg.sampler_relative else 1.0
        crit = ConvergenceCriterion("sampler_value_and_mean", cfg.sampler_value_tol * scale_u,
                                    cfg.sampler_mean_tol * scale_x, ref["mean_value"],
                                    np.asarray(ref["mean_mu"]))
        mon = RunningAverageMonitor(crit, burn_in=cfg.burn_in)
        conf = ChainConfig(StepSchedule("constant", h), cfg.budget // _COST[cell.algo], seed=seed,
                           keep_samples=False)
        try:
            rec, _ = run_chain(post, conf, cell.algo, stop=mon)
            break
        except ChainError:
            if backoffs >= cfg.max_backoff:
                raise
            backoffs += 1
            h /= 2.0
            ref = refs_for_step(h)
            if not ref["ok"]:
                raise NonConvergentReferenceError(ref["error"])
            h = ref["step_size"]
    rec.budget = cfg.budget
    if backoffs:
        rec.notes["backoffs"] = backoffs
    return rec


def run_experiment(cell: Cell, cfg: SweepConfig, references: dict | None = None) -> RunRecord:
    """One (algo, d, trial) run; failures come back as records with ``error`` set."""
    t0 = time.perf_counter()
    refs = {} if references is None else references
    seed = cell_seed(cfg, cell)
    try:
        _, post = build_instance(cfg, cell.d)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error row
        return RunRecord(algo=cell.algo, objective="gmm_sparse", dim=cell.d, trial=cell.trial, seed=seed,
                         budget=cfg.budget, error=f"{type(exc).__name__}: {exc}")
    base = _base_record(cell, cfg, post, seed)
    if cfg.budget // _COST[cell.algo] == 0:
        base.queries, base.converged = cfg.budget, False
        return base

    def lookup(kind, h=None):
        key = _ref_key(kind, cell.d, h)
        if key not in refs:
            refs[key] = instance_references(cfg, cell.d, kind, h)
        return refs[key]

    try:
        if cell.algo.startswith("em"):
            ref = lookup("opt")
            if not ref["ok"]:
                raise NonConvergentReferenceError(ref["error"])
            rec = _run_em_cell(cell, cfg, post, ref, seed)
        else:
            ref = lookup("moments", sampler_step_size(cfg, post, cell.algo))
            if not ref["ok"]:
                raise NonConvergentReferenceError(ref["error"])
            rec = _run_chain_cell(cell, cfg, post, ref, seed, lambda h: lookup("moments", h))
    except NonConvergentReferenceError as exc:
        msg = str(exc)
        base.error = msg if msg.startswith(("non_convergent", "reference_")) else f"non_convergent_reference: {msg}"
        return base
    except Exception as exc:  # noqa: BLE001
        base.error = f"{type(exc).__name__}: {exc}"
        return base
    rec.objective, rec.dim, rec.mixtures, rec.n_data = base.objective, cell.d, base.mixtures, base.n_data
    rec.trial, rec.seed, rec.budget = cell.trial, seed, cfg.budget
    if not rec.converged:
        # censored at the budget, also when EM stalled at a non-optimal fixed point
        rec.queries = cfg.budget
    rec.wall_ms = (time.perf_counter() - t0) * 1e3
    return rec


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    records: list[RunRecord]
    summary: dict
    out_dir: Path | None = None

    @property
    def n_errors(self) -> int:
        return sum(r.error is not None for r in self.records)


def _record_key(r: RunRecord) -> str:
    return f"{r.algo}:{r.dim}:{r.trial}:{r.seed}"


def _sort_key(cfg: SweepConfig, r: RunRecord):
    return (cfg.algos.index(r.algo) if r.algo in cfg.algos else len(cfg.algos), r.dim, r.trial)


def _worker_count(cfg: SweepConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be at least 1")
        return n
    return cfg.workers


def _ref_job(args):
    cfg, d, kind, h = args
    return _ref_key(kind, d, h), instance_references(cfg, d, kind, h)


def _cell_job(args):
    cell, cfg, refs = args
    return run_experiment(cell, cfg, dict(refs))


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def sweep(cfg: SweepConfig, *, resume: bool = True, write: bool = True, progress=None) -> SweepResult:
    """Run every cell of ``cfg``; per-cell failures become error rows.

    With ``write`` the output directory receives ``config.json``,
    ``references.json``, ``records.jsonl`` (append-only, used to resume),
    ``results.csv``, ``summary.json`` and ``plot.svg``. A restarted sweep with
    the same config skips cells already present in ``records.jsonl``.
    """
    out = Path(cfg.out_dir) if write else None
    done: dict[str, RunRecord] = {}
    refs: dict[str, dict] = {}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        cpath = out / "config.json"
        if cpath.exists() and resume:
            old = SweepConfig.from_json(json.loads(cpath.read_text()))
            if old.fingerprint() != cfg.fingerprint():
                raise ValueError(f"{out} holds results of a different configuration; "
                                 "use a fresh output directory")
        cpath.write_text(_dump(cfg.to_json()))
        rpath = out / "references.json"
        if resume and rpath.exists():
            refs = json.loads(rpath.read_text())
        jpath = out / "records.jsonl"
        if resume and jpath.exists():
            for line in jpath.read_text().splitlines():
                if line.strip():
                    try:
                        r = RunRecord.from_json(json.loads(line))
                    except (ValueError, TypeError):
                        continue  # torn final line from an interrupted run
                    done[_record_key(r)] = r
        elif jpath.exists():
            jpath.unlink()
    cells = _cells(cfg)
    pending = [c for c in cells if f"{c.algo}:{c.d}:{c.trial}:{cell_seed(cfg, c)}" not in done]
    workers = _worker_count(cfg)

    # references first, one job per dimension and kind
    jobs = []
    for a, d in sorted({(c.algo, c.d) for c in pending}):
        if cfg.budget // _COST[a] == 0:
            continue
        if a.startswith("em"):
            job = (cfg, d, "opt", None)
        else:
            job = (cfg, d, "moments", sampler_step_size(cfg, build_instance(cfg, d)[1], a))
        if _ref_key(job[2], d, job[3]) not in refs and job not in jobs:
            jobs.append(job)

    def save_refs():
        if out is not None:
            (out / "references.json").write_text(_dump(refs))

    pool = ProcessPoolExecutor(workers) if workers > 1 and (jobs or len(pending) > 1) else None
    try:
        results = pool.map(_ref_job, jobs) if pool else map(_ref_job, jobs)
        for key, entry in results:
            refs[key] = entry
            save_refs()
            if progress:
                progress(f"reference {key}: {'ok' if entry['ok'] else entry['error']}")
        sink = (out / "records.jsonl").open("a") if out is not None else None
        try:
            args = [(c, cfg, refs) for c in pending]
            results = pool.map(_cell_job, args) if pool else map(_cell_job, args)
            for rec in results:
                done[_record_key(rec)] = rec
                if sink is not None:
                    row = rec.to_json()
                    if not cfg.timing:
                        row["wall_ms"] = 0.0  # keep the log byte-reproducible
                    sink.write(json.dumps(row, sort_keys=True) + "\n")
                    sink.flush()
                if progress:
                    status = "error" if rec.error else ("ok" if rec.converged else "budget")
                    progress(f"{rec.algo} d={rec.dim} trial={rec.trial}: {status} {rec.queries}")
        finally:
            if sink is not None:
                sink.close()
    finally:
        if pool is not None:
            pool.shutdown()
    wanted = {f"{c.algo}:{c.d}:{c.trial}:{cell_seed(cfg, c)}" for c in cells}
    records = sorted((r for k, r in done.items() if k in wanted), key=lambda r: _sort_key(cfg, r))
    summary = summarize(records, cfg)
    if out is not None:
        save_refs()
        write_csv(records, out / "results.csv", timing=cfg.timing)
        (out / "summary.json").write_text(_dump(summary))
        if any(c["median_queries"] for c in summary["cells"]):
            emit_plot(summary["cells"], out / "plot.svg", cfg.budget)
        elif (out / "plot.svg").exists():
            (out / "plot.svg").unlink()  # nothing to draw; never leave a stale figure
    return SweepResult(records, summary, out)


# --------------------------------------------------------------------------
# aggregation


def _slope(xs, ys) -> float | None:
    if len(xs) < 2:
        return None
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def summarize(records: Iterable[RunRecord], cfg: SweepConfig | None = None) -> dict:
    """Per-(algo, d) medians and means of queries, unconverged runs counted at the budget.

    The result depends only on the set of records, not their order.
    """
    groups: dict[tuple[str, int], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.algo, r.dim), []).append(r)
    order = (lambda a: (cfg.algos.index(a) if a in cfg.algos else 99, a)) if cfg else (lambda a: (0, a))
    cells = []
    for (algo, d) in sorted(groups, key=lambda k: (order(k[0]), k[1])):
        rs = sorted(groups[(algo, d)], key=lambda r: r.trial)
        ok = [r for r in rs if r.error is None]
        q = np.array([r.queries for r in ok], dtype=float)
        n_conv = sum(r.converged for r in ok)
        budget = max((r.budget for r in rs), default=0)
        cells.append({
            "algo": algo, "dim": d, "trials": len(rs), "converged": n_conv,
            "exhausted": len(ok) - n_conv, "errors": len(rs) - len(ok),
            "exhausted_fraction": (len(ok) - n_conv) / len(ok) if ok else None,
            "median_queries": float(np.median(q)) if len(q) else None,
            "mean_queries": float(q.mean()) if len(q) else None,
            "budget": budget,
            "median_censored": bool(len(q) and np.median(q) >= budget and (len(ok) - n_conv) * 2 >= len(ok)),
        })
    slopes = {}
    for algo in sorted({c["algo"] for c in cells}):
        rows = [c for c in cells if c["algo"] == algo and c["median_queries"] and not c["median_censored"]]
        slopes[algo] = _slope([c["dim"] for c in rows], [c["median_queries"] for c in rows])
    out = {"query_accounting": QUERY_ACCOUNTING, "rng": RNG_ALGORITHM, "cells": cells,
           "loglog_slope_uncensored": slopes}
    if cfg is not None:
        out["config"] = json.loads(cfg.fingerprint())
        out["checks"] = headline_checks(cells)
    return out


def headline_checks(cells: list[dict], slope_max: float = 1.5, threshold_dim: int = 12) -> dict:
    """Shape checks for the sampler-vs-EM scaling experiment.

    Samplers: every trial converges and the log-log slope of median queries
    against ``d`` is at most ``slope_max``. EM from data: medians strictly
    increase in ``d`` while uncensored, never decrease once censored at the
    budget, and the exhausted fraction reaches one half at some
    ``d <= threshold_dim``.
    """
    res: dict = {}
    for algo in ("ula", "mala"):
        rows = [c for c in cells if c["algo"] == algo]
        if not rows:
            continue
        all_conv = all(c["errors"] == 0 and c["exhausted"] == 0 for c in rows)
        slope = _slope([c["dim"] for c in rows], [c["median_queries"] for c in rows]) \
            if all(c["median_queries"] for c in rows) else None
        res[algo] = {"all_converged": all_conv, "slope": slope,
                     "pass": bool(all_conv and slope is not None and slope <= slope_max)}
    rows = [c for c in cells if c["algo"] == "em"]
    if rows:
        med = [c["median_queries"] for c in rows]
        cens = [c["median_censored"] for c in rows]
        ok_err = all(c["errors"] == 0 for c in rows)
        increasing = ok_err and all(m is not None for m in med)
        if increasing:
            for i in range(1, len(rows)):
                if cens[i - 1] and not cens[i]:
                    increasing = False
                elif not cens[i] and not med[i] > med[i - 1]:
                    increasing = False
                elif cens[i] and med[i] < med[i - 1]:
                    increasing = False
        onset = next((c["dim"] for c in rows
                      if c["exhausted_fraction"] is not None and c["exhausted_fraction"] >= 0.5), None)
        res["em"] = {"medians_increasing": increasing, "exhaustion_onset_dim": onset,
                     "pass": bool(increasing and onset is not None and onset <= threshold_dim)}
    return res


# --------------------------------------------------------------------------
# persistence


def write_csv(records: Iterable[RunRecord], path=None, timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row(timing=timing))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path, budget: int | None = None) -> list[RunRecord]:
    """Records from a results CSV; ``budget`` fills the column the CSV does not carry."""
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path} does not have the results header")
        for row in rd:
            def f(k):
                return float(row[k]) if row[k] != "" else float("nan")

            err = "error" if row["converged"] == "error" else None
            q = int(row["queries"]) if row["queries"] else 0
            out.append(RunRecord(
                algo=row["algo"], objective=row["objective"], dim=int(row["dim"]),
                mixtures=int(row["mixtures"]), n_data=int(row["n_data"]), trial=int(row["trial"]),
                seed=int(row["seed"]), step_size=f("step_size"), queries=q,
                converged=row["converged"] == "true", wall_ms=0.0 if row["wall_ms"] == "" else f("wall_ms"),
                final_value=f("final_value"), acceptance_rate=f("acceptance_rate"),
                budget=budget if budget is not None else q, error=err,
            ))
    if budget is None:
        top = max((r.queries for r in out), default=0)
        for r in out:
            r.budget = top
    return out


def emit_plot(cells: list[dict], path, budget: int | None = None) -> None:
    """Median queries against ``d``, one line per algorithm, log query axis.

    Cells whose median is censored at the budget get an ``x`` marker whose SVG
    id is ``exhausted-<algo>-<d>``. Output bytes depend only on the input.
    """
    import matplotlib

    from matplotlib.backends.backend_svg import FigureCanvasSVG
    from matplotlib.figure import Figure

    rows = [c for c in cells if c.get("median_queries")]
    if not rows:
        raise ValueError("nothing to plot")
    budget = budget or max(c.get("budget", 0) for c in rows) or None
    with matplotlib.rc_context({"svg.hashsalt": "langevin-bench", "svg.fonttype": "path",
                                "path.simplify": False}):
        fig = Figure(figsize=(6.4, 4.2))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot()
        algos = list(dict.fromkeys(c["algo"] for c in rows))
        for k, algo in enumerate(algos):
            sub = [c for c in rows if c["algo"] == algo]
            color = f"C{k}"
            ax.plot([c["dim"] for c in sub], [c["median_queries"] for c in sub], "-o", color=color,
                    label=algo, ms=4, gid=f"line-{algo}")
            for c in sub:
                if c.get("median_censored"):
                    ax.plot([c["dim"]], [c["median_queries"]], "x", color=color, ms=11, mew=2,
                            gid=f"exhausted-{algo}-{c['dim']}")
        if budget:
            ax.axhline(budget, color="0.5", ls=":", lw=1, gid="budget")
        ax.set_yscale("log")
        lo = min(c["median_queries"] for c in rows)
        hi = max([c["median_queries"] for c in rows] + ([budget] if budget else []))
        ax.set_ylim(max(lo / 2.0, 0.5), hi * 2.0)
        dims = [c["dim"] for c in rows]
        ax.set_xlim(min(dims) - 0.5, max(dims) + 0.5)
        ax.set_xlabel("dimension d")
        ax.set_ylabel("median gradient queries")
        ax.set_title(QUERY_ACCOUNTING, fontsize=7)
        ax.legend(loc="upper left")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
