"""Command line entry point: ``langevin-bench <subcommand> ...``.

Exit codes: 0 success, 1 user error (bad arguments, unreadable inputs),
2 internal error, 3 finished with failures (sweep error rows, failed checks).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import traceback
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USER, EXIT_INTERNAL, EXIT_FAILURES = 0, 1, 2, 3


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USER)


def _int_list(text: str) -> list[int]:
    try:
        out = []
        for part in text.split(","):
            part = part.strip()
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
        return out
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a list like 2,3,4 or 2-9, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


# --------------------------------------------------------------------------
# subcommands


def cmd_bounds(args) -> int:
    from .bounds import bound_report

    for name in ("L", "m", "eps"):
        if not getattr(args, name) > 0:
            raise UserError(f"--{name} must be positive")
    if args.R < 0 or args.dim < 1:
        raise UserError("--R must be nonnegative and --dim positive")
    rep = bound_report(args.L, args.m, args.R, args.eps, args.dim, args.p, args.prefactor)
    print(rep.as_json() if args.json else rep.as_text())
    return EXIT_OK


def cmd_gen_data(args) -> int:
    from .data import gen_adversarial_dataset, gen_sparse_dataset, save_dataset, validate_dataset
    from .numerics import RngStream

    rng = RngStream(args.seed)
    try:
        if args.kind == "sparse":
            ds = gen_sparse_dataset(args.dim, args.n, rng, M=args.M, sigma=args.sigma)
        else:
            if args.M is None:
                raise UserError("adversarial data needs --M")
            ds = gen_adversarial_dataset(args.dim, args.M, args.n, rng)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    problems = validate_dataset(ds)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return EXIT_INTERNAL
    save_dataset(ds, args.out)
    print(f"wrote {args.kind} dataset d={ds.d} N={ds.N} M={ds.M} sigma={ds.sigma!r} to {args.out}")
    return EXIT_OK


def _build_objective(args):
    from .data import gen_sparse_dataset, load_dataset
    from .numerics import RngStream
    from .objectives import GmmPosterior, hard_objective_new, load_objective, quadratic_objective, temper

    if args.objective_file:
        obj = load_objective(args.objective_file)
    elif args.objective == "quadratic":
        obj = quadratic_objective(args.dim)
    elif args.objective == "packed_well":
        obj = hard_objective_new(args.L, args.m, args.R, args.eps, args.dim, RngStream(args.seed, 9),
                                 strict=False)
    else:
        if args.data:
            ds = load_dataset(args.data)
        else:
            if args.dim < 2:
                raise UserError("gmm needs --dim >= 2")
            ds = gen_sparse_dataset(args.dim, min(2**args.dim, 4096), RngStream(args.seed, 8),
                                    sigma=0.7 / math.sqrt(args.dim))
        M = args.M or ds.M
        obj = GmmPosterior(ds.points, ds.sigma, M, args.weight_factor * ds.sigma**2, args.C,
                           1.0 / 64.0, 2.0 * max(1, int(math.log2(ds.d))))
    if args.beta != 1.0:
        obj = temper(obj, args.beta)
    return obj


def cmd_run(args) -> int:
    from .harness import write_csv
    from .numerics import RngStream
    from .objectives import GmmPosterior
    from .optimizers import em_init_from_data, run_em
    from .samplers import ChainConfig, StepSchedule, run_chain, write_samples_csv

    if args.steps < 0:
        raise UserError("--steps must be nonnegative")
    obj = _build_objective(args)
    if args.algo == "em":
        if not isinstance(obj, GmmPosterior):
            raise UserError("EM runs need --objective gmm")
        mu0 = em_init_from_data(obj, RngStream(args.seed))
        rec, state, traj = run_em(obj, mu0, max_iters=args.steps)
        rec.seed = args.seed
        if args.samples:
            with open(args.samples, "w") as fh:
                fh.write("iteration,value\n")
                for k, v in zip(traj.iterations, traj.values):
                    fh.write(f"{k},{v!r}\n")
    else:
        if args.h is not None:
            sched = StepSchedule("constant", args.h)
        elif args.objective == "gmm":
            sched = StepSchedule("constant", 0.5 / obj.constants.L)
        else:
            sched = StepSchedule("constant", 0.1 / obj.constants.L)
        cfg = ChainConfig(sched, args.steps, seed=args.seed, thin=args.thin,
                          keep_samples=bool(args.samples))
        rec, stream = run_chain(obj, cfg, args.algo)
        if args.samples:
            write_samples_csv(args.samples, stream)
    text = write_csv([rec], timing=args.timing)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sweep_config(args):
    from .harness import SweepConfig

    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UserError(f"cannot read config {args.config}: {exc}") from exc
    for key in ("dims", "algos", "trials", "budget", "master_seed", "out_dir", "workers"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.timing:
        base["timing"] = True
    try:
        return SweepConfig.from_json(base)
    except (TypeError, ValueError) as exc:
        raise UserError(str(exc)) from exc


def cmd_sweep(args) -> int:
    from .harness import sweep

    cfg = _sweep_config(args)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    try:
        res = sweep(cfg, resume=not args.fresh, progress=log)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    n = len(res.records)
    print(f"{n} cells, {res.n_errors} errors; results in {res.out_dir}")
    print(res.summary["query_accounting"])
    for c in res.summary["cells"]:
        med = c["median_queries"]
        print(f"{c['algo']:8s} d={c['dim']:<3d} median={'-' if med is None else f'{med:.6g}'} "
              f"exhausted={c['exhausted']}/{c['trials']} errors={c['errors']}")
    for algo, chk in res.summary.get("checks", {}).items():
        print(f"check {algo}: {'PASS' if chk['pass'] else 'FAIL'} {json.dumps(chk, sort_keys=True)}")
    if n and res.n_errors == n:
        return EXIT_INTERNAL
    return EXIT_FAILURES if res.n_errors else EXIT_OK


def cmd_plot(args) -> int:
    from .harness import emit_plot, read_csv, summarize

    try:
        records = read_csv(args.results, budget=args.budget)
    except (OSError, ValueError) as exc:
        raise UserError(str(exc)) from exc
    if not records:
        raise UserError("results file has no rows")
    summary = summarize(records)
    emit_plot(summary["cells"], args.out, args.budget)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation_suite import run_suite

    results = run_suite(quick=not args.full, data=args.data)
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name.ljust(width)}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAILURES


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="langevin-bench", description="Langevin sampling versus optimization benchmarks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", help="closed-form bound calculators")
    b.add_argument("--L", type=float, required=True, help="smoothness constant")
    b.add_argument("--m", type=float, required=True, help="strong convexity outside the ball")
    b.add_argument("--R", type=float, required=True, help="radius of the nonconvex region")
    b.add_argument("--eps", type=float, required=True, help="accuracy")
    b.add_argument("--dim", type=int, required=True)
    b.add_argument("--p", type=float, default=1.0, help="success probability")
    b.add_argument("--prefactor", type=float, default=1.0, help="multiplier for big-O constants")
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bounds)

    g = sub.add_parser("gen-data", help="generate and validate a dataset")
    g.add_argument("--kind", choices=("sparse", "adversarial"), default="sparse")
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--n", type=int, required=True, help="number of points")
    g.add_argument("--M", type=int, default=None, help="mixture count")
    g.add_argument("--sigma", type=float, default=None, help="sparse only; default 1/sqrt(d)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="single run, one CSV row")
    r.add_argument("--algo", choices=("ula", "mala", "em"), required=True)
    r.add_argument("--objective", choices=("quadratic", "packed_well", "gmm"), default="quadratic")
    r.add_argument("--objective-file", default=None, help="JSON objective instead of --objective")
    r.add_argument("--dim", type=int, default=1)
    r.add_argument("--steps", type=int, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--h", type=float, default=None, help="step size")
    r.add_argument("--beta", type=float, default=1.0, help="inverse temperature")
    r.add_argument("--L", type=float, default=1.0)
    r.add_argument("--m", type=float, default=0.25)
    r.add_argument("--R", type=float, default=2.0)
    r.add_argument("--eps", type=float, default=0.02)
    r.add_argument("--data", default=None, help="dataset JSON for gmm")
    r.add_argument("--M", type=int, default=None)
    r.add_argument("--C", type=float, default=1.0, help="constant mixture component")
    r.add_argument("--weight-factor", type=float, default=1e-3, help="c = factor * sigma^2")
    r.add_argument("--thin", type=int, default=1)
    r.add_argument("--samples", default=None, help="also write the trajectory CSV here")
    r.add_argument("--out", default=None, help="CSV path (default stdout)")
    r.add_argument("--timing", action="store_true", help="fill wall_ms (breaks byte determinism)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="EM versus sampler scaling sweep")
    s.add_argument("--config", default=None, help="JSON file with SweepConfig fields")
    s.add_argument("--dims", type=_int_list, default=None, help="e.g. 2,3,4 or 2-9")
    s.add_argument("--algos", type=_str_list, default=None, help="subset of em,em_ball,ula,mala")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--budget", type=int, default=None, help="gradient queries per run")
    s.add_argument("--seed", dest="master_seed", type=int, default=None)
    s.add_argument("--out", dest="out_dir", default=None)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--fresh", action="store_true", help="ignore previous results in the output dir")
    s.add_argument("--timing", action="store_true", help="fill wall_ms (breaks byte determinism)")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="run the oracle suite")
    v.add_argument("--full", action="store_true", help="long sampler oracles too")
    v.add_argument("--data", default=None, help="also validate this dataset JSON")
    v.set_defaults(func=cmd_validate)

    pl = sub.add_parser("plot", help="SVG of median queries against dimension")
    pl.add_argument("--results", required=True, help="results CSV")
    pl.add_argument("--budget", type=int, default=None)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USER
    np.seterr(over="ignore", under="ignore")
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
