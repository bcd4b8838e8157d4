import json
import random
import re

import numpy as np
import pytest

from langevin_bench.harness import (
    Cell,
    SweepConfig,
    build_instance,
    emit_plot,
    headline_checks,
    read_csv,
    run_experiment,
    summarize,
    sweep,
    write_csv,
)
from langevin_bench.records import CSV_COLUMNS, RunRecord

HEADER = "algo,objective,dim,mixtures,n_data,trial,seed,step_size,queries,converged,wall_ms,final_value,acceptance_rate"


def small_cfg(tmp_path=None, **kw):
    base = dict(dims=[2, 3], algos=["em", "ula"], trials=2, budget=20000)
    base.update(kw)
    if tmp_path is not None:
        base["out_dir"] = str(tmp_path)
    return SweepConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(algos=["gd"])
    with pytest.raises(ValueError):
        SweepConfig(trials=0)
    with pytest.raises(ValueError):
        SweepConfig(dims=[1, 2])
    with pytest.raises(ValueError):
        SweepConfig(reference={"nonsense": 1})
    with pytest.raises(ValueError):
        SweepConfig.from_json({"trials": 3, "colour": "red"})
    cfg = SweepConfig(trials=3)
    assert SweepConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_fingerprint_ignores_execution_settings():
    a = SweepConfig(workers=1, out_dir="x")
    b = SweepConfig(workers=4, out_dir="y", timing=True)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != SweepConfig(master_seed=1).fingerprint()


def test_instance_shape():
    cfg = SweepConfig()
    ds, post = build_instance(cfg, 5)
    assert ds.N == 32 and post.n_components == 2 and post.data_dim == 5
    ds, post = build_instance(cfg, 13)
    assert ds.N == 4096 and ds.requested_N == 2**13


def test_budget_zero_exhausts_immediately():
    rec = run_experiment(Cell("ula", 3, 0), small_cfg(budget=0))
    assert not rec.converged and rec.queries == 0 and rec.error is None
    rec = run_experiment(Cell("mala", 3, 0), small_cfg(budget=1, algos=["mala"]))
    assert rec.budget_exhausted and rec.queries == 1


def test_identical_cells_identical_records():
    cfg = small_cfg()
    a = run_experiment(Cell("em", 3, 1), cfg)
    b = run_experiment(Cell("em", 3, 1), cfg)
    a.wall_ms = b.wall_ms = 0.0
    assert a == b
    assert a.seed != run_experiment(Cell("em", 3, 2), cfg).seed


def test_em_d2_converges_from_data():
    cfg = SweepConfig(dims=[2], algos=["em"], trials=20, budget=10**4)
    refs = {}
    recs = [run_experiment(Cell("em", 2, t), cfg, refs) for t in range(20)]
    assert sum(r.converged for r in recs) >= 18
    assert all(r.queries <= 10**4 for r in recs)


def test_ula_record_fields():
    cfg = small_cfg(algos=["ula"])
    rec = run_experiment(Cell("ula", 3, 0), cfg)
    assert rec.error is None and rec.dim == 3 and rec.mixtures == 1 and rec.n_data == 8
    assert rec.converged == (rec.first_passage is not None)
    assert rec.queries <= cfg.budget


def test_reference_failure_becomes_error_row(tmp_path):
    cfg = small_cfg(tmp_path, dims=[3], algos=["ula"], trials=2,
                    reference={"sampler_steps": 200, "sampler_retries": 0}, reference_agreement=1e-9)
    res = sweep(cfg)
    assert res.n_errors == 2
    assert all(r.error.startswith("non_convergent_reference") for r in res.records)
    rows = (tmp_path / "results.csv").read_text().splitlines()
    assert rows[0] == HEADER and all(",error," in r for r in rows[1:])


def test_single_cell_sweep_matches_run_experiment(tmp_path):
    cfg = small_cfg(tmp_path, dims=[3], algos=["em"], trials=1)
    res = sweep(cfg)
    direct = run_experiment(Cell("em", 3, 0), cfg)
    got = res.records[0]
    got.wall_ms = direct.wall_ms = 0.0
    assert got == direct


def test_sweep_outputs_and_resume(tmp_path):
    cfg = small_cfg(tmp_path)
    first = sweep(cfg)
    assert len(first.records) == 8
    files = {p: (tmp_path / p).read_bytes() for p in ("results.csv", "summary.json", "plot.svg")}
    assert files["results.csv"].decode().splitlines()[0] == HEADER
    lines = (tmp_path / "records.jsonl").read_text().splitlines()
    (tmp_path / "records.jsonl").write_text("\n".join(lines[:3]) + "\n" + lines[3][:20])  # interrupted
    calls = []
    second = sweep(cfg, progress=calls.append)
    ran = [c for c in calls if not c.startswith("reference")]
    assert len(ran) == 5 and len(second.records) == 8
    for p, blob in files.items():
        assert (tmp_path / p).read_bytes() == blob, p


def test_resume_refuses_other_config(tmp_path):
    sweep(small_cfg(tmp_path, dims=[2], algos=["em"], trials=1))
    with pytest.raises(ValueError, match="different configuration"):
        sweep(small_cfg(tmp_path, dims=[2], algos=["em"], trials=1, master_seed=5))


def test_summary_order_invariant(tmp_path):
    res = sweep(small_cfg(tmp_path))
    shuffled = list(res.records)
    random.Random(0).shuffle(shuffled)
    assert summarize(shuffled) == summarize(res.records)
    s = res.summary
    assert "1 MALA step = 2 queries" in s["query_accounting"]
    for c in s["cells"]:
        qs = [r.queries for r in res.records if r.algo == c["algo"] and r.dim == c["dim"]]
        assert c["median_queries"] == float(np.median(qs))


def cells_for(meds, algo="em", exhausted=None, budget=100):
    out = []
    for i, m in enumerate(meds):
        ex = exhausted[i] if exhausted else 0
        out.append({"algo": algo, "dim": 2 + i, "trials": 20, "converged": 20 - ex, "exhausted": ex,
                    "errors": 0, "exhausted_fraction": ex / 20, "median_queries": m, "budget": budget,
                    "median_censored": m >= budget and ex >= 10})
    return out


def test_headline_checks_logic():
    lin = cells_for([10 * d for d in range(2, 17)], "ula", budget=10**6)
    assert headline_checks(lin)["ula"]["slope"] == pytest.approx(1.0)
    assert headline_checks(lin)["ula"]["pass"]
    quad = cells_for([d**2 for d in range(2, 17)], "ula", budget=10**6)
    assert not headline_checks(quad)["ula"]["pass"]
    em = cells_for([5, 8, 20, 100, 100], exhausted=[0, 0, 2, 12, 20])
    chk = headline_checks(em)["em"]
    assert chk["pass"] and chk["exhaustion_onset_dim"] == 5
    bump = cells_for([5, 4, 20, 100], exhausted=[0, 0, 0, 20])
    assert not headline_checks(bump)["em"]["medians_increasing"]
    never = cells_for([5, 8, 20])
    assert headline_checks(never)["em"]["exhaustion_onset_dim"] is None


def test_csv_round_trip(tmp_path):
    recs = [RunRecord("ula", "gmm_sparse", 3, 1, 8, 0, 11, 0.01, 500, True, 3.2, -1.5, float("nan")),
            RunRecord("em", "gmm_sparse", 3, 1, 8, 1, 12, error="boom")]
    text = write_csv(recs, tmp_path / "r.csv")
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS) == HEADER
    assert text.splitlines()[1].split(",")[10] == ""  # wall time only with timing
    back = read_csv(tmp_path / "r.csv")
    assert back[0].queries == 500 and back[0].converged and back[1].error
    with pytest.raises(ValueError):
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
        read_csv(tmp_path / "bad.csv")


def test_plot_deterministic_with_markers(tmp_path):
    cells = cells_for([5, 8, 20, 100, 100], exhausted=[0, 0, 2, 12, 20]) + \
        cells_for([3, 6, 9, 12, 15], "ula")
    emit_plot(cells, tmp_path / "a.svg", 100)
    emit_plot(cells, tmp_path / "b.svg", 100)
    a = (tmp_path / "a.svg").read_bytes()
    assert a == (tmp_path / "b.svg").read_bytes()
    marks = set(re.findall(r'id="exhausted-([a-z_]+-\d+)"', a.decode()))
    assert marks == {"em-5", "em-6"}
    assert 'id="line-em"' in a.decode() and 'id="line-ula"' in a.decode()
    with pytest.raises(ValueError):
        emit_plot([], tmp_path / "c.svg")


def test_plot_axes_cover_data(tmp_path, monkeypatch):
    from matplotlib.figure import Figure

    seen = {}
    orig = Figure.savefig

    def spy(self, *a, **k):
        ax = self.axes[0]
        seen["x"], seen["y"] = ax.get_xlim(), ax.get_ylim()
        return orig(self, *a, **k)

    monkeypatch.setattr(Figure, "savefig", spy)
    cells = cells_for([3, 60, 9000], "ula", budget=10**4)
    emit_plot(cells, tmp_path / "p.svg")
    assert seen["x"][0] < 2 and seen["x"][1] > 4
    assert seen["y"][0] <= 3 and seen["y"][1] >= 10**4


def test_worker_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("LANGEVIN_BENCH_WORKERS", "2")
    res = sweep(small_cfg(tmp_path, dims=[2], algos=["em"], trials=3))
    monkeypatch.setenv("LANGEVIN_BENCH_WORKERS", "zero")
    with pytest.raises(ValueError):
        sweep(small_cfg(tmp_path / "x", dims=[2], algos=["em"], trials=3))
    monkeypatch.delenv("LANGEVIN_BENCH_WORKERS")
    serial = sweep(small_cfg(tmp_path / "y", dims=[2], algos=["em"], trials=3))
    assert write_csv(res.records) == write_csv(serial.records)
