import json
import subprocess
import sys

import pytest

from langevin_bench.cli import build_parser, main

SUBCOMMANDS = ("bounds", "gen-data", "run", "sweep", "validate", "plot")


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds_prints_rho(capsys):
    code, out, _ = run(["bounds", "--L", "1", "--m", "1", "--R", "0", "--eps", "0.5", "--dim", "4"], capsys)
    assert code == 0
    line = next(ln for ln in out.splitlines() if ln.startswith("rho lower bound"))
    assert line.split()[-1] == "0.5"
    code, out, _ = run(["bounds", "--L", "1", "--m", "1", "--R", "0", "--eps", "0.5", "--dim", "4", "--json"],
                       capsys)
    assert json.loads(out)["rho_lower"] == 0.5


def test_user_errors_exit_one(capsys):
    assert run(["bounds", "--L", "-1", "--m", "1", "--R", "0", "--eps", "0.5", "--dim", "4"], capsys)[0] == 1
    code, _, err = run(["bounds", "--wat"], capsys)
    assert code == 1 and "usage" in err
    assert run(["frobnicate"], capsys)[0] == 1
    assert run(["plot", "--results", "/nonexistent.csv", "--out", "x.svg"], capsys)[0] == 1
    assert run(["run", "--algo", "em", "--objective", "quadratic", "--steps", "5"], capsys)[0] == 1


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_on_every_subcommand(sub, capsys):
    code, out, _ = run([sub, "--help"], capsys)
    assert code == 0 and "usage" in out


def test_parser_lists_all_subcommands():
    text = build_parser().format_help()
    assert all(s in text for s in SUBCOMMANDS)


def test_run_twice_identical(tmp_path, capsys):
    argv = ["run", "--algo", "ula", "--objective", "quadratic", "--dim", "2", "--steps", "1000", "--seed", "7"]
    code, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert code == 0 and a == b and a.splitlines()[0].startswith("algo,objective,dim")
    assert run(argv + ["--out", str(tmp_path / "a.csv"), "--samples", str(tmp_path / "s.csv")], capsys)[0] == 0
    assert run(argv + ["--out", str(tmp_path / "b.csv")], capsys)[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 1001


@pytest.mark.parametrize("extra", [["--algo", "mala", "--objective", "packed_well", "--dim", "2", "--eps", "0.002"],
                                   ["--algo", "em", "--objective", "gmm", "--dim", "4"],
                                   ["--algo", "ula", "--objective", "gmm", "--dim", "3", "--beta", "2"]])
def test_run_variants(extra, capsys):
    code, out, _ = run(["run", "--steps", "200", *extra], capsys)
    assert code == 0 and len(out.splitlines()) == 2


def test_gen_data_and_run_on_file(tmp_path, capsys):
    path = tmp_path / "d.json"
    assert run(["gen-data", "--dim", "6", "--n", "40", "--out", str(path)], capsys)[0] == 0
    assert json.loads(path.read_text())["N"] == 40
    code, out, _ = run(["run", "--algo", "em", "--objective", "gmm", "--data", str(path), "--steps", "50"], capsys)
    assert code == 0 and out.splitlines()[1].split(",")[4] == "40"
    adv = tmp_path / "a.json"
    assert run(["gen-data", "--kind", "adversarial", "--dim", "16", "--M", "4", "--n", "64", "--out", str(adv)],
               capsys)[0] == 0
    assert run(["gen-data", "--kind", "adversarial", "--dim", "16", "--n", "64", "--out", str(adv)], capsys)[0] == 1
    assert run(["gen-data", "--dim", "1", "--n", "5", "--out", str(adv)], capsys)[0] == 1


def test_sweep_small_grid(tmp_path, capsys):
    out = tmp_path / "sw"
    code, text, _ = run(["sweep", "--dims", "2,3,4", "--algos", "em,ula", "--trials", "3", "--budget", "100000",
                         "--out", str(out)], capsys)
    assert code == 0
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 1 + 18
    assert "1 EM iteration = 1 query" in text
    for f in ("config.json", "summary.json", "plot.svg", "references.json"):
        assert (out / f).exists()
    code, _, _ = run(["plot", "--results", str(out / "results.csv"), "--budget", "100000",
                      "--out", str(tmp_path / "p.svg")], capsys)
    assert code == 0 and (tmp_path / "p.svg").read_bytes().startswith(b"<?xml")


def test_sweep_error_rows_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reference": {"sampler_steps": 200, "sampler_retries": 0},
                               "reference_agreement": 1e-9}))
    code, _, _ = run(["sweep", "--config", str(cfg), "--dims", "3", "--algos", "em,ula", "--trials", "1",
                      "--budget", "1000", "--out", str(tmp_path / "o")], capsys)
    assert code == 3
    code, _, _ = run(["sweep", "--config", str(cfg), "--dims", "3", "--algos", "ula", "--trials", "1",
                      "--budget", "1000", "--out", str(tmp_path / "o2")], capsys)
    assert code == 2
    cfg.write_text("{not json")
    assert run(["sweep", "--config", str(cfg)], capsys)[0] == 1


def test_sweep_dims_range_syntax(tmp_path, capsys):
    code, _, _ = run(["sweep", "--dims", "2-3", "--algos", "em", "--trials", "1", "--out", str(tmp_path)], capsys)
    assert code == 0 and len((tmp_path / "results.csv").read_text().splitlines()) == 3
    assert run(["sweep", "--dims", "two", "--out", str(tmp_path)], capsys)[0] == 1


def test_validate_quick(capsys):
    code, out, _ = run(["validate"], capsys)
    assert code == 0 and out.count("PASS") == 6


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "langevin_bench.cli", "bounds", "--L", "1", "--m", "1",
                          "--R", "0.25", "--eps", "0.5", "--dim", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1839397206" in res.stdout
