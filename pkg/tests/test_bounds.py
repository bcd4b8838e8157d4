import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from langevin_bench.bounds import (
    beta_requirement,
    bound_report,
    log_sobolev_lower_bound,
    mala_mixing_bound,
    optimization_lower_bound,
    optimization_validity_threshold,
    packing_number,
    ula_mixing_bound,
)
from langevin_bench.objectives import WELL_FACTOR
from langevin_bench.validation_suite import check_bounds

pos = st.floats(0.01, 10)


def test_log_sobolev_examples():
    assert log_sobolev_lower_bound(1, 1, 0) == 0.5
    assert log_sobolev_lower_bound(2, 1, 0) == 1.0
    assert log_sobolev_lower_bound(1, 1, 0.25) == pytest.approx(0.5 / math.e, rel=1e-12)
    assert log_sobolev_lower_bound(1, 1, 0.25) == pytest.approx(0.18394, abs=1e-5)


def test_ula_mixing_example():
    v = ula_mixing_bound(0.5, 4, 1, 0.5, 0.5)
    assert v == pytest.approx(math.exp(8) * 4 * 16 * math.log(16), rel=1e-12)
    assert v == pytest.approx(5.288e5, rel=1e-3)
    assert ula_mixing_bound(0.5, 4, 1, 0.5, 0.5, prefactor=3) == pytest.approx(3 * v)


def test_mala_mixing_example():
    v = mala_mixing_bound(math.exp(-1), 1, 2, 1, 0)
    assert v == pytest.approx(2**1.5 * (math.log(2) + 1) ** 1.5, rel=1e-12)
    assert v == pytest.approx(6.2314, abs=1e-4)


def test_log_floor_for_tiny_ratio():
    # d/eps^2 below 2 keeps ln at ln 2 so the bound stays positive
    assert ula_mixing_bound(2.0, 1, 1, 1, 0) == pytest.approx(0.25 * math.log(2))


def test_packing_examples():
    assert packing_number(1, 0.1, 2) == 20
    assert packing_number(1, 1, 3) == 0 and packing_number(1, 2, 3) == 0
    for d in range(1, 12):
        assert packing_number(0.3, 0.1, d) == 1


@given(pos, pos, st.integers(1, 8))
def test_packing_nonnegative_integer(R, r, d):
    n = packing_number(R, r, d)
    assert isinstance(n, int) and n >= 0


def test_optimization_bound_examples():
    assert optimization_lower_bound(WELL_FACTOR, 4, 1 / 16, 2) == 12
    assert optimization_lower_bound(WELL_FACTOR, 4, 1 / 16, 2, p=0) == 0
    thr = optimization_validity_threshold(1.0, 1.0)
    assert optimization_lower_bound(1.0, 1.0, thr * 1.01, 3) == 1.0
    assert optimization_lower_bound(1.0, 1.0, thr, 3) >= 0


def test_beta_examples():
    assert beta_requirement(0.5, 2, 4 * WELL_FACTOR, 1) == pytest.approx(2 * math.log(2), rel=1e-12)
    with_p = beta_requirement(0.5, 2, 4 * WELL_FACTOR, 1, p=0.5)
    assert with_p == pytest.approx(max(2 * math.log(2) + math.log(0.5) / 0.5, 0.0))
    assert beta_requirement(0.5, 2, 1, 1, p=0) == 0.0


@given(pos, pos, st.floats(0, 2), st.floats(1e-3, 1), st.integers(1, 20))
def test_all_outputs_nonnegative(L, m, R, eps, d):
    L = max(L, m)
    rep = bound_report(L, m, R, eps, d)
    for v in (rep.rho_lower, rep.ula_mixing_upper, rep.mala_mixing_upper,
              rep.opt_queries_lower, rep.packing_eta, rep.beta_required):
        assert v >= 0
    assert isinstance(rep.packing_eta, int)


@given(st.floats(0.1, 5), st.floats(0.5, 4), st.floats(0, 0.3), st.floats(1e-3, 0.5), st.integers(1, 10))
def test_mixing_monotone(m, kappa, R, eps, d):
    L = m * kappa
    for f in (ula_mixing_bound, mala_mixing_bound):
        base = f(eps, d, L, m, R)
        assert f(eps, d + 1, L, m, R) >= base
        assert f(eps, d, L, m, R + 0.05) >= base
        assert f(eps / 2, d, L, m, R) >= base
        assert f(eps, d, 2 * L, m, R) >= base


def test_bound_examples_and_sweeps():
    res = check_bounds()
    assert res.ok, res.detail


def test_report_text_and_json():
    rep = bound_report(1.0, 0.5, 2.0, 0.002, 3)
    text = rep.as_text()
    assert "ULA mixing upper bound" in text and "prefactor c" in text
    data = json.loads(rep.as_json())
    assert data["dim"] == 3 and data["opt_formula_valid"] is True and data["prefactor"] == 1.0
    loose = bound_report(1.0, 0.5, 2.0, 4.0 / (50 * WELL_FACTOR), 3)
    assert not loose.opt_formula_valid and loose.threshold_gap
