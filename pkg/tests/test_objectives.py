import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevin_bench.numerics import RngStream, finite_diff_grad
from langevin_bench.objectives import (
    WELL_FACTOR,
    GmmPosterior,
    ObjectiveConstants,
    PackedWellObjective,
    fact_d1_weight_coeff,
    gmm_grad,
    gmm_responsibilities,
    gmm_value,
    hard_grad,
    hard_objective_new,
    hard_value,
    load_objective,
    packing_centers,
    quadratic_objective,
    save_objective,
    temper,
)


def rel_err(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


@pytest.fixture
def well2():
    return hard_objective_new(1.0, 0.25, 2.0, 0.002, 2, RngStream(8))


def test_constants_validation():
    with pytest.raises(ValueError):
        ObjectiveConstants(0.5, 1.0, 0.0, 2)
    with pytest.raises(ValueError):
        ObjectiveConstants(1.0, 1.0, -1.0, 2)
    c = ObjectiveConstants(4.0, 2.0, 1.0, 3)
    assert c.condition_number() == 2.0
    assert c.scaled(3.0) == ObjectiveConstants(12.0, 6.0, 1.0, 3)


# packing


def test_packing_rejects_oversized_ball():
    with pytest.raises(ValueError):
        packing_centers(1.0, 1.0, 2, 10)
    with pytest.raises(ValueError):
        packing_centers(1.0, 1.3, 1, 10)


def test_packing_single_ball_wider_than_half_container():
    # the one-dimensional sampler oracle instance has r = 0.646 inside B(0, 1)
    assert np.array_equal(packing_centers(1.0, 0.6, 2, 10), np.zeros((1, 2)))
    r = math.sqrt(WELL_FACTOR * 0.02)
    assert np.array_equal(packing_centers(1.0, r, 1, 10), np.zeros((1, 1)))


def test_packing_hand_count():
    c = packing_centers(1.0, 0.1, 2, 1000)
    assert len(c) >= 20
    assert np.linalg.norm(c, axis=1).max() <= 0.9 + 1e-12
    diff = np.linalg.norm(c[:, None] - c[None], axis=-1) + np.eye(len(c)) * 9
    assert diff.min() >= 0.2 - 1e-12


def test_packing_one_dim_single_center():
    assert np.array_equal(packing_centers(1.0, 0.4, 1, 10), np.zeros((1, 1)))


def test_packing_truncates_and_is_deterministic():
    a = packing_centers(1.0, 0.05, 3, 17)
    assert len(a) == 17
    assert np.array_equal(a, packing_centers(1.0, 0.05, 3, 17))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 4.0), st.floats(0.05, 0.8), st.integers(1, 5))
def test_packing_invariants(R_outer, frac, d):
    r = R_outer * frac
    c = packing_centers(R_outer, r, d, 400)
    assert len(c) >= 1
    assert np.all(np.linalg.norm(c, axis=1) <= (R_outer - r) * (1 + 1e-12))
    if len(c) > 1:
        diff = np.linalg.norm(c[:, None] - c[None], axis=-1) + np.eye(len(c)) * 1e9
        assert diff.min() >= 2 * r * (1 - 1e-12)


# packed well


def test_well_bottom_and_plateau(well2):
    c = well2.secret_center
    assert abs(hard_value(well2, c) + 0.002) <= 1e-12
    assert np.array_equal(hard_grad(well2, c), np.zeros(2))
    others = [j for j in range(well2.n_wells) if j != well2.secret_index]
    for j in others[:20]:
        assert well2.value(well2.centers[j]) == 0.0


def test_well_radius_formula(well2):
    assert well2.well_radius == pytest.approx(math.sqrt(WELL_FACTOR * 0.002 / 1.0))


def test_half_radius_boundary(well2):
    x = np.array([1.0, 0.0])  # |x| = R/2 exactly
    assert well2.value(x) == 0.0
    assert np.array_equal(well2.grad(x), np.zeros(2))


def test_quadratic_branch(well2):
    x = np.array([0.0, 3.0])
    assert well2.value(x) == pytest.approx(0.25 * 4.0)
    assert np.allclose(well2.grad(x), 2 * 0.25 * (1 - 1 / 3) * x)


def test_well_gradient_finite_differences(well2):
    gen = np.random.default_rng(0)
    c, r = well2.secret_center, well2.well_radius
    for _ in range(50):
        u = gen.standard_normal(2)
        x = c + u / np.linalg.norm(u) * r * gen.uniform(0.05, 0.99)
        assert rel_err(well2.grad(x), finite_diff_grad(well2.value, x)) < 1e-5


def test_tie_breaking_at_well_edge(well2):
    x = well2.secret_center + np.array([well2.well_radius, 0.0])
    if np.linalg.norm(x - well2.secret_center) == well2.well_radius:
        assert well2.value(x) == 0.0


def test_hard_instance_validity_range():
    with pytest.raises(ValueError):
        hard_objective_new(1.0, 0.25, 2.0, 0.1, 2, RngStream(0))
    with pytest.raises(ValueError):
        hard_objective_new(1.0, 0.75, 2.0, 0.001, 2, RngStream(0))
    with pytest.warns(UserWarning):
        hard_objective_new(1.0, 0.25, 2.0, 0.02, 1, RngStream(0), strict=False)


def test_secret_index_uniform():
    seen = {hard_objective_new(1.0, 0.25, 2.0, 0.002, 2, RngStream(s)).secret_index for s in range(60)}
    assert len(seen) > 5


def test_plateau_independent_of_secret(well2):
    twin = PackedWellObjective(well2.constants, well2.centers, (well2.secret_index + 1) % well2.n_wells,
                               well2.well_radius, well2.eps_gap)
    gen = np.random.default_rng(3)
    r = well2.well_radius
    for _ in range(200):
        x = gen.uniform(-1.5, 1.5, 2)
        if min(np.linalg.norm(x - well2.secret_center), np.linalg.norm(x - twin.secret_center)) > r:
            assert well2.value(x) == twin.value(x)
            assert np.array_equal(well2.grad(x), twin.grad(x))


def test_packed_well_smoothness(well2):
    gen = np.random.default_rng(5)
    c, r, L = well2.secret_center, well2.well_radius, well2.constants.L
    for _ in range(500):
        x = c + gen.uniform(-1.5 * r, 1.5 * r, 2)
        z = x + gen.uniform(-r, r, 2)
        lhs = np.linalg.norm(well2.grad(x) - well2.grad(z))
        assert lhs <= L * np.linalg.norm(x - z) * (1 + 1e-6)


# GMM posterior


def small_post(C=1.0, M=2, seed=0, **kw):
    gen = np.random.default_rng(seed)
    data = gen.uniform(-1, 1, (5, 3))
    return GmmPosterior(data, 0.6, M, 0.05, C, **kw)


def test_single_component_no_background():
    post = small_post(C=0.0, M=1)
    gamma = gmm_responsibilities(post, np.zeros(3))
    assert np.allclose(gamma, 1.0)


def test_huge_background_kills_data_term():
    post = small_post(C=1e300)
    mu = np.full(6, 0.1)
    assert np.all(gmm_responsibilities(post, mu) < 1e-290)
    assert np.allclose(gmm_grad(post, mu), 0.0, atol=1e-290)


def test_gmm_gradient_finite_differences():
    post = small_post()
    gen = np.random.default_rng(1)
    for _ in range(20):
        mu = gen.uniform(-0.5, 0.5, 6)
        assert rel_err(gmm_grad(post, mu), finite_diff_grad(post.value, mu)) < 1e-5


def test_gmm_value_by_hand():
    data = np.array([[0.0], [1.0]])
    post = GmmPosterior(data, 1.0, 1, 0.5, 1.0, prior_m=1.0, prior_R=10.0)
    mu = np.array([0.25])
    want = -sum(math.log(0.5 * math.exp(-(y - 0.25) ** 2 / 2) + 1.0) for y in (0.0, 1.0))
    assert gmm_value(post, mu) == pytest.approx(want, rel=1e-14)


def test_prior_branch_value_and_gradient():
    post = small_post(prior_m=0.5, prior_R=0.2)
    mu = np.full(6, 2.0)
    radius = math.sqrt(2) * 0.2
    excess = np.linalg.norm(mu) - radius
    no_prior = small_post(prior_m=0.5, prior_R=100.0)
    assert post.value(mu) - no_prior.value(mu) == pytest.approx(0.5 * excess**2)
    assert rel_err(post.grad(mu), finite_diff_grad(post.value, mu)) < 1e-6


def test_responsibility_column_sums():
    post = small_post()
    gamma = post.responsibilities(np.random.default_rng(2).uniform(-1, 1, 6))
    col = gamma.sum(axis=0)
    assert np.all(col > 0) and np.all(col < 1)


def test_far_component_underflows_cleanly():
    post = small_post()
    mu = np.concatenate([np.zeros(3), np.full(3, 1e4)])
    gamma = post.responsibilities(mu)
    assert np.all(np.isfinite(gamma)) and np.all(gamma[1] == 0)
    assert np.all(np.isfinite(post.grad(mu)))


def test_tiny_weights_keep_precision():
    post = small_post(C=1e-300)
    mu = np.random.default_rng(4).uniform(-0.5, 0.5, 6)
    assert rel_err(post.grad(mu), finite_diff_grad(post.value, mu)) < 1e-5


def test_gmm_dimension_mismatch():
    with pytest.raises(ValueError):
        small_post().value(np.zeros(5))
    with pytest.raises(ValueError):
        GmmPosterior(np.zeros((3, 2)), 0.0, 1, 1.0)


def test_fact_d1_weight_makes_data_term_smooth():
    post = small_post()
    c = fact_d1_weight_coeff(post.data, post.sigma, smoothness=0.5)
    assert c > 0
    smooth = GmmPosterior(post.data, post.sigma, 1, c, 1.0, prior_R=100.0)
    gen = np.random.default_rng(6)
    worst = 0.0
    for _ in range(300):
        x, z = gen.uniform(-1, 1, 3), gen.uniform(-1, 1, 3)
        worst = max(worst, np.linalg.norm(smooth.grad(x) - smooth.grad(z)) / np.linalg.norm(x - z))
    assert worst <= 0.5 * (1 + 1e-6)


# quadratic and tempering


def test_quadratic_examples():
    q = quadratic_objective(2, 2.0)
    assert q.value([0, 0]) == 0.0
    assert q.value([1, 1]) == 2.0
    assert np.array_equal(q.grad([1, 1]), [2.0, 2.0])
    assert q.constants == ObjectiveConstants(2.0, 2.0, 0.0, 2)
    with pytest.raises(ValueError):
        quadratic_objective(2, 0.0)


def test_temper_identity_and_scaling(well2):
    gen = np.random.default_rng(9)
    t1 = temper(well2, 1.0)
    for _ in range(20):
        x = gen.uniform(-2, 2, 2)
        assert t1.value(x) == well2.value(x)
        assert np.array_equal(t1.grad(x), well2.grad(x))
    t2 = temper(quadratic_objective(2), 2.0)
    assert t2.value([1, 0]) == 1.0
    assert np.array_equal(t2.grad([1, 0]), [2.0, 0.0])
    assert t2.constants.L == 2.0 and t2.constants.m == 2.0
    with pytest.raises(ValueError):
        temper(well2, 0.0)


@pytest.mark.parametrize("beta", [0.3, 1.0, 7.0])
def test_tempered_argmin_is_secret_center(well2, beta):
    t = temper(well2, beta)
    c = well2.secret_center
    gen = np.random.default_rng(int(beta * 10))
    assert all(t.value(c) <= t.value(c + gen.normal(0, 0.1, 2)) for _ in range(100))


def test_objective_json_round_trip(tmp_path, well2):
    post = small_post()
    for obj in (well2, post, quadratic_objective(3, 1.5), temper(post, 2.0)):
        path = tmp_path / "obj.json"
        save_objective(obj, path)
        back = load_objective(path)
        x = np.random.default_rng(0).uniform(-1, 1, obj.dim)
        assert back.value(x) == obj.value(x)
        assert np.array_equal(back.grad(x), obj.grad(x))


def test_non_strict_outside_regime_warns_only():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        obj = hard_objective_new(1.0, 0.75, 2.0, 0.001, 2, RngStream(0), strict=False)
    assert obj.n_wells >= 1 and w
