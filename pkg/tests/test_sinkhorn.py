import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbflow.cloud import ParticleCloud, make_rng
from sbflow.sinkhorn import (
    SinkhornError,
    _softmin_dense,
    _softmin_sorted,
    barycentric_projection,
    plan_matrix,
    plan_row,
    solve_symmetric,
)


def test_single_point():
    sol = solve_symmetric(ParticleCloud([[2.5]]), 0.3)
    assert sol.marginal_error == 0.0
    assert plan_row(sol, 0) == pytest.approx([1.0])


def test_high_temperature_is_product_coupling():
    sol = solve_symmetric(ParticleCloud([[-1.0], [1.0]]), 1e6)
    np.testing.assert_allclose(plan_matrix(sol), 0.25, atol=1e-6)
    np.testing.assert_allclose(barycentric_projection(sol), 0.0, atol=1e-5)


def test_low_temperature_is_identity_coupling():
    sol = solve_symmetric(ParticleCloud([[-1.0], [1.0]]), 1e-3)
    p = plan_matrix(sol)
    assert p[0, 0] == pytest.approx(0.5, abs=1e-8) and p[1, 1] == pytest.approx(0.5, abs=1e-8)
    assert p[0, 1] <= 1e-8


def test_two_point_matches_one_parameter_minimizer():
    # pi = [[p, 1/2 - p], [1/2 - p, p]]; first-order condition gives p / (1/2 - p) = exp(c / eps).
    x, eps = np.array([[-0.3], [0.5]]), 0.2
    c = 0.5 * 0.8**2
    r = np.exp(c / eps)
    p = 0.5 * r / (1 + r)
    np.testing.assert_allclose(plan_matrix(solve_symmetric(ParticleCloud(x), eps)), [[p, 0.5 - p], [0.5 - p, p]],
                               atol=1e-10)


def test_barycentric_projection_identity_limit():
    x = np.array([[-1.0], [0.3], [2.0]])
    np.testing.assert_allclose(barycentric_projection(solve_symmetric(ParticleCloud(x), 1e-3)), x, atol=1e-6)


def test_plan_is_symmetric_and_feasible():
    x = make_rng(1).standard_normal((60, 2))
    sol = solve_symmetric(ParticleCloud(x), 0.2)
    p = plan_matrix(sol)
    assert np.array_equal(p, p.T)
    assert np.all(p > 0)
    assert np.abs(p.sum(1) - 1 / 60).max() <= 1e-9
    assert sol.marginal_error <= 1e-9


def test_plan_row_matches_matrix_and_checks_index():
    sol = solve_symmetric(ParticleCloud(make_rng(2).standard_normal((20, 1))), 0.1)
    np.testing.assert_allclose(plan_row(sol, 4), plan_matrix(sol)[4], rtol=1e-14)
    with pytest.raises(IndexError):
        plan_row(sol, 20)


def test_projection_preserves_mean():
    x = make_rng(3).standard_normal((200, 1))
    sol = solve_symmetric(ParticleCloud(x), 0.05)
    b = barycentric_projection(sol)
    assert abs(b.mean() - x.mean()) <= 10 * sol.marginal_error * np.abs(x).max() + 1e-12


def test_duplicate_points_are_allowed():
    sol = solve_symmetric(ParticleCloud([[0.0], [0.0], [1.0]]), 0.1)
    assert sol.marginal_error <= 1e-9


def test_non_convergence_raises_with_error():
    with pytest.raises(SinkhornError) as info:
        solve_symmetric(ParticleCloud(make_rng(4).standard_normal((50, 1))), 1e-3, max_iter=1)
    assert info.value.marginal_error > 1e-9 and info.value.iterations == 1


@pytest.mark.parametrize("eps, tol", [(0.0, 1e-9), (-1.0, 1e-9), (0.1, 0.0)])
def test_bad_parameters(eps, tol):
    with pytest.raises(ValueError):
        solve_symmetric(ParticleCloud([[0.0], [1.0]]), eps, tol)


def test_windowed_kernel_matches_dense():
    x = np.sort(make_rng(5).standard_normal(400) * 2)
    f = make_rng(6).standard_normal(400) * 0.1
    for eps in (1e-3, 0.1, 1.0):
        np.testing.assert_allclose(_softmin_sorted(x, f, eps), _softmin_dense(x[:, None], f, eps), rtol=0, atol=1e-12)


def test_potentials_csv():
    sol = solve_symmetric(ParticleCloud([[0.0], [1.0]]), 0.5)
    lines = sol.potentials_csv().splitlines()
    assert lines[0] == "index,potential" and len(lines) == 3


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=2, max_size=12),
    st.floats(-5, 5),
    st.sampled_from([0.05, 0.3, 1.0]),
)
def test_translation_invariance(xs, shift, eps):
    x = np.array(xs)[:, None]
    a = solve_symmetric(ParticleCloud(x), eps)
    b = solve_symmetric(ParticleCloud(x + shift), eps)
    np.testing.assert_allclose(plan_matrix(a), plan_matrix(b), atol=1e-9)
    np.testing.assert_allclose(barycentric_projection(b), barycentric_projection(a) + shift, atol=1e-7)
