import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sbflow import gaussian as G
from sbflow.gaussian import Coupling2x2, Functional, GaussianState, Variant

# High-precision reference values (50-digit decimal arithmetic on the defining formulas).
C_1_01 = 0.95124921972503928638
C_2_05 = 0.88278221853731870655
SYMKL_TRACE = {0.01: 8.6371388346691119778e-12, 0.1: 8.2456050998946154680e-08, 1.0: 4.6568494798891685331e-04}
MIDPOINT_2_1 = 2.0307764064044151375


def test_c_eps_values():
    assert G.c_eps(1.0, 0.0) == 1.0
    assert G.c_eps(3.0, 0.0) == 1.0
    assert G.c_eps(1.0, 2.0) == pytest.approx(math.sqrt(2) - 1, rel=1e-15)
    assert G.c_eps(1.0, 0.1) == pytest.approx(C_1_01, rel=1e-15)
    assert G.c_eps(2.0, 0.5) == pytest.approx(C_2_05, rel=1e-15)


@given(st.floats(0.01, 100), st.floats(0.0, 50))
def test_c_eps_quadratic_identity(var, eps):
    y = G.c_eps(var, eps) * var
    assert y * y + eps * y == pytest.approx(var * var, rel=1e-12)


@given(st.floats(0.01, 100), st.floats(0.0, 50), st.floats(1e-3, 5))
def test_c_eps_decreasing(var, eps, step):
    assert G.c_eps(var, eps + step) < G.c_eps(var, eps)


def test_couplings():
    sb, ou = G.couplings(1.0, 0.1)
    assert sb.corr == pytest.approx(0.5 * (math.sqrt(4.01) - 0.1), rel=1e-15)
    assert ou.corr == pytest.approx(math.exp(-0.05), rel=1e-15)
    sb, ou = G.couplings(1.0, 1e-8)
    assert sb.corr == pytest.approx(1.0) and ou.corr == pytest.approx(1.0)
    sb, ou = G.couplings(1.0, 1e4)
    assert 0 < sb.corr < 1e-3 and 0 <= ou.corr < 1e-3


def test_coupling_must_be_positive_definite():
    with pytest.raises(ValueError):
        Coupling2x2(1.0)
    assert Coupling2x2(0.3).cov() == [[1.0, 0.3], [0.3, 1.0]]


def test_sym_kl_values():
    assert G.sym_kl(Coupling2x2(0.4), Coupling2x2(0.4)) == 0.0
    assert G.sym_kl(Coupling2x2(0.0), Coupling2x2(0.5)) == pytest.approx(1 / 3, rel=1e-15)
    for eps, want in SYMKL_TRACE.items():
        assert G.sym_kl(*G.couplings(1.0, eps)) == pytest.approx(want, rel=1e-9)


def test_sym_kl_rejects_near_singular():
    with pytest.raises(ValueError):
        G.sym_kl(Coupling2x2(1 - 1e-13), Coupling2x2(0.5))


@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_sym_kl_symmetric_nonnegative(a, b):
    x, y = G.sym_kl(Coupling2x2(a), Coupling2x2(b)), G.sym_kl(Coupling2x2(b), Coupling2x2(a))
    assert x == y and x >= 0
    if a == b:
        assert x == 0
    elif abs(a - b) > 1e-100:
        assert x > 0


def test_sym_kl_eps4_limit():
    assert G.sym_kl(*G.couplings(1.0, 0.01)) / 0.01**4 == pytest.approx(1 / 1152, rel=0.01)


@given(st.floats(0.1, 10), st.floats(0.0, 5), st.floats(0.0, 1.0))
def test_entropic_var_properties(var, eps, t):
    v = G.entropic_var(var, eps, t)
    assert v >= var * (1 - 1e-14)
    assert v == pytest.approx(G.entropic_var(var, eps, 1 - t), rel=1e-12)


def test_entropic_var_endpoints_and_midpoint():
    assert G.entropic_var(1.7, 0.3, 0.0) == 1.7 and G.entropic_var(1.7, 0.3, 1.0) == 1.7
    assert G.entropic_var(1.0, 0.1, 0.5) == pytest.approx(G.entropic_midpoint_var(1.0, 0.1), abs=1e-12)
    assert G.entropic_var(2.0, 1.0, 0.5) == pytest.approx(MIDPOINT_2_1, abs=1e-12)
    assert G.entropic_midpoint_var(2.0, 1.0) == pytest.approx(MIDPOINT_2_1, abs=1e-12)
    with pytest.raises(ValueError):
        G.entropic_var(1.0, 0.1, 1.5)


def test_fisher():
    assert G.fisher(1.0, 1) == 1.0 and G.fisher(4.0, 1) == 0.25 and G.fisher(1.0, 3) == 3.0


def test_delta_fisher():
    assert G.delta_fisher(1.0, 0.0) == 0.0
    grid = [0.2, 0.4, 0.6, 0.8, 1.0]
    vals = [G.delta_fisher(1.0, e) for e in grid]
    assert all(b > a for a, b in zip(vals[:-1], vals[1:]))
    for e in grid:
        assert 0 <= G.delta_fisher(1.0, e) <= G.midpoint_fisher_gap(1.0, e)
    ratios = [G.delta_fisher(1.0, e) / e**2 for e in (0.2, 0.1, 0.05)]
    assert ratios[2] == pytest.approx(1 / 24, rel=0.01)
    assert abs(ratios[2] - ratios[1]) < abs(ratios[1] - ratios[0])


def test_delta_fisher_scales_with_dim():
    assert G.delta_fisher(1.0, 0.3, dim=3) == pytest.approx(3 * G.delta_fisher(1.0, 0.3), rel=1e-9)


def test_grad_u_moment():
    assert G.grad_u_moment(1.0, 1, 1.0) == 1 / 16
    assert G.grad_u_moment(1.0, 4, 1.0) == 4 / 16
    assert G.grad_u_moment(1.0, 1, 0.0) == 0.0
    assert G.grad_u_moment(2.0, 1, 2.0) == 1 / 128


def test_kl_bound_inequality_and_order():
    r3 = []
    for eps in (0.05, 0.1, 0.2, 0.5, 1.0):
        lhs = G.sym_kl(*G.couplings(1.0, eps))
        rhs = G.thm31_rhs(1.0, eps)
        assert lhs <= rhs
        r3.append(rhs / eps**3)
    assert r3[0] == pytest.approx(r3[1], rel=0.01)
    assert G.thm31_rhs(1.0, 1e-4) < 1e-12


@pytest.mark.parametrize(
    "variant, start, t, want",
    [
        (Variant.ENTROPY, 1.0, 5.0, 6.0),
        (Variant.KL, 1.0, 3.7, 1.0),
        (Variant.KL, 3.0, math.log(2), 2.0),
        (Variant.REVERSE_ENTROPY, 2.5, 1.0, 1.5),
        (Variant.REVERSE_KL, 2.0, math.log(2), 3.0),
    ],
)
def test_exact_flow(variant, start, t, want):
    f = Functional(variant, 1.0 if variant.is_reverse else None)
    assert G.exact_flow(f, GaussianState.centered(start), t).var == pytest.approx(want, rel=1e-14)


def test_exact_flow_reverse_endpoint_and_limits():
    f = Functional(Variant.REVERSE_ENTROPY, 1.0)
    assert G.exact_flow(f, GaussianState.centered(1.3 + 1.0), 1.0).var == pytest.approx(1.3)
    with pytest.raises(ValueError):
        G.exact_flow(f, GaussianState.centered(5.0), 1.5)
    with pytest.raises(ValueError):
        Functional(Variant.REVERSE_KL)


def test_exact_flow_kl_mean_decay():
    s = G.exact_flow(Functional(Variant.KL), GaussianState((2.0,), 1.0), 2.0)
    assert s.mean[0] == pytest.approx(2.0 * math.exp(-1.0))


@given(st.sampled_from([Variant.ENTROPY, Variant.KL]), st.floats(0.1, 5), st.floats(0, 3), st.floats(0, 3))
def test_exact_flow_semigroup(variant, var, t1, t2):
    f = Functional(variant)
    s = GaussianState((0.5,), var)
    a = G.exact_flow(f, G.exact_flow(f, s, t1), t2)
    b = G.exact_flow(f, s, t1 + t2)
    assert a.var == pytest.approx(b.var, abs=1e-12) and a.mean[0] == pytest.approx(b.mean[0], abs=1e-12)


def test_w2_isotropic():
    a = GaussianState.centered(1.0)
    assert G.w2_isotropic(a, a) == 0.0
    assert G.w2_isotropic(a, GaussianState.centered(4.0)) == 1.0
    assert G.w2_isotropic(a, GaussianState((3.0,), 1.0)) == 3.0
    assert G.w2_isotropic(GaussianState.centered(1.0, 4), GaussianState.centered(4.0, 4)) == 2.0
    with pytest.raises(ValueError):
        G.w2_isotropic(a, GaussianState.centered(1.0, 2))


def test_state_validation():
    with pytest.raises(ValueError):
        GaussianState((0.0,), 0.0)
    with pytest.raises(ValueError):
        GaussianState((math.nan,), 1.0)
