import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bettilab import surface as S
from bettilab import verticality as V

POINTS = [0.3 + 0.2j, -0.25 + 0.4j, 0.5 - 0.1j, 1.4 + 0.9j]


@pytest.mark.parametrize("t", POINTS)
def test_dbar_u_pde(fixture, t):
    u, _, _, _ = V.u_derivatives(fixture, None, t)
    assert V.pde_residual(fixture, None, t) <= 1e-5 * (1 + abs(u))


def test_pde_closed_form():
    assert V.pde_residual_closed_form(0.3 + 0.7j, 0.2 + 1.3j) == 0


@pytest.mark.parametrize("t", POINTS)
def test_nabla_eta_holomorphic_and_equal_to_z2(fixture, t):
    v, anti = V.nabla_eta(fixture, None, t)
    assert anti <= 1e-4 * (1 + abs(v))
    z2 = V.z_second_derivative(fixture, None, t)
    assert abs(v - z2) <= 1e-6 * (1 + abs(v))


@pytest.mark.parametrize("t", POINTS[:2])
def test_log_psi_laplacian(fixture, t):
    res, lhs, rhs = V.log_psi_laplacian_check(fixture, None, t)
    assert res < 1e-6


def test_log_psi_laplacian_closed_form():
    lhs, rhs = V.log_psi_laplacian_closed_form(0.1 + 0.2j, 0.3 + 1.1j)
    assert lhs == pytest.approx(rhs, rel=1e-15)


def test_psi_pullback(fixture):
    val = V.psi_pullback(fixture, None, 0.3 + 0.2j)
    assert val.psi > 0 and not val.ramified
    tau, dtau, dz = val.frame
    assert val.psi == pytest.approx(abs(val.u) ** 2 * tau.imag, rel=1e-12)


def test_psi_branch_independent(fixture):
    # same point reached along two different loops gives the same psi
    t = 0.3 + 0.2j
    ctx = S.root_context(fixture, t)
    around = S.transport_path(ctx, [1.2 + 0.2j, 1.2 - 0.3j, 0.3 - 0.3j, t])  # encircles t = 1
    assert abs(around.tau - ctx.tau) > 1e-3
    a = V.psi_pullback(fixture, ctx, t).psi
    b = V.psi_pullback(fixture, around, t).psi
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("m,r", [(2, 1), (3, 1), (3, 2), (1, 2), (1, 1)])
def test_synthetic_good_slope(m, r):
    fit = V.order_by_slope(V.synthetic_good_curve(m, r), None, 0, np.geomspace(1e-2, 1e-4, 6))
    assert abs(2 * fit.exponent - 2 * (m - r)) < 0.1


@pytest.mark.parametrize("m", [1, 2, 3])
def test_synthetic_good_winding(m):
    assert V.order_by_winding(V.synthetic_good_curve(m, 1), None, 0, 1e-2) == m - 1


def test_good_point_multiplicity_synthetic():
    rec = V.good_point_multiplicity(V.synthetic_good_curve(3, 1), None, 0, 1)
    assert rec.m_b == 3 and not rec.flags


@pytest.mark.parametrize("j", [1, 2, 3])
def test_synthetic_cusp_readings(j):
    # contact order j on the unit circle: psi exponent j, so the census reading is j + 1
    rec = V.cusp_multiplicity(V.synthetic_cusp_curve(j), None, 0)
    assert rec.m_definition == j and rec.m_b == j + 1


def test_synthetic_cusp_off_circle():
    rec = V.cusp_multiplicity(V.synthetic_cusp_curve(1, xi0=2.0), None, 0)
    assert rec.m_b == 1 and rec.m_definition == 1 and not rec.flags


def test_slope_radii_validation():
    with pytest.raises(ValueError):
        V.order_by_slope(V.synthetic_good_curve(2, 1), None, 0, [1e-4, 1e-2])
    with pytest.raises(ValueError):
        V.order_by_slope(V.synthetic_good_curve(2, 1), None, 0, [1e-2, 1e-4], log_correction="bogus")


S_GEN = np.array([[0, -1], [1, 0]])


def _word(ks):
    # T^k1 S T^k2 S ... is an arbitrary element of SL(2, Z)
    g = np.eye(2, dtype=int)
    for k in ks:
        g = g @ np.array([[1, k], [0, 1]]) @ S_GEN
    return g


@given(st.lists(st.integers(-3, 3), max_size=4), st.integers(1, 6), st.sampled_from([1, -1]))
@settings(max_examples=60)
def test_cusp_conjugator(ks, W, sign):
    g0 = _word(ks)
    g0i = np.array([[g0[1, 1], -g0[0, 1]], [-g0[1, 0], g0[0, 0]]])
    A = sign * (g0 @ np.array([[1, W], [0, 1]]) @ g0i)
    g, W_out, s = V.cusp_conjugator(A)
    gi = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    assert s == sign and W_out == W
    assert np.array_equal(g @ (sign * A) @ gi, np.array([[1, W], [0, 1]]))


def test_cusp_conjugator_rejects():
    with pytest.raises(ValueError):
        V.cusp_conjugator(np.eye(2, dtype=int))
    with pytest.raises(ValueError):
        V.cusp_conjugator(np.array([[2, 1], [1, 1]]))
    with pytest.raises(ValueError):
        V.cusp_conjugator(np.array([[1, -2], [0, 1]]))


def test_fixture_cusp_records(fixture):
    rec = V.cusp_multiplicity(fixture, None, 1.0)
    assert (rec.m_b, rec.m_definition, rec.r_b) == (2, 1, 1)
    assert any("differs" in f for f in rec.flags)
    rec = V.cusp_multiplicity(fixture, None, 2**-0.5)
    assert rec.m_b == 1
    rec = V.cusp_multiplicity(fixture, None, S.INF)
    assert rec.m_b == 1 and rec.r_b == 2


def test_fixture_ramified_point(fixture):
    rec = V.good_point_multiplicity(fixture, None, 0j, 2)
    assert rec.m_b == 1 and rec.r_b == 2 and not rec.flags


def test_fixture_has_no_zeros_on_coarse_grid(fixture):
    zeros, diags = V.find_zeros(fixture, None, V.GridConfig(n=16))
    assert zeros == []


def test_cusp_annulus_is_empty(fixture):
    assert V.cusp_annulus_count(fixture, 1.0, 0.005, 0.02) == 0


def test_torsion_test(fixture, torsion_spec):
    assert V.torsion_test(fixture) is False
    warn = []
    assert V.torsion_test(torsion_spec, warn=warn) is True
    assert warn == []


def test_zero_record_validation():
    with pytest.raises(ValueError):
        V.ZeroRecord(0.1, 0, 0.0, 0.0)
    with pytest.raises(ValueError):
        V.MultiplicityRecord(0.1, 0, 1, "good", "")
    with pytest.raises(ValueError):
        V.MultiplicityRecord(0.1, 1, 1, "weird", "")


@pytest.mark.parametrize("m", [1, 2, 3])
def test_cell_winding_counts_zero_order(m):
    curve = V.synthetic_good_curve(m, 1)
    assert V._cell_winding(curve, 0.013 + 0.021j, 0.1) == m - 1
    assert V._cell_winding(curve, 0.3 + 0.2j, 0.1) == 0
