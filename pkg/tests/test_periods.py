import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bettilab import periods as P

mpmath = pytest.importorskip("mpmath")

# lambda away from the cuts and the punctures
lams = st.builds(complex, st.floats(-2, 3), st.floats(0.05, 2)).filter(lambda l: abs(l) > 0.05 and abs(l - 1) > 0.05)


def test_complete_integrals_frozen():
    # frozen from mpmath
    k, e = P.complete_ke(1.9 - 0.24j)
    assert abs(k - (1.3877628117763736 - 1.2001107160123667j)) < 1e-14
    assert abs(e - (0.7306118082561379 + 0.6018601058121423j)) < 1e-14


@given(lams)
@settings(max_examples=50, deadline=None)
def test_complete_integrals_against_mpmath(m):
    k, e = P.complete_ke(m)
    assert abs(k - complex(mpmath.ellipk(m))) <= 1e-12 * abs(k)
    assert abs(e - complex(mpmath.ellipe(m))) <= 1e-12 * max(abs(e), 1)


def test_complete_k_vectorised():
    m = np.array([0.1, 0.5 + 0.5j, -3 + 0.1j])
    assert np.allclose(P.complete_k(m), [complex(mpmath.ellipk(x)) for x in m], rtol=1e-13)


def test_lambda_validation():
    for bad in (0, 1, complex("nan")):
        with pytest.raises(ValueError):
            P.LegendreLambda(bad)
    with pytest.raises(ValueError):
        P.periods_agm(-1.0)  # on the cut


def test_tau_at_half_is_i():
    assert abs(P.periods_agm(0.5).tau - 1j) < 1e-14


@given(lams)
@settings(max_examples=20, deadline=None)
def test_agm_matches_contour_oracle(lam):
    ok, M, dev = P.same_lattice(P.periods_agm(lam), P.periods_oracle(lam)[0])
    assert ok and dev <= 1e-8
    assert abs(round(np.linalg.det(M))) == 1


def test_lambda_relation():
    # lambda(tau) = theta2^4 / theta3^4 with the nome exp(pi i tau)
    lam = 0.3 + 0.4j
    q = mpmath.exp(1j * mpmath.pi * P.periods_agm(lam).tau)
    back = complex((mpmath.jtheta(2, 0, q) / mpmath.jtheta(3, 0, q)) ** 4)
    assert abs(back - lam) < 1e-12


def test_dtau_dlam_matches_difference():
    lam, h = 0.3 + 0.2j, 1e-6
    d = (P.periods_agm(lam + h).tau - P.periods_agm(lam - h).tau) / (2 * h)
    assert abs(d - P.dtau_dlam(lam, P.periods_agm(lam).omega1)) < 1e-7


def test_principal_derivatives():
    lam, h = np.array([0.3 + 0.2j, 2 + 1j]), 1e-6
    w1, w2, dw1, dw2 = P.principal_data(lam)
    p1, p2, _, _ = P.principal_data(lam + h)
    m1, m2, _, _ = P.principal_data(lam - h)
    assert np.allclose((p1 - m1) / (2 * h), dw1, rtol=1e-7)
    assert np.allclose((p2 - m2) / (2 * h), dw2, rtol=1e-7)


@given(lams, st.builds(complex, st.floats(-2, 2), st.floats(-2, 2)))
@settings(max_examples=30, deadline=None)
def test_elliptic_log_against_quadrature(lam, x):
    if min(abs(x), abs(x - 1), abs(x - lam)) < 0.05:
        x = x + 0.3j
    y = np.sqrt(x * (x - 1) * (x - lam))
    pt = P.EllipticPoint(x, y)
    a = complex(P.elliptic_log_raw(x, y, lam)[0])
    b = P.elliptic_log_oracle(pt, lam)
    # the two may differ by a period along different paths
    basis = P.periods_agm(lam) if not (lam.imag == 0 and (lam.real < 0 or lam.real > 1)) else P.periods_oracle(lam)[0]
    u, v = P.lattice_coords(a - b, basis.omega1, basis.omega2)
    assert abs(u - round(u)) < 1e-8 and abs(v - round(v)) < 1e-8


def test_elliptic_log_is_additive():
    lam = 0.4 + 0.3j
    basis = P.periods_agm(lam)
    Pt = P.EllipticPoint(2.0, np.sqrt(2 * 1 * (2 - lam)))
    Qt = P.EllipticPoint(-1 + 0.5j, np.sqrt((-1 + 0.5j) * (-2 + 0.5j) * (-1 + 0.5j - lam)))
    R = P.add_points(Pt, Qt, lam)
    assert R.on_curve(lam)
    d = P.elliptic_log(R, lam, basis) - P.elliptic_log(Pt, lam, basis) - P.elliptic_log(Qt, lam, basis)
    u, v = P.lattice_coords(d, 1.0, basis.tau)
    assert abs(u - round(u)) < 1e-10 and abs(v - round(v)) < 1e-10


def test_elliptic_log_derivative():
    lam, h = 0.4 + 0.3j, 1e-6
    x = 2.0 + 0.1j
    y = np.sqrt(x * (x - 1) * (x - lam))
    _, dF = P.elliptic_log_raw(x, y, lam, with_derivative=True)
    yp = np.sqrt(x * (x - 1) * (x - lam - h))
    ym = np.sqrt(x * (x - 1) * (x - lam + h))
    yp = yp if abs(yp - y) < abs(yp + y) else -yp
    ym = ym if abs(ym - y) < abs(ym + y) else -ym
    fd = (P.elliptic_log_raw(x, yp, lam + h) - P.elliptic_log_raw(x, ym, lam - h)) / (2 * h)
    assert abs(fd[0] - dF[0]) < 1e-7


def test_group_law():
    lam = 0.5
    Pt = P.EllipticPoint(2.0, np.sqrt(2 * 1 * 1.5))
    assert P.scalar_mul(0, Pt, lam) is P.INFINITY
    assert P.add_points(Pt, P.negate(Pt), lam) is P.INFINITY
    three = P.scalar_mul(3, Pt, lam)
    other = P.add_points(P.add_points(Pt, Pt, lam), Pt, lam)
    assert abs(three.x - other.x) < 1e-10 and abs(three.y - other.y) < 1e-10
    # 2-torsion
    assert P.add_points(P.EllipticPoint(0, 0), P.EllipticPoint(0, 0), lam) is P.INFINITY


def test_reduce_gamma2():
    t = 1j
    for g in ((1, 2, 0, 1), (1, 0, 2, 1), (1, -2, 2, -3)):
        a, b, c, d = g
        moved = (a * t + b) / (c * t + d)
        assert abs(P.reduce_gamma2(moved) - 1j) < 1e-12


def test_monodromy_around_zero():
    # a small loop around lam = 0 acts by a transvection of trace 2
    ctx = P.root_context()
    ctx = P.periods_continued(ctx, 0.2)
    start = ctx.basis
    ctx = P.continue_along(ctx, P.circle_path(0, 0.2, 32))
    M = P.monodromy_matrix(start, ctx.basis)
    Mi = np.rint(M)
    assert np.max(np.abs(M - Mi)) < 1e-8
    assert round(np.linalg.det(Mi)) == 1 and round(np.trace(Mi)) == 2
    assert not np.array_equal(Mi, np.eye(2))


def test_monodromy_around_both_punctures_is_minus_identity_squared():
    # the loop around 0 and 1 is the loop around infinity: trace -2
    ctx = P.periods_continued(P.root_context(), 0.5 + 1.5j)
    start = ctx.basis
    ctx = P.continue_along(ctx, P.circle_path(0.5, 1.5, 96, start_angle=np.pi / 2))
    M = np.rint(P.monodromy_matrix(start, ctx.basis))
    assert round(np.trace(M)) == -2


def test_continuation_tracks_a_point():
    x0 = 2.0
    pt = P.EllipticPoint(x0, np.sqrt(x0 * (x0 - 1) * (x0 - 0.5)))
    ctx = P.root_context(pt)
    ctx = P.periods_continued(ctx, 0.5 + 0.3j)
    lam = 0.5 + 0.3j
    z = P.elliptic_log(ctx.point_at_end, lam, ctx.basis, near=ctx.log_at_end)
    assert abs(z - ctx.log_at_end) < 1e-10


def test_clearance_violation():
    with pytest.raises(P.ContinuationError):
        P.periods_continued(P.root_context(), -0.5)  # passes through 0


def test_match_basis_recovers_integers():
    w1, w2 = P.periods_agm(0.3 + 0.1j).omega1, P.periods_agm(0.3 + 0.1j).omega2
    c, resid = P.match_basis(2 * w1 + w2, w1 + w2, w1, w2)
    assert tuple(c) == (2, 1, 1, 1) and resid < 1e-12


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_nearest_representative(a, b):
    tau = 0.3 + 1.1j
    z = 0.1 + 0.2j
    moved = z + round(a) + round(b) * tau
    assert abs(P.nearest_representative(moved, z, tau) - z) < 1e-12
