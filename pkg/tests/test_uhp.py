import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bettilab import uhp

finite = st.floats(-3, 3, allow_nan=False)
im_part = st.floats(0.2, 3)


@st.composite
def group_elements(draw):
    a = draw(st.floats(0.2, 3)) * draw(st.sampled_from([-1, 1]))
    b, c = draw(finite), draw(finite)
    return uhp.GroupElement(a, b, c, (1 + b * c) / a, draw(finite), draw(finite))


@st.composite
def rays(draw):
    p = uhp.FamilyPoint(complex(draw(finite), draw(im_part)), complex(draw(finite), draw(finite)))
    v_tau = complex(draw(finite), draw(finite))
    if abs(v_tau) < 1e-2:
        v_tau = 1.0
    return uhp.TangentRay(p, v_tau, complex(draw(finite), draw(finite)))


def test_validation():
    with pytest.raises(ValueError):
        uhp.FamilyPoint(0.3 - 1j, 0)
    with pytest.raises(ValueError):
        uhp.UhpPoint(1.0)
    with pytest.raises(ValueError):
        uhp.GroupElement(1, 1, 1, 1)
    with pytest.raises(ValueError):
        uhp.TangentRay(uhp.FamilyPoint(1j, 0), 0, 0)
    with pytest.raises(ValueError):
        uhp.theta11(uhp.FamilyPoint(0.01j, 0))


def test_betti_roundtrip_example():
    p = uhp.FamilyPoint(0.3 + 1.7j, -0.4 + 0.9j)
    b = uhp.betti_from(p)
    assert abs(b.z(p.tau) - p.z) < 1e-15


@given(rays())
def test_betti_roundtrip(ray):
    p = ray.base
    assert abs(uhp.betti_from(p).z(p.tau) - p.z) <= 1e-12 * (1 + abs(p.z) + abs(p.tau))


@given(group_elements(), rays())
@settings(max_examples=200)
def test_psi_invariance(g, ray):
    a, b = uhp.psi(ray), uhp.psi(uhp.act_tangent(g, ray))
    assert abs(a - b) <= 1e-9 * max(a, 1e-12) + 1e-14


@given(group_elements(), rays())
def test_mu_norm_matches_psi(g, ray):
    # the mu-norm over the hyperbolic norm |v_tau|^2 / (2 Im^2) is psi
    p = ray.base
    hyp = abs(ray.v_tau) ** 2 / (2 * p.tau.imag**2)
    assert math.isclose(uhp.mu_norm2(p, ray.v_tau, ray.v_z) / hyp, uhp.psi(ray), rel_tol=1e-9, abs_tol=1e-12)


@given(rays())
def test_mu_matrix_semipositive_with_horizontal_kernel(ray):
    p = ray.base
    M = uhp.mu_matrix(p)
    assert np.min(np.linalg.eigvalsh(M)) >= -1e-12
    # kernel direction: z moves with constant Betti coordinates, v_z = b2 v_tau
    b2 = uhp.betti_from(p).b2
    assert abs(uhp.mu_norm2(p, 1.0, b2)) < 1e-12


def test_psi_vertical_is_infinite():
    p = uhp.FamilyPoint(1j, 0.2)
    assert uhp.psi(uhp.TangentRay(p, 0, 1)) == math.inf
    assert np.isinf(uhp.psi_arrays(np.array([1j]), np.array([0.2]), np.array([0j]), np.array([1.0]))[0])


@given(group_elements(), rays())
def test_mu_density_invariant_under_action(g, ray):
    # the action preserves mu, so the density of the pulled-back form along a line is unchanged
    p = ray.base
    q = uhp.act_tangent(g, ray)
    a = uhp.mu_density_arrays(p.tau, p.z, ray.v_tau, ray.v_z)
    b = uhp.mu_density_arrays(q.base.tau, q.base.z, q.v_tau, q.v_z)
    assert math.isclose(a, b, rel_tol=1e-8, abs_tol=1e-12)


def test_translation_action():
    g = uhp.GroupElement(1, 0, 0, 1, 0.5, -1.0)
    p = uhp.FamilyPoint(0.1 + 1.2j, 0.3j)
    q = uhp.act(g, p)
    assert q.tau == p.tau
    assert abs(q.z - (p.z + 0.5 - p.tau)) < 1e-15


def test_mu_jacobian_oracle_on_a_line():
    # straight line in (tau, z): density equals the Betti Jacobian
    def tau(t):
        return 1.5j + 0.3 * t

    def z(t):
        return 0.2 + (0.7 - 0.1j) * t

    t = np.array([0.1 + 0.2j, -0.3 + 0.05j])
    a = uhp.mu_density_arrays(tau(t), z(t), 0.3, 0.7 - 0.1j)
    b = uhp.betti_jacobian_det(tau, z, t)
    assert np.allclose(a, b, rtol=1e-7)


def test_theta_truncation_monotone():
    tau, z = 0.1 + 1.0j, 0.3 + 0.2j
    ns = [uhp.theta_truncation(tau, z, tb) for tb in (1e-4, 1e-8, 1e-12, 1e-16)]
    assert ns == sorted(ns)


def test_theta11_odd_and_quasiperiodic():
    tau, z = 0.2 + 0.9j, 0.31 - 0.12j
    f = lambda w: uhp.theta11(uhp.FamilyPoint(tau, w))
    assert abs(f(z) + f(-z)) < 1e-13
    assert abs(f(z + 1) + f(z)) < 1e-13
    # z -> z + tau multiplies by -exp(-pi i tau - 2 pi i z)
    assert abs(f(z + tau) + np.exp(-1j * np.pi * tau - 2j * np.pi * z) * f(z)) < 1e-12


def test_theta11_against_mpmath():
    mpmath = pytest.importorskip("mpmath")
    tau, z = 0.25 + 0.8j, 0.17 + 0.05j
    q = mpmath.exp(1j * mpmath.pi * tau)
    ref = complex(mpmath.jtheta(1, mpmath.pi * z, q))
    # theta11 here is -jtheta1 with the nome exp(pi i tau)
    assert abs(uhp.theta11(uhp.FamilyPoint(tau, z)) + ref) < 1e-13


def test_jacobi_metric_makes_theta16_periodic():
    # h |theta|^16 is a function on the torus
    tau, z = 0.3 + 1.2j, 0.1 + 0.4j

    def g(w):
        p = uhp.FamilyPoint(tau, w)
        return uhp.jacobi_metric_h(p) * abs(uhp.theta11(p)) ** 16

    assert math.isclose(g(z + tau), g(z), rel_tol=1e-10)
    assert math.isclose(g(z + 1), g(z), rel_tol=1e-12)


def test_omega_density():
    assert uhp.omega_density(2j) == 0.25 / 4
