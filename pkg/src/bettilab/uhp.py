"""Closed-form geometry on H x C.

Everything here is a pure function of its arguments.  Points are plain
complex numbers wrapped in small frozen dataclasses; the vectorised helpers
at the bottom (``*_arrays``) take numpy arrays and are what the heavier
modules use internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

THETA_MIN_IM_TAU = 0.05


@dataclass(frozen=True)
class UhpPoint:
    tau: complex

    def __post_init__(self):
        if not complex(self.tau).imag > 0:
            raise ValueError(f"Im(tau) must be positive, got {self.tau!r}")


@dataclass(frozen=True)
class FamilyPoint:
    tau: complex
    z: complex

    def __post_init__(self):
        if not complex(self.tau).imag > 0:
            raise ValueError(f"Im(tau) must be positive, got {self.tau!r}")


@dataclass(frozen=True)
class BettiPair:
    b1: float
    b2: float

    def z(self, tau: complex) -> complex:
        return self.b1 + self.b2 * tau


@dataclass(frozen=True)
class GroupElement:
    """(a, b; c, d) in SL(2, R) together with a translation (alpha, beta)."""

    a: float
    b: float
    c: float
    d: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not math.isclose(det, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"determinant must be 1, got {det}")

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class TangentRay:
    base: FamilyPoint
    v_tau: complex
    v_z: complex

    def __post_init__(self):
        if self.v_tau == 0 and self.v_z == 0:
            raise ValueError("tangent ray needs a non-zero vector")


def act(g: GroupElement, p: FamilyPoint) -> FamilyPoint:
    j = g.c * p.tau + g.d
    tau = (g.a * p.tau + g.b) / j
    return FamilyPoint(tau, p.z / j + g.alpha + g.beta * tau)


def act_tangent(g: GroupElement, ray: TangentRay) -> TangentRay:
    """Push a tangent ray forward by the differential of ``act``."""
    p = ray.base
    j = g.c * p.tau + g.d
    v_tau = ray.v_tau / j**2
    v_z = ray.v_z / j + ray.v_tau * (g.beta - g.c * p.z) / j**2
    return TangentRay(act(g, p), v_tau, v_z)


def betti_from(p: FamilyPoint) -> BettiPair:
    b2 = p.z.imag / p.tau.imag
    return BettiPair(p.z.real - b2 * p.tau.real, b2)


def mu_potential(p: FamilyPoint) -> float:
    return p.z.imag**2 / p.tau.imag


def mu_matrix(p: FamilyPoint) -> np.ndarray:
    """Levi matrix of the invariant form in the basis (d/dtau, d/dz)."""
    b2 = betti_from(p).b2
    return np.array([[b2 * b2, -b2], [-b2, 1.0]]) / (2.0 * p.tau.imag)


def mu_norm2(p: FamilyPoint, v_tau: complex, v_z: complex) -> float:
    v = np.array([v_tau, v_z])
    return float(np.real(np.conj(v) @ mu_matrix(p) @ v))


def psi(ray: TangentRay) -> float:
    """Ratio of the mu-norm to the hyperbolic norm; +inf on vertical rays."""
    p = ray.base
    if ray.v_tau == 0:
        return math.inf
    num = abs(ray.v_z * p.tau.imag - ray.v_tau * p.z.imag) ** 2
    return num / (abs(ray.v_tau) ** 2 * p.tau.imag)


def omega_density(tau: complex) -> float:
    return 0.25 / tau.imag**2


def theta_truncation(tau: complex, z: complex, tail_bound: float) -> int:
    """Smallest N such that the terms with |n| > N sum to less than tail_bound."""
    y, w = tau.imag, abs(z.imag)
    n = 0
    while True:
        # magnitude bound for index n+1 and the ratio of consecutive bounds beyond it
        h = n + 1.5
        term = math.exp(-math.pi * y * h * h + 2 * math.pi * w * h)
        ratio = math.exp(-math.pi * y * (2 * h + 1) + 2 * math.pi * w)
        if ratio < 1 and 2 * term / (1 - ratio) < tail_bound:
            return n
        n += 1


def theta11(p: FamilyPoint, tail_bound: float = 1e-16) -> complex:
    if tail_bound <= 0:
        raise ValueError("tail_bound must be positive")
    if p.tau.imag < THETA_MIN_IM_TAU:
        raise ValueError(f"theta11 needs Im(tau) >= {THETA_MIN_IM_TAU}")
    n_max = theta_truncation(p.tau, p.z, tail_bound)
    n = np.arange(-n_max - 1, n_max + 1) + 0.5
    terms = np.exp(1j * np.pi * p.tau * n * n + 2j * np.pi * (p.z + 0.5) * n)
    return complex(np.sum(terms))


def jacobi_metric_h(p: FamilyPoint) -> float:
    return p.tau.imag**4 * math.exp(-16 * math.pi * p.z.imag**2 / p.tau.imag)


# vectorised forms used by the section machinery


def betti2_arrays(tau, z):
    return np.imag(z) / np.imag(tau)


def psi_arrays(tau, z, v_tau, v_z):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(v_z * np.imag(tau) - v_tau * np.imag(z)) ** 2 / (
            np.abs(v_tau) ** 2 * np.imag(tau)
        )
    return np.where(v_tau == 0, np.inf, out)


def mu_density_arrays(tau, z, v_tau, v_z):
    """Density of the pulled-back form against dx dy for a holomorphic curve.

    Equals twice the mu-norm of the velocity (i dt^dt-bar = 2 dx^dy).
    """
    b2 = betti2_arrays(tau, z)
    return np.abs(v_z - b2 * v_tau) ** 2 / np.imag(tau)


def betti_jacobian_det(tau_fn, z_fn, t, h: float = 1e-6):
    """det d(beta1, beta2)/d(Re t, Im t) for a map t -> (tau(t), z(t)), by central differences.

    Oracle for mu = d beta1 ^ d beta2: for holomorphic maps it should equal
    mu_density_arrays(tau, z, tau', z').
    """
    t = np.asarray(t, dtype=complex)
    step = h * np.maximum(1.0, np.abs(t))

    def betti(p):
        tau, z = tau_fn(p), z_fn(p)
        b2 = np.imag(z) / np.imag(tau)
        return np.real(z) - b2 * np.real(tau), b2

    bxp, byp = betti(t + step)
    bxm, bym = betti(t - step)
    cxp, cyp = betti(t + 1j * step)
    cxm, cym = betti(t - 1j * step)
    j11 = (bxp - bxm) / (2 * step)
    j12 = (cxp - cxm) / (2 * step)
    j21 = (byp - bym) / (2 * step)
    j22 = (cyp - cym) / (2 * step)
    return j11 * j22 - j12 * j21
