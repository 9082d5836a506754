"""Periods, elliptic logarithms and continuation for y^2 = x(x-1)(x-lam).

Conventions
-----------
* principal periods (cut plane C minus (-inf,0] and [1,inf)):
  ``omega1 = 4 K(lam)``, ``omega2 = 4i K(1-lam)``, ``tau = omega2/omega1``.
* elliptic logarithm ``F(P) = int_inf^P dx/y``; the normalised log is
  ``z = F / omega1`` so the lattice of ``z`` is Z + Z tau.
* continued bases are always integral unimodular changes of the principal
  basis at the same lam; we recover the integers by rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate
from scipy.special import elliprd, elliprf

DEFAULT_CLEARANCE = 1e-3
MAX_SUBDIVISIONS = 2**20
BASE_LAMBDA = 0.5


class ContinuationError(RuntimeError):
    pass


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class LegendreLambda:
    value: complex

    def __post_init__(self):
        v = complex(self.value)
        if not np.isfinite(v) or v in (0, 1):
            raise ValueError(f"lambda must be finite and not 0 or 1, got {v}")


@dataclass(frozen=True)
class PeriodBasis:
    omega1: complex
    omega2: complex

    @property
    def tau(self) -> complex:
        return self.omega2 / self.omega1

    def __post_init__(self):
        if self.omega1 == 0:
            raise ValueError("degenerate period basis")
        if not (self.omega2 / self.omega1).imag > 0:
            raise ValueError("basis is not positively oriented")


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"


INFINITY = _Infinity()


@dataclass(frozen=True)
class EllipticPoint:
    x: complex
    y: complex

    def on_curve(self, lam: complex, rtol: float = 1e-10) -> bool:
        rhs = self.x * (self.x - 1) * (self.x - lam)
        scale = max(abs(self.y) ** 2, abs(rhs), 1.0)
        return abs(self.y**2 - rhs) <= rtol * scale


# --------------------------------------------------------------------------
# complete integrals


def _agm_ke(m):
    """K(m), E(m) by the complex AGM with the optimal sign choice."""
    m = np.asarray(m, dtype=complex)
    a = np.ones_like(m)
    b = np.sqrt(1 - m)
    csum = 0.5 * m  # 2^(n-1) c_n^2 with c_0^2 = m
    power = 0.5
    done = np.zeros(m.shape, dtype=bool)
    for _ in range(80):
        a_next = 0.5 * (a + b)
        b_next = np.sqrt(a * b)
        flip = np.real(b_next / a_next) < 0
        b_next = np.where(flip, -b_next, b_next)
        c_next = np.where(done, 0, 0.5 * (a - b))
        power *= 2
        csum = csum + power * c_next**2
        a = np.where(done, a, a_next)
        b = np.where(done, b, b_next)
        # once |c| < 1e-12 |a| the remaining terms are below 1e-24; iterating
        # further only feeds last-bit noise into c_n times 2^n
        done = done | (np.abs(c_next) <= 1e-12 * np.abs(a))
        if np.all(done):
            break
    K = np.pi / (2 * a)
    return K, K * (1 - csum)


def complete_k(m):
    return _agm_ke(m)[0]


def complete_ke(m):
    return _agm_ke(m)


def _check_principal(lam):
    lam = np.asarray(lam, dtype=complex)
    if np.any((lam == 0) | (lam == 1)):
        raise ValueError("lambda must avoid 0 and 1")
    on_cut = (np.imag(lam) == 0) & ((np.real(lam) < 0) | (np.real(lam) > 1))
    if np.any(on_cut):
        raise ValueError("lambda lies on a branch cut; use periods_continued")
    return lam


def principal_data(lam):
    """Principal periods and their lam-derivatives (vectorised).

    Returns ``(w1, w2, dw1, dw2)``.  Points exactly on the cuts get the
    boundary value from the side numpy's sqrt picks; callers that need
    continuity re-match the basis anyway.
    """
    lam = np.asarray(lam, dtype=complex)
    k, e = _agm_ke(lam)
    kp, ep = _agm_ke(1 - lam)
    w1 = 4 * k
    w2 = 4j * kp
    # dK/dm = (E - (1-m) K) / (2 m (1-m))
    dk = (e - (1 - lam) * k) / (2 * lam * (1 - lam))
    dkp = (ep - lam * kp) / (2 * lam * (1 - lam))
    return w1, w2, 4 * dk, -4j * dkp


def periods_agm(lam) -> PeriodBasis:
    lam = complex(LegendreLambda(lam).value)
    _check_principal(lam)
    w1, w2, _, _ = principal_data(lam)
    return PeriodBasis(complex(w1), complex(w2))


def dtau_dlam(lam, omega1):
    """Derivative of tau in any continued basis with first period omega1."""
    return -4j * np.pi / (lam * (1 - lam) * omega1**2)


def _segment_integral(f, tol):
    re = integrate.quad(lambda s: f(s).real, 0, np.pi, epsabs=tol, epsrel=tol, limit=500, full_output=1)
    im = integrate.quad(lambda s: f(s).imag, 0, np.pi, epsabs=tol, epsrel=tol, limit=500, full_output=1)
    err = math.hypot(re[1], im[1])
    if len(re) > 3 or len(im) > 3:
        raise OracleError("adaptive quadrature did not converge")
    return re[0] + 1j * im[0], err


def periods_oracle(lam, tol: float = 1e-12):
    """Periods by adaptive quadrature along the segments [0, lam] and [lam, 1].

    Substituting x = a + (b-a)(1-cos s)/2 removes the endpoint square-root
    singularities, leaving dx/y = ds / sqrt(c - x) up to a constant phase.
    Returns ``(PeriodBasis, error_estimate)``.
    """
    lam = complex(LegendreLambda(lam).value)

    def along_0_lam(s):
        x = lam * (1 - np.cos(s)) / 2
        return 1 / np.sqrt(1 - x)

    def along_lam_1(s):
        x = lam + (1 - lam) * (1 - np.cos(s)) / 2
        return 1 / np.sqrt(x)

    ia, ea = _segment_integral(along_0_lam, tol)
    ib, eb = _segment_integral(along_lam_1, tol)
    wa, wb = 2 * ia, -2j * ib
    err = 2 * math.hypot(ea, eb)
    if err > 1e-10 * max(abs(wa), abs(wb)):
        raise OracleError(f"oracle error estimate {err:.2e} above 1e-10")
    if (wb / wa).imag < 0:
        wb = -wb
    return PeriodBasis(wa, wb), err


# --------------------------------------------------------------------------
# lattice bookkeeping


def lattice_coords(w, w1, w2):
    """Real (x, y) with w = x*w1 + y*w2 (vectorised)."""
    tau = w2 / w1
    q = w / w1
    y = np.imag(q) / np.imag(tau)
    return np.real(q) - y * np.real(tau), y


def match_basis(ref_w1, ref_w2, p_w1, p_w2):
    """Integer change of the principal basis closest to a reference basis.

    Returns ``(coeffs, residual)`` where ``coeffs = (a, b, c, d)`` means
    ``w1 = a*p1 + b*p2`` and ``w2 = c*p1 + d*p2``; ``residual`` is the
    largest distance of the real coordinates from the rounded integers.
    """
    x1, y1 = lattice_coords(ref_w1, p_w1, p_w2)
    x2, y2 = lattice_coords(ref_w2, p_w1, p_w2)
    raw = np.stack([x1, y1, x2, y2])
    ints = np.rint(raw)
    resid = np.max(np.abs(raw - ints), axis=0)
    return ints, resid


def apply_coeffs(coeffs, v1, v2):
    a, b, c, d = coeffs
    return a * v1 + b * v2, c * v1 + d * v2


def nearest_representative(z, z_ref, tau):
    """z + m + n*tau closest to z_ref (vectorised)."""
    y = np.imag(z - z_ref) / np.imag(tau)
    n = np.rint(y)
    z = z - n * tau
    m = np.rint(np.real(z - z_ref))
    return z - m


def reduce_gamma2(tau: complex, max_iter: int = 1000) -> complex:
    """Move tau into {|Re| <= 1, |tau -+ 1/2| >= 1/2} by Gamma(2)."""
    for _ in range(max_iter):
        tau = tau - 2 * round(tau.real / 2)
        if abs(tau - 0.5) < 0.5:
            tau = tau / (1 - 2 * tau)
        elif abs(tau + 0.5) < 0.5:
            tau = tau / (1 + 2 * tau)
        else:
            return tau
    raise ContinuationError("Gamma(2) reduction did not terminate")


def same_lattice(b1: PeriodBasis, b2: PeriodBasis, tol: float = 1e-8):
    """Whether two bases span the same lattice; returns (bool, integer matrix, max deviation)."""
    x1, y1 = lattice_coords(b2.omega1, b1.omega1, b1.omega2)
    x2, y2 = lattice_coords(b2.omega2, b1.omega1, b1.omega2)
    raw = np.array([[x1, y1], [x2, y2]], dtype=float)
    ints = np.rint(raw)
    dev = float(np.max(np.abs(raw - ints)))
    det = round(np.linalg.det(ints))
    return dev <= tol and abs(det) == 1, ints.astype(int), dev


# --------------------------------------------------------------------------
# elliptic logarithm

_RAY_ANGLES = np.linspace(0, 2 * np.pi, 12, endpoint=False)


def _ray_choice(args):
    """Pick, per point, the ray angle keeping Carlson arguments off the cut."""
    # args: (3, N) complex; score = min angular distance of each arg from pi
    best_phi = np.zeros(args.shape[1])
    best_score = np.full(args.shape[1], -1.0)
    for phi in _RAY_ANGLES:
        rot = args * np.exp(-1j * phi)
        score = np.min(np.pi - np.abs(np.angle(rot)), axis=0)
        take = score > best_score + 1e-12
        best_phi = np.where(take, phi, best_phi)
        best_score = np.where(take, score, best_score)
    return best_phi


def elliptic_log_raw(x, y, lam, with_derivative: bool = False):
    """F = int_inf^P dx/y along a ray, unnormalised (vectorised).

    With ``with_derivative`` also returns dF/dlam at fixed x (same branch).
    """
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    lam = np.broadcast_to(np.asarray(lam, dtype=complex), x.shape)
    args = np.stack([x, x - 1, x - lam])
    phi = _ray_choice(args)
    rot = np.exp(-1j * phi)
    a = args * rot
    y_branch = np.exp(1.5j * phi) * np.sqrt(a[0]) * np.sqrt(a[1]) * np.sqrt(a[2])
    sign = np.where(np.abs(y - y_branch) <= np.abs(y + y_branch), 1.0, -1.0)
    ray = 2 * np.exp(-0.5j * phi) * elliprf(a[0], a[1], a[2])
    F = -sign * ray
    if not with_derivative:
        return F
    dF = -sign * np.exp(-1.5j * phi) * elliprd(a[0], a[1], a[2]) / 3
    return F, dF


def elliptic_log_oracle(P: EllipticPoint, lam, tol: float = 1e-12) -> complex:
    """int_inf^P dx/y by quadrature along the horizontal-or-rotated ray (unnormalised)."""
    lam = complex(lam)
    roots = np.array([0, 1, lam])
    phi = float(_ray_choice((P.x - roots)[:, None])[0])
    e = np.exp(1j * phi)

    def integrand(v):
        # x = X + e * v^2 / (1 - v)^2, v in [0, 1)
        if v >= 1:
            return 0j
        s = v * v / (1 - v) ** 2
        ds = 2 * v / (1 - v) ** 3
        prod = np.prod(np.sqrt((P.x - roots) / e + s))
        return ds / prod

    re = integrate.quad(lambda v: integrand(v).real, 0, 1, epsabs=tol, epsrel=tol, limit=500)
    im = integrate.quad(lambda v: integrand(v).imag, 0, 1, epsabs=tol, epsrel=tol, limit=500)
    val = (re[0] + 1j * im[0]) * e / e**1.5
    y_branch = e**1.5 * np.prod(np.sqrt((P.x - roots) / e))
    sign = 1.0 if abs(P.y - y_branch) <= abs(P.y + y_branch) else -1.0
    return -sign * val


def elliptic_log(P: EllipticPoint, lam, basis: PeriodBasis, near: complex | None = None) -> complex:
    """Normalised logarithm z with lattice Z + Z tau.

    ``near`` selects the lattice representative (e.g. the previous value on a
    continued path); otherwise the representative from the ray integral.
    """
    F = complex(elliptic_log_raw(P.x, P.y, lam)[0])
    z = F / basis.omega1
    if near is not None:
        z = complex(nearest_representative(z, near, basis.tau))
    return z


# --------------------------------------------------------------------------
# group law


def add_points(P, Q, lam):
    if P is INFINITY:
        return Q
    if Q is INFINITY:
        return P
    a = -(1 + lam)
    scale = max(1.0, abs(P.x), abs(Q.x))
    if abs(P.x - Q.x) <= 1e-13 * scale:
        if abs(P.y + Q.y) <= 1e-13 * max(1.0, abs(P.y)):
            return INFINITY
        slope = (3 * P.x**2 + 2 * a * P.x + lam) / (2 * P.y)
    else:
        slope = (Q.y - P.y) / (Q.x - P.x)
    x3 = slope**2 - a - P.x - Q.x
    y3 = -(P.y + slope * (x3 - P.x))
    return EllipticPoint(x3, y3)


def negate(P):
    return P if P is INFINITY else EllipticPoint(P.x, -P.y)


def scalar_mul(n: int, P, lam):
    if n < 0:
        return scalar_mul(-n, negate(P), lam)
    acc, base = INFINITY, P
    while n:
        if n & 1:
            acc = add_points(acc, base, lam)
        base = add_points(base, base, lam)
        n >>= 1
    return acc


# --------------------------------------------------------------------------
# continuation along lambda paths


@dataclass(frozen=True)
class BranchContext:
    path: tuple
    basis: PeriodBasis
    log_at_end: complex | None = None
    point_at_end: EllipticPoint | None = None
    clearance: float = DEFAULT_CLEARANCE
    history: tuple = field(default=(), repr=False)

    @property
    def tau(self) -> complex:
        return self.basis.tau


def root_context(point: EllipticPoint | None = None, clearance: float = DEFAULT_CLEARANCE) -> BranchContext:
    """Context at lam = 1/2 where tau = i; optionally tracking a point."""
    basis = periods_agm(BASE_LAMBDA)
    log = None
    if point is not None:
        if not point.on_curve(BASE_LAMBDA):
            raise ValueError("tracked point is not on the curve at lam = 1/2")
        log = elliptic_log(point, BASE_LAMBDA, basis)
    return BranchContext((complex(BASE_LAMBDA),), basis, log, point, clearance, (basis.tau,))


def _segment_clear(a, b, clearance):
    for c in (0.0, 1.0):
        d = b - a
        s = 0.0 if d == 0 else min(max(((c - a) * np.conj(d)).real / abs(d) ** 2, 0.0), 1.0)
        if abs(a + s * d - c) < clearance:
            return False
    return True


def _hyperbolic_distance(t1, t2):
    arg = 1 + abs(t1 - t2) ** 2 / (2 * t1.imag * t2.imag)
    return math.acosh(arg)


def _step(basis, log, point, lam, x_of_lam):
    w1, w2, _, _ = principal_data(lam)
    coeffs, resid = match_basis(basis.omega1, basis.omega2, w1, w2)
    n1, n2 = apply_coeffs(coeffs, w1, w2)
    new_basis = PeriodBasis(complex(n1), complex(n2))
    if abs(round(coeffs[0] * coeffs[3] - coeffs[1] * coeffs[2])) != 1:
        return None, None, None, float("inf")
    new_log, new_point = None, None
    if point is not None:
        x = x_of_lam(lam) if x_of_lam is not None else point.x
        y2 = x * (x - 1) * (x - lam)
        y = np.sqrt(y2)
        if abs(y - point.y) > abs(y + point.y):
            y = -y
        new_point = EllipticPoint(complex(x), complex(y))
        new_log = elliptic_log(new_point, lam, new_basis, near=log)
        # jump in z relative to the cell size
        cell = min(1.0, new_basis.tau.imag)
        if abs(new_log - log) > 0.25 * cell:
            return None, None, None, float("inf")
    return new_basis, new_log, new_point, float(np.max(resid))


def periods_continued(ctx: BranchContext, lam_next, x_of_lam=None, max_step: float = 0.05) -> BranchContext:
    """Continue basis (and tracked log) along the straight segment to lam_next.

    Steps are halved until integer matching is unambiguous (residual < 0.05)
    and tau moves less than 0.1 in hyperbolic distance.
    """
    lam_next = complex(lam_next)
    start = ctx.path[-1]
    if not _segment_clear(start, lam_next, ctx.clearance):
        raise ContinuationError(f"segment {start} -> {lam_next} violates clearance {ctx.clearance}")
    basis, log, point = ctx.basis, ctx.log_at_end, ctx.point_at_end
    taus = list(ctx.history)
    s, n_steps = 0.0, 0
    scale = max(min(abs(start), abs(start - 1), abs(lam_next), abs(lam_next - 1)), ctx.clearance)
    h = min(1.0, max_step * scale / max(abs(lam_next - start), 1e-300))
    while s < 1.0:
        h = min(h, 1.0 - s)
        lam = start + (s + h) * (lam_next - start)
        nb, nl, npnt, resid = _step(basis, log, point, lam, x_of_lam)
        if nb is None or resid > 0.05 or _hyperbolic_distance(basis.tau, nb.tau) > 0.1:
            h *= 0.5
            n_steps += 1
            if h < 1.0 / MAX_SUBDIVISIONS or n_steps > MAX_SUBDIVISIONS:
                raise ContinuationError("step subdivision did not converge")
            continue
        basis, log, point = nb, nl, npnt
        taus.append(basis.tau)
        s += h
        h *= 1.5
    return replace(ctx, path=ctx.path + (lam_next,), basis=basis, log_at_end=log, point_at_end=point, history=tuple(taus))


def continue_along(ctx: BranchContext, lams, x_of_lam=None) -> BranchContext:
    for lam in lams:
        ctx = periods_continued(ctx, lam, x_of_lam)
    return ctx


def monodromy_matrix(start: PeriodBasis, end: PeriodBasis) -> np.ndarray:
    """Integer matrix M with (w1_end, w2_end) = M (w1_start, w2_start)."""
    x1, y1 = lattice_coords(end.omega1, start.omega1, start.omega2)
    x2, y2 = lattice_coords(end.omega2, start.omega1, start.omega2)
    return np.array([[x1, y1], [x2, y2]])


def circle_path(center, radius, n=64, start_angle=0.0):
    ang = start_angle + 2 * np.pi * np.arange(1, n + 1) / n
    return center + radius * np.exp(1j * ang)
