"""Canonical heights as integrals of the pulled-back invariant form.

The density of sigma^* mu against dx dy in a chart is |U|^2 / Im(tau) with
U = dz/dt - beta2 dtau/dt.  It does not depend on the branch of the lift,
so pointwise principal lifts are enough away from the bad fibres.

Around each bad fibre we use a smooth cut-off chi.  On the inner disk
(chi = 1) the integral of mu = d(beta1 dbeta2) is a boundary term in the
cusp frame; the transition annulus and the rest of the sphere are smooth
integrands handled by tensor-product rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import periods as P
from . import surface as S
from . import uhp
from . import verticality as V

JACOBIAN_STEP = 1e-5
DENSITY_RTOL = 1e-5
MAX_DENOMINATOR = 120


class DensityMismatchError(RuntimeError):
    def __init__(self, t, analytic, jacobian):
        super().__init__(f"density mismatch at t={t}: analytic {analytic!r} vs jacobian {jacobian!r}")
        self.t, self.analytic, self.jacobian = t, analytic, jacobian


class HeightError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs for canonical_height.

    ``epsilon_sequence`` only drives the diagnostic trace (value with
    eps-disks removed); the value itself uses the exact disk terms.
    """

    epsilon_sequence: tuple = (0.05, 0.01, 0.002)
    panel_tol: float = 1e-9
    max_depth: int = 3
    n_psi: int = 128
    n_theta: int = 256
    n_annulus: int = 32
    n_loop: int = 128
    inner_fraction: float = 0.5
    max_denominator: int = MAX_DENOMINATOR

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon_sequence)
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon_sequence must be strictly decreasing")
        if eps and min(eps) < 1e-8:
            raise ValueError("epsilon values must be >= 1e-8")
        if self.panel_tol <= 0 or self.max_depth < 1:
            raise ValueError("panel_tol must be positive and max_depth >= 1")
        if not 0 < self.inner_fraction < 1:
            raise ValueError("inner_fraction must lie in (0, 1)")
        object.__setattr__(self, "epsilon_sequence", eps)


@dataclass(frozen=True)
class HeightReport:
    value: float
    error_estimate: float
    rational: tuple  # (p, q, residual)
    quadraticity: tuple = ()  # ((n, ratio), ...)
    eps_trace: tuple = ()  # ((eps, value without eps-disks), ...)
    diagnostics: tuple = field(default=())

    def __post_init__(self):
        if self.value < -self.error_estimate - 1e-12:
            raise ValueError(f"negative height {self.value} beyond error {self.error_estimate}")
        p, q, res = self.rational
        if not math.isclose(res, abs(self.value - p / q), rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError("rational residual inconsistent with value")


# --------------------------------------------------------------------------
# pointwise density


def density_arrays(spec: S.SurfaceSpec, t):
    """sigma^* mu / (dx dy) at points of the t-chart (vectorised, principal lifts)."""
    t = np.asarray(t, dtype=complex)
    shape = t.shape
    lam, dlam, F, dF, w1, w2, dw1, dw2 = S.principal_lift(spec, t.ravel())
    tau = w2 / w1
    dtau = (dw2 * w1 - w2 * dw1) / w1**2
    z = F / w1
    dz = (dF * w1 - F * dw1) / w1**2
    return np.reshape(uhp.mu_density_arrays(tau, z, dtau, dz), shape)


def jacobian_density(spec: S.SurfaceSpec, t, h: float = JACOBIAN_STEP) -> float:
    """det d(beta1, beta2)/d(Re t, Im t) by central differences on one local branch."""
    t = complex(t)
    step = h * max(1.0, abs(t))
    pts = np.array([t + step, t - step, t + 1j * step, t - 1j * step])
    lf = S.local_lift(spec, pts, t)
    b2 = np.imag(lf.z) / np.imag(lf.tau)
    b1 = np.real(lf.z) - b2 * np.real(lf.tau)
    jac = np.array([[b1[0] - b1[1], b1[2] - b1[3]], [b2[0] - b2[1], b2[2] - b2[3]]]) / (2 * step)
    return float(np.linalg.det(jac))


def sigma_mu_density(spec: S.SurfaceSpec, ctx=None, t=0j, check: bool = True, h: float = JACOBIAN_STEP) -> float:
    """Density of sigma^* mu at t, cross-checked against the Betti Jacobian.

    The density is branch independent, so ``ctx`` is accepted for interface
    symmetry with the other estimators but not needed.
    """
    a = float(density_arrays(spec, np.array([complex(t)]))[0])
    if not check:
        return a
    b = jacobian_density(spec, t, h)
    # torsion sections give 0 from both sides up to differencing noise
    scale = max(abs(a), abs(b))
    if scale > 1e-9 and abs(a - b) > DENSITY_RTOL * scale:
        raise DensityMismatchError(complex(t), a, b)
    return a


# --------------------------------------------------------------------------
# bad-fibre disks


@dataclass(frozen=True)
class CuspDisk:
    point: object  # complex or periods.INFINITY
    chart: S.SurfaceSpec  # spec in the local coordinate
    center: complex
    radius: float


def _smooth_step(s):
    """1 for s <= 0, 0 for s >= 1, C-infinity in between."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s < 1, np.exp(-1.0 / np.maximum(1 - s, 1e-300)), 0.0)
        b = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    return a / (a + b)


def cusp_disks(spec: S.SurfaceSpec, shrink: float = 0.8, cap: float = 0.5, cap_inf: float = 1.0) -> list:
    """One disk per bad fibre, with radius well inside the distance to the others."""
    bad = [b.t for b in S.bad_reduction_set(spec)]
    finite = [complex(b) for b in bad if b is not S.INF]
    out = []
    for c in finite:
        others = [abs(c - d) for d in finite if d != c]
        R = min([cap] + [shrink * d for d in others])
        out.append(CuspDisk(c, spec, c, R))
    if any(b is S.INF for b in bad):
        inv = [1 / abs(c) for c in finite if c != 0]
        R = min([cap_inf] + [shrink * d for d in inv])
        out.append(CuspDisk(S.INF, spec.inverted(), 0j, R))
    return out


def _chi(disk: CuspDisk, w, inner_fraction):
    r0 = inner_fraction * disk.radius
    return _smooth_step((np.abs(w) - r0) / (disk.radius - r0))


def _chi_on_t(disk: CuspDisk, t, inner_fraction):
    w = 1 / t if disk.point is S.INF else t - disk.center
    return _chi(disk, w, inner_fraction)


def loop_lift(chart: S.SurfaceSpec, center, rho, n, turns: int = 1):
    """(tau, z, A) continued around |w - center| = rho, n points per turn."""
    ts = center + rho * np.exp(2j * np.pi * np.arange(n * turns + 1) / n + 0.1j)
    lf = S.lift_along(chart, ts)
    M = P.monodromy_matrix(P.PeriodBasis(lf.w1[0], lf.w2[0]), P.PeriodBasis(lf.w1[-1], lf.w2[-1]))
    Mi = np.rint(M.real).astype(int)
    if np.max(np.abs(M - Mi)) > 1e-6:
        raise P.ContinuationError("loop monodromy is not integral")
    A = np.array([[Mi[1, 1], Mi[1, 0]], [Mi[0, 1], Mi[0, 0]]])
    return lf.tau, lf.z, A


def _loop_adaptive(chart, center, rho, n, turns, max_n=2**14):
    while True:
        try:
            return loop_lift(chart, center, rho, n, turns), n
        except P.ContinuationError:
            n *= 2
            if n > max_n:
                raise


def disk_integral(disk: CuspDisk, rho: float, n: int = 128):
    """Integral of sigma^* mu over the punctured disk |w| < rho around a bad fibre.

    Stokes on the cut annulus in the cusp frame (tau~ -> tau~ + W,
    z~ -> z~ + aW around the loop).  The inner boundary term tends to 0
    with the radius, so only the outer circle contributes.  Additive
    monodromy is handled by going round twice.  Returns (value, info).
    """
    turns = 1
    (tau, z, A), n_used = _loop_adaptive(disk.chart, disk.center, rho, n, 1)
    if np.trace(A) < 0:
        turns = 2
        (tau, z, A), n_used = _loop_adaptive(disk.chart, disk.center, rho, n_used, 2)
    g, W, sign = V.cusp_conjugator(A)
    j = g[1, 0] * tau + g[1, 1]
    tt = (g[0, 0] * tau + g[0, 1]) / j
    zt = z / j
    shift = zt[-1] - zt[0]
    q = shift.imag / tt[-1].imag
    if abs(q) > 1e-6:
        raise HeightError(f"z-monodromy has a tau component {q:.3g} at {disk.point}")
    a = (shift - q * tt[-1]).real / W
    b2 = np.imag(zt) / np.imag(tt)
    b1 = np.real(zt) - b2 * np.real(tt)
    N = len(tt) - 1
    th = 2 * np.pi * np.arange(N) / N
    per = b1[:-1] - (a - b2[:-1]) * W * th / (2 * np.pi)
    k = np.fft.fftfreq(N, 1 / N)
    db2 = np.real(np.fft.ifft(1j * k * np.fft.fft(b2[:-1])))
    val = 2 * np.pi * np.mean(per * db2 + W / (4 * np.pi) * (a - b2[:-1]) ** 2) / turns
    return float(val), dict(W=W, a=float(a), turns=turns, n=n_used, gamma=g.tolist())


def _annulus_integral(disk: CuspDisk, inner_fraction, n_r, n_theta):
    r0 = inner_fraction * disk.radius
    x, wts = np.polynomial.legendre.leggauss(n_r)
    r = r0 + (disk.radius - r0) * (x + 1) / 2
    wr = wts * (disk.radius - r0) / 2
    th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    R, TH = np.meshgrid(r, th)
    w = R * np.exp(1j * TH)
    f = density_arrays(disk.chart, disk.center + w)
    return float(np.sum(_chi(disk, w, inner_fraction) * f * R * wr[None, :]) * 2 * np.pi / n_theta)


def _sphere_integral(spec, disks, inner_fraction, n_psi, n_theta, panel=16):
    """Integral of (1 - sum chi) * density over the sphere, t = tan(psi/2) e^{i theta}."""
    n_pan = max(1, n_psi // panel)
    x, wts = np.polynomial.legendre.leggauss(panel)
    edges = np.linspace(0, np.pi, n_pan + 1)
    psi = np.concatenate([a + (b - a) * (x + 1) / 2 for a, b in zip(edges, edges[1:])])
    wpsi = np.concatenate([wts * (b - a) / 2 for a, b in zip(edges, edges[1:])])
    th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    PS, TH = np.meshgrid(psi, th)
    rho = np.tan(PS / 2)
    t = rho * np.exp(1j * TH)
    weight = np.ones_like(rho)
    for d in disks:
        weight = weight - _chi_on_t(d, t, inner_fraction)
    jac = rho * (1 + rho**2) / 2
    live = np.abs(weight) > 0
    f = np.zeros_like(rho)
    f[live] = density_arrays(spec, t[live])
    if not np.all(np.isfinite(f)):
        raise HeightError("non-finite density on the quadrature grid")
    return float(np.sum(weight * f * jac * wpsi[None, :]) * 2 * np.pi / n_theta)


def _height_pieces(spec, disks, q: QuadratureConfig, n_psi, n_theta, n_r):
    sphere = _sphere_integral(spec, disks, q.inner_fraction, n_psi, n_theta)
    ann = [_annulus_integral(d, q.inner_fraction, n_r, n_theta) for d in disks]
    return sphere, ann


def rational_approx(x: float, max_den: int = MAX_DENOMINATOR):
    """Best rational approximation with bounded denominator: (p, q, |x - p/q|)."""
    fr = Fraction(x).limit_denominator(max_den)
    return fr.numerator, fr.denominator, abs(x - fr.numerator / fr.denominator)


def _trace_fit(trace):
    """Fit I(eps) = I0 + c1/L + c2/L^2, L = log(1/eps); returns I0 or None."""
    if len(trace) < 3:
        return None
    eps = np.array([e for e, _ in trace])
    val = np.array([v for _, v in trace])
    L = np.log(1 / eps)
    X = np.column_stack([np.ones_like(L), 1 / L, 1 / L**2])
    coef, *_ = np.linalg.lstsq(X, val, rcond=None)
    return float(coef[0])


def canonical_height(spec: S.SurfaceSpec, ctx=None, q: QuadratureConfig = QuadratureConfig(), scalar_muls=()) -> HeightReport:
    """h(sigma) as the integral of sigma^* mu over the base minus the bad fibres."""
    disks = cusp_disks(spec)
    diags = []
    disk_vals = []
    for d in disks:
        r0 = q.inner_fraction * d.radius
        v1, info = disk_integral(d, r0, q.n_loop)
        v2, _ = disk_integral(d, r0, 2 * info["n"])
        disk_vals.append((v2, abs(v2 - v1)))
        diags.append(f"disk {d.point}: R={d.radius:.4g} W={info['W']} a={info['a']:.6g} turns={info['turns']} value={v2:.12g}")
    n_psi, n_theta, n_r = q.n_psi, q.n_theta, q.n_annulus
    prev, change = None, math.inf
    for depth in range(q.max_depth + 1):
        if depth:
            n_psi, n_theta, n_r = 2 * n_psi, 2 * n_theta, 2 * n_r
        sphere, ann = _height_pieces(spec, disks, q, n_psi, n_theta, n_r)
        cur = sphere + sum(ann)
        if prev is not None:
            change = abs(cur - prev)
            if change <= q.panel_tol * max(1.0, abs(cur)):
                break
        prev = cur
    else:
        diags.append(f"quadrature not converged to panel_tol after depth {q.max_depth}: last change {change:.3g}")
    quad_err = change
    value = cur + sum(v for v, _ in disk_vals)
    err = quad_err + sum(e for _, e in disk_vals)
    diags.append(f"smooth part {cur:.15g} (grid {n_psi}x{n_theta}), change on refinement {quad_err:.3g}")

    trace = []
    for eps in q.epsilon_sequence:
        removed = 0.0
        for d in disks:
            if eps < q.inner_fraction * d.radius:
                removed += disk_integral(d, eps, q.n_loop)[0]
            else:
                removed = None
                break
        if removed is not None:
            trace.append((eps, value - removed))
    fit = _trace_fit(trace)
    if fit is not None:
        diags.append(f"eps-trace extrapolation (1/log model) gives {fit:.6g}; disk-term value {value:.12g}")

    value_c = max(value, 0.0) if value > -err - 1e-12 else value
    p, qq, res = rational_approx(value_c, q.max_denominator)
    quad = []
    for n in scalar_muls:
        quad.append((int(n), quadraticity_check(spec, ctx, int(n), q, base=value_c)))
    return HeightReport(value_c, err, (p, qq, res), tuple(quad), tuple(trace), tuple(diags))


def quadraticity_check(spec: S.SurfaceSpec, ctx=None, n: int = 2, q: QuadratureConfig = QuadratureConfig(), base: float | None = None) -> float:
    """h(n sigma) / h(sigma) on the same quadrature grid."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if S.torsion_order_exact(spec) is not None:
        raise HeightError("torsion section: height ratio undefined")
    if base is None:
        base = canonical_height(spec, ctx, q).value
    multiple = S.section_multiple(spec, n)
    return canonical_height(multiple, None, q).value / base


def pointwise_quadraticity(spec: S.SurfaceSpec, n: int, t) -> np.ndarray:
    """density(n sigma) / (n^2 density(sigma)) at the given points."""
    multiple = S.section_multiple(spec, n)
    return density_arrays(multiple, t) / (n * n * density_arrays(spec, t))


# --------------------------------------------------------------------------
# fibre normalisation and the Neron identity


def fiber_haar_check(tau, n: int = 24) -> float:
    """Integral of mu over the fibre E_tau = C / (Z + Z tau)."""
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("Im(tau) must be positive")
    x, w = np.polynomial.legendre.leggauss(n)
    s = (x + 1) / 2
    w = w / 2
    S1, S2 = np.meshgrid(s, s)
    z = S1 + S2 * tau
    f = uhp.mu_density_arrays(np.full_like(z, tau), z, np.zeros_like(z), np.ones_like(z))
    return float(np.sum(f * tau.imag * np.outer(w, w)))


def neron_part(tau, z):
    """pi Im(tau) (beta2^2 - beta2 + 1/6): the non-pluriharmonic part of the Neron function."""
    b2 = np.imag(z) / np.imag(tau)
    return np.pi * np.imag(tau) * (b2 * b2 - b2 + 1.0 / 6.0)


NERON_DIRECTIONS = ((1, 0), (0, 1), (1, 1), (1, 1j), (2, -1), (0.5 - 1j, 1 + 0.25j))


def _levi(f, p, v, h):
    """v* (d dbar f) v by circle means on the complex line p + zeta v, Richardson to O(h^6)."""
    roots = np.exp(2j * np.pi * np.arange(8) / 8)
    f0 = f(*p)

    def level(hh):
        pts = [(p[0] + hh * r * v[0], p[1] + hh * r * v[1]) for r in roots]
        return (np.mean([f(*q) for q in pts]) - f0) / hh**2

    l1, l2, l3 = level(h), level(h / 2), level(h / 4)
    r1 = (4 * l2 - l1) / 3
    r2 = (4 * l3 - l2) / 3
    return (16 * r2 - r1) / 15


def neron_check(tau, z, extra=None, directions=NERON_DIRECTIONS, h: float | None = None) -> float:
    """max over directions of |(1/pi) Levi(H) - Levi(mu)| / (1 + |Levi(mu)|).

    H is the explicit part of the Neron function plus the optional test
    function ``extra(tau, z)``.
    """
    tau, z = complex(tau), complex(z)
    if tau.imag <= 0:
        raise ValueError("Im(tau) must be positive")
    h = 0.05 * min(1.0, tau.imag) if h is None else h
    if extra is None:
        f = neron_part
    else:
        def f(a, b):
            return neron_part(a, b) + extra(a, b)
    M = uhp.mu_matrix(uhp.FamilyPoint(tau, z))
    worst = 0.0
    for d in directions:
        v = np.array(d, dtype=complex)
        v = v / np.linalg.norm(v)
        num = _levi(f, (tau, z), v, h) / np.pi
        ref = float(np.real(np.conj(v) @ M @ v))
        worst = max(worst, abs(num - ref) / (1 + abs(ref)))
    return worst
