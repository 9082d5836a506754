"""Verticality of a section, its zeros and Betti multiplicities.

Scalar conventions used throughout, for a local lift (tau(t), z(t)):

    U = dz/dt - beta2 * dtau/dt          (= 2i Im(tau) d(beta2)/dt)
    u = U / (dtau/dt) = z'(tau) - beta2  (= 2i Im(tau) d(beta2)/d(tau))
    psi = |u|^2 Im(tau)

u solves  du/d(taubar) = -i conj(u) / (2 Im tau)  and
v = du/dtau + u/(tau - taubar) = z''(tau) is holomorphic.  The Betti
multiplicity at a good point is 1 + ord U there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from . import periods as P
from . import surface as S
from . import uhp

FD_STEP = 1e-4
FD_STEP_NESTED = 1e-3


# --------------------------------------------------------------------------
# curves: sections of a surface, or synthetic local curves in H x C


class SectionCurve:
    """Lift of a section on a local branch fixed by a reference (w1, w2, z)."""

    def __init__(self, spec: S.SurfaceSpec):
        self.spec = spec

    def ref_at(self, t, ctx: S.SectionContext | None = None):
        if ctx is not None:
            c = S.transport(ctx, t) if abs(ctx.t - complex(t)) > 1e-12 else ctx
            return (c.w1, c.w2, c.z)
        _, _, F, _, p1, p2, _, _ = S.principal_lift(self.spec, complex(t))
        return (complex(p1[0]), complex(p2[0]), complex(F[0] / p1[0]))

    def lift(self, t, ref):
        lf = S.local_lift(self.spec, t, None, ref)
        return lf.tau, lf.z, lf.dtau, lf.dz

    def path(self, pts):
        """Lift along a closed or open polyline, continued point to point."""
        lf = S.lift_along(self.spec, pts)
        return lf.tau, lf.z, lf.dtau, lf.dz

    def pointwise(self, pts):
        """Principal lift at each point separately; fine for invariant quantities such as psi."""
        pts = np.asarray(pts, dtype=complex)
        lam, dlam, F, dF, w1, w2, dw1, dw2 = S.principal_lift(self.spec, pts.ravel())
        tau = w2 / w1
        dtau = (dw2 * w1 - w2 * dw1) / w1**2
        dz = (dF * w1 - F * dw1) / w1**2
        return tuple(np.reshape(a, pts.shape) for a in (tau, F / w1, dtau, dz))

    def loop(self, center, rho, n, ctx=None, start_angle=0.0):
        """Continue around |t - center| = rho; returns arrays and the monodromy matrix on tau."""
        start = center + rho * np.exp(1j * start_angle)
        if ctx is None:
            c = S.root_context(self.spec, start)
        else:
            c = S.transport(ctx, start)
        ts = center + rho * np.exp(1j * (start_angle + 2 * np.pi * np.arange(n + 1) / n))
        rows = []
        for k, t in enumerate(ts):
            if k:
                c = S.transport(c, t)
            lf = S.lift_matched(self.spec, t, c.w1, c.w2, pred_z=c.z)
            rows.append((lf.tau[0], lf.z[0], lf.dtau[0], lf.dz[0], c.w1, c.w2))
        arr = np.array(rows)
        M = P.monodromy_matrix(P.PeriodBasis(arr[0, 4], arr[0, 5]), P.PeriodBasis(arr[-1, 4], arr[-1, 5]))
        Mi = np.rint(M.real).astype(int)
        if np.max(np.abs(M - Mi)) > 1e-6:
            raise P.ContinuationError("loop monodromy is not integral")
        A = np.array([[Mi[1, 1], Mi[1, 0]], [Mi[0, 1], Mi[0, 0]]])
        return ts, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], A


class SyntheticCurve:
    """A holomorphic local curve given by closed-form callables of t.

    ``monodromy`` is the integer matrix acting on tau around t = center,
    used only by the cusp estimators.
    """

    def __init__(self, tau, z, dtau, dz, monodromy=None, center=0.0, label="synthetic"):
        self._tau, self._z, self._dtau, self._dz = tau, z, dtau, dz
        self.monodromy = np.eye(2, dtype=int) if monodromy is None else np.asarray(monodromy)
        self.center = center
        self.label = label

    def ref_at(self, t, ctx=None):
        return None

    def lift(self, t, ref=None):
        t = np.asarray(t, dtype=complex)
        return self._tau(t), self._z(t), self._dtau(t), self._dz(t)

    def path(self, pts):
        return self.lift(pts)

    def pointwise(self, pts):
        return self.lift(pts)

    def loop(self, center, rho, n, ctx=None, start_angle=0.0):
        ts = center + rho * np.exp(1j * (start_angle + 2 * np.pi * np.arange(n + 1) / n))
        tau, z, dtau, dz = self.lift(ts)
        return ts, tau, z, dtau, dz, self.monodromy


def as_curve(obj):
    if isinstance(obj, S.SurfaceSpec):
        return SectionCurve(obj)
    return obj


def synthetic_good_curve(m: int, r: int, b: float = 0.3, beta: float = 0.25, c: complex = 1.0):
    """tau = i + t^r, z = b + beta*tau + c t^m: Betti multiplicity m, ramification r."""

    def tau(t):
        return 1j + t**r

    def z(t):
        return b + beta * tau(t) + c * t**m

    def dtau(t):
        return r * t ** (r - 1) + 0 * t

    def dz(t):
        return beta * dtau(t) + c * m * t ** (m - 1)

    return SyntheticCurve(tau, z, dtau, dz, label=f"good m={m} r={r}")


def synthetic_cusp_curve(m: int, width: int = 2, a: float = 0.0, xi0: complex = 1.0, coeff: complex = 1.0):
    """A curve approaching a cusp: tau = (W/2 pi i) log t + i, X(t) = xi0 (1 + coeff t^m).

    z = a*tau + log(X)/(2 pi i).  With |xi0| = 1 the contact order is m;
    with |xi0| != 1 the point meets the singular fibre away from the circle.
    """
    W = width
    two_pi_i = 2j * np.pi

    def X(t):
        return xi0 * (1 + coeff * t**m)

    def dX(t):
        return xi0 * coeff * m * t ** (m - 1)

    def tau(t):
        return W * np.log(t) / two_pi_i + 1j

    def dtau(t):
        return W / (two_pi_i * t)

    def z(t):
        return a * tau(t) + np.log(X(t)) / two_pi_i

    def dz(t):
        return a * dtau(t) + dX(t) / (X(t) * two_pi_i)

    # continuous logs along loops: unwrap through the loop helper below
    curve = SyntheticCurve(tau, z, dtau, dz, monodromy=np.array([[1, W], [0, 1]]), label=f"cusp m={m}")

    def loop(center, rho, n, ctx=None, start_angle=0.0):
        ang = start_angle + 2 * np.pi * np.arange(n + 1) / n
        ts = center + rho * np.exp(1j * ang)
        logt = np.log(rho) + 1j * ang
        logX = np.log(X(ts))
        logX = logX.real + 1j * np.unwrap(logX.imag)
        tt = W * logt / two_pi_i + 1j
        zz = a * tt + logX / two_pi_i
        return ts, tt, zz, dtau(ts), dz(ts), curve.monodromy

    curve.loop = loop
    return curve


# --------------------------------------------------------------------------
# pointwise quantities


@dataclass(frozen=True)
class VerticalityValue:
    u: complex
    psi: float
    frame: tuple  # (tau, dtau_dt, dz_dt)
    ramified: bool = False

    def __post_init__(self):
        if not self.psi >= 0:
            raise ValueError("psi must be non-negative")


def _U(tau, z, dtau, dz):
    return dz - uhp.betti2_arrays(tau, z) * dtau


def _lift_at(curve, ctx, t):
    ref = curve.ref_at(t, ctx)
    return curve, ref


def psi_pullback(spec, ctx, t) -> VerticalityValue:
    curve = as_curve(spec)
    ref = curve.ref_at(t, ctx)
    tau, z, dtau, dz = (complex(np.ravel(a)[0]) for a in curve.lift(np.array([complex(t)]), ref))
    ray = uhp.TangentRay(uhp.FamilyPoint(tau, z), dtau, dz) if (dtau, dz) != (0, 0) else None
    ps = uhp.psi(ray) if ray is not None else math.inf
    ram = abs(dtau) < 1e-12 * max(1.0, abs(dz))
    u = complex("nan") if ram else dz / dtau - z.imag / tau.imag
    return VerticalityValue(u, ps, (tau, dtau, dz), ram)


def _u_grid(curve, ref, pts):
    tau, z, dtau, dz = curve.lift(pts, ref)
    return dz / dtau - np.imag(z) / np.imag(tau), tau, dtau


def _dbar_t(f, t, h):
    """d/d(tbar) and d/dt of f at t by Richardson-extrapolated central differences."""

    def once(hh):
        pts = np.array([t + hh, t - hh, t + 1j * hh, t - 1j * hh])
        v = f(pts)
        fx = (v[0] - v[1]) / (2 * hh)
        fy = (v[2] - v[3]) / (2 * hh)
        return 0.5 * (fx + 1j * fy), 0.5 * (fx - 1j * fy)

    b1, d1 = once(h)
    b2, d2 = once(h / 2)
    return (4 * b2 - b1) / 3, (4 * d2 - d1) / 3


def u_derivatives(spec, ctx, t, h: float | None = None):
    """(u, du/dtau, du/dtaubar, tau) at t; tau-derivatives via the chain rule from t."""
    curve = as_curve(spec)
    t = complex(t)
    ref = curve.ref_at(t, ctx)
    h = (FD_STEP if h is None else h) * max(1.0, abs(t))
    u0, tau0, dtau0 = (complex(a[0]) for a in _u_grid(curve, ref, np.array([t])))
    dbar, d = _dbar_t(lambda p: _u_grid(curve, ref, p)[0], t, h)
    # u is a function of tau through t(tau): d/dtau = (d/dt)/tau_t, d/dtaubar = (d/dtbar)/conj(tau_t)
    return u0, d / dtau0, dbar / np.conj(dtau0), tau0


def pde_residual(spec, ctx, t, h: float | None = None) -> float:
    u, _, du_bar, tau = u_derivatives(spec, ctx, t, h)
    return float(abs(du_bar + 1j * np.conj(u) / (2 * tau.imag)))


def pde_residual_closed_form(c: complex, tau: complex) -> float:
    """Residual for the constant lift z = c, all derivatives analytic."""
    u = -c.imag / tau.imag
    # d/dtaubar (1/Im tau) = -i / (2 Im^2 tau)
    du_bar = 1j * c.imag / (2 * tau.imag**2)
    return abs(du_bar + 1j * np.conj(u) / (2 * tau.imag))


def _v_grid(curve, ref, pts, h):
    out = []
    for p in np.ravel(pts):
        u0, tau0, dtau0 = (complex(a[0]) for a in _u_grid(curve, ref, np.array([p])))
        _, d = _dbar_t(lambda q: _u_grid(curve, ref, q)[0], p, h)
        out.append(d / dtau0 + u0 / (tau0 - np.conj(tau0)))
    return np.array(out)


def nabla_eta(spec, ctx, t, h: float | None = None):
    """(v, |dv/dtaubar|) with v = du/dtau + u/(tau - taubar)."""
    curve = as_curve(spec)
    t = complex(t)
    ref = curve.ref_at(t, ctx)
    scale = max(1.0, abs(t))
    h1 = (FD_STEP if h is None else h) * scale
    h2 = FD_STEP_NESTED * scale
    v0 = complex(_v_grid(curve, ref, [t], h1)[0])
    dtau0 = complex(_u_grid(curve, ref, np.array([t]))[2][0])
    dbar, _ = _dbar_t(lambda q: _v_grid(curve, ref, q, h1), t, h2)
    return v0, float(abs(dbar / np.conj(dtau0)))


def z_second_derivative(spec, ctx, t, h: float | None = None) -> complex:
    """z''(tau) from t-derivatives (closed-form reference for nabla_eta)."""
    curve = as_curve(spec)
    t = complex(t)
    ref = curve.ref_at(t, ctx)
    h = (FD_STEP if h is None else h) * max(1.0, abs(t))
    pts = np.array([t + h, t - h, t + h / 2, t - h / 2, t])
    tau, z, dtau, dz = curve.lift(pts, ref)
    d2tau = (4 * (dtau[2] - dtau[3]) / h - (dtau[0] - dtau[1]) / (2 * h)) / 3
    d2z = (4 * (dz[2] - dz[3]) / h - (dz[0] - dz[1]) / (2 * h)) / 3
    return complex((d2z * dtau[4] - dz[4] * d2tau) / dtau[4] ** 3)


def log_psi_laplacian_check(spec, ctx, t, h: float | None = None):
    """Relative residual of d_tau d_taubar log psi = omega - 2 Re(chi).

    omega = 1/(4 Im^2 tau), chi = -i v conj(u) / (2 Im(tau) u^2).
    Returns (residual, lhs, rhs).
    """
    curve = as_curve(spec)
    t = complex(t)
    ref = curve.ref_at(t, ctx)
    scale = max(1.0, abs(t))
    hh = FD_STEP_NESTED * scale

    def logpsi(pts):
        tau, z, dtau, dz = curve.lift(pts, ref)
        return np.log(uhp.psi_arrays(tau, z, dtau, dz))

    def lap(hx):
        pts = np.array([t + hx, t - hx, t + 1j * hx, t - 1j * hx, t])
        v = logpsi(pts)
        return (v[0] + v[1] + v[2] + v[3] - 4 * v[4]) / hx**2

    L = (4 * lap(hh / 2) - lap(hh)) / 3
    u, tau, dtau = (complex(a[0]) for a in _u_grid(curve, ref, np.array([t])))
    lhs = 0.25 * L.real / abs(dtau) ** 2
    v, _ = nabla_eta(spec, ctx, t, h)
    chi = -1j * v * np.conj(u) / (2 * tau.imag * u * u)
    rhs = uhp.omega_density(tau) - 2 * chi.real
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300), lhs, rhs


def log_psi_laplacian_closed_form(c: complex, tau: complex):
    """Both sides for the constant lift z = c (u = -Im c/Im tau, v = 0)."""
    lhs = 1 / (4 * tau.imag**2)  # d d-bar of -log Im tau
    rhs = uhp.omega_density(tau)
    return lhs, rhs


# --------------------------------------------------------------------------
# orders


def _circle(t_star, radius, n, start=0.5):
    return t_star + radius * np.exp(2j * np.pi * (np.arange(n) + start) / n)


def winding_of(f, t_star, radius, n_min=64, n_max=2**14):
    """Winding of a non-vanishing function around a circle, refining until jumps < pi/2."""
    n = n_min
    while True:
        vals = f(_circle(t_star, radius, n))
        steps = np.angle(np.roll(vals, -1) / vals)
        if np.max(np.abs(steps)) < np.pi / 2:
            return int(round(np.sum(steps) / (2 * np.pi))), n
        n *= 2
        if n > n_max:
            raise RuntimeError("phase unwrap ambiguous; circle passes too close to a zero")


def order_by_winding(spec, ctx, t_star, radius) -> int:
    """Winding of U around the circle (equals ord of u at unramified points)."""
    curve = as_curve(spec)
    ref = curve.ref_at(t_star, ctx)

    def f(pts):
        return _U(*curve.lift(pts, ref))

    return winding_of(f, t_star, radius)[0]


@dataclass(frozen=True)
class SlopeFit:
    exponent: float
    correction: str
    residual: float
    r2: float


def _mean_psi(curve, ref, t_star, r, n=64):
    # psi is invariant, so each point may sit on its own branch
    tau, z, dtau, dz = curve.pointwise(_circle(t_star, r, n))
    return float(np.mean(uhp.psi_arrays(tau, z, dtau, dz)))


def _fit(logr, y, corr):
    x = 2 * logr
    yc = y - corr
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, yc, rcond=None)
    res = yc - A @ coef
    ss = np.sum((yc - yc.mean()) ** 2)
    r2 = 1 - np.sum(res**2) / ss if ss > 0 else 1.0
    return coef[0], float(np.sqrt(np.mean(res**2))), float(r2)


def _fit_log_model(logr, y, sign):
    """Fit log psi = 2 e log r + c + sign * log(log(1/r) + b) with b free (b > -min log(1/r))."""
    L = -logr

    def resid(p):
        e, c, b = p
        return y - (2 * e * logr + c + sign * np.log(L + np.exp(b) - 0.999 * L.min()))

    best = None
    for b0 in (-2.0, 0.0, 2.0):
        sol = optimize.least_squares(resid, x0=[0.0, 0.0, b0])
        if best is None or sol.cost < best.cost:
            best = sol
    return best.x[0], float(np.sqrt(2 * best.cost / len(y)))


def order_by_slope(spec, ctx, t_star, radii, log_correction: str = "none", curve_ref=None) -> SlopeFit:
    """Exponent e in psi ~ |w|^(2e) (log|w|)^(+-1) from circle means.

    log_correction 'auto' tries none/plus/minus and keeps the best model.
    """
    curve = as_curve(spec)
    ref = curve.ref_at(t_star, ctx) if curve_ref is None else curve_ref
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be strictly decreasing")
    y = np.log([_mean_psi(curve, ref, t_star, r) for r in radii])
    logr = np.log(radii)
    corr = {"none": 0.0, "plus": np.log(-logr), "minus": -np.log(-logr)}
    if log_correction in corr:
        e, res, r2 = _fit(logr, y, corr[log_correction])
        return SlopeFit(float(e), log_correction, res, r2)
    if log_correction != "auto":
        raise ValueError(f"unknown log correction {log_correction!r}")
    fits = []
    for name in ("none", "plus", "minus"):
        e, res, r2 = _fit(logr, y, corr[name])
        fits.append(SlopeFit(float(e), name, res, r2))
    for name, sign in (("plus", 1.0), ("minus", -1.0)):
        e, res = _fit_log_model(logr, y, sign)
        fits.append(SlopeFit(float(e), name + "+shift", res, 1.0))
    return min(fits, key=lambda f: f.residual)


# --------------------------------------------------------------------------
# zeros


@dataclass(frozen=True)
class GridConfig:
    n: int = 40
    radius: float = 1.0
    exclusion: float = 1.5  # in cell widths around bad fibres
    refine_radius: float = 1e-3
    seed: int = 0


@dataclass(frozen=True)
class ZeroRecord:
    t_star: complex
    order_winding: int
    order_slope: float
    refined_residual: float
    chart: str = "t"

    def __post_init__(self):
        if self.order_winding < 1:
            raise ValueError("zero order must be positive")


def _cell_winding(curve, c, h, n=8):
    """Winding of U around a square cell, continued along its boundary."""
    for _ in range(7):
        x = np.linspace(-0.5, 0.5, n, endpoint=False)
        side = np.concatenate([c + h * (x - 0.5j), c + h * (0.5 + 1j * x), c + h * (-x + 0.5j), c + h * (-0.5 - 1j * x)])
        try:
            U = _U(*curve.path(np.append(side, side[0])))
        except P.ContinuationError:
            n *= 2
            continue
        steps = np.angle(U[1:] / U[:-1])
        if np.max(np.abs(steps)) < np.pi / 2:
            return int(round(np.sum(steps) / (2 * np.pi)))
        n *= 2
    raise RuntimeError(f"cell at {c} has an unresolved zero on its boundary")


def _density(curve, ref, pts):
    tau, z, dtau, dz = curve.lift(pts, ref)
    return uhp.mu_density_arrays(tau, z, dtau, dz)


def _refine_zero(curve, c0, h):
    ref = curve.ref_at(c0)

    def f(p):
        return float(_density(curve, ref, np.array([p[0] + 1j * p[1]]))[0])

    sol = optimize.minimize(f, [c0.real, c0.imag], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 4000, "initial_simplex": [[c0.real, c0.imag], [c0.real + h / 4, c0.imag], [c0.real, c0.imag + h / 4]]})
    return complex(sol.x[0], sol.x[1]), float(sol.fun)


def _chart_points(spec):
    """Finite bad fibres in the t-chart and in the s = 1/t chart."""
    bad = S.bad_reduction_set(spec)
    fin = [b.t for b in bad if b.t is not S.INF]
    inv = [1 / b.t for b in bad if b.t is not S.INF and b.t != 0]
    if any(b.t is S.INF for b in bad):
        inv.append(0j)
    return fin, inv


def find_zeros(spec, ctx=None, grid: GridConfig = GridConfig()):
    """Zeros of eta on P^1 minus bad fibres, by per-cell winding of U.

    Two charts: |t| <= 1 and |s| <= 1 with s = 1/t.  Returns (zeros, diagnostics).
    Disks of ``grid.exclusion`` cell widths around bad fibres are not scanned;
    ``cusp_annulus_count`` covers them.
    """
    spec_s = spec.inverted()
    fin, inv = _chart_points(spec)
    rng = np.random.default_rng(grid.seed)
    zeros, diags = [], []
    for chart, sp_, bad in (("t", spec, fin), ("s", spec_s, inv)):
        curve = SectionCurve(sp_)
        R = grid.radius
        h = 2 * R / grid.n
        # a seeded sub-cell shift keeps cell corners off special points such as t = 0
        off = complex(*rng.uniform(-0.25, 0.25, 2)) * h
        for i in range(-1, grid.n + 1):
            for j in range(-1, grid.n + 1):
                c = complex(-R + h * (i + 0.5), -R + h * (j + 0.5)) + off
                if abs(c) > R + h:
                    continue
                if bad and min(abs(c - b) for b in bad) < grid.exclusion * h:
                    continue
                w = _cell_winding(curve, c, h)
                if w == 0:
                    continue
                t0, resid = _refine_zero(curve, c, h)
                if abs(t0) > R:
                    diags.append(f"{chart}: zero at {t0} owned by other chart")
                    continue
                ref = curve.ref_at(t0)
                rad = min(grid.refine_radius * 10, 0.25 * h)
                ow = order_by_winding(sp_, None, t0, rad)
                fit = order_by_slope(sp_, None, t0, rad * np.geomspace(1, 1e-2, 6), "none", curve_ref=ref)
                rec_t = t0 if chart == "t" else (1 / t0 if t0 != 0 else S.INF)
                if any(abs(z.t_star - rec_t) < grid.refine_radius for z in zeros if z.t_star is not S.INF and rec_t is not S.INF):
                    diags.append(f"unresolved cluster near {rec_t}")
                    continue
                if ow >= 1:
                    zeros.append(ZeroRecord(rec_t, ow, fit.exponent, resid, chart))
                else:
                    diags.append(f"cell winding {w} at {c} refined to order {ow}")
    return zeros, diags


# --------------------------------------------------------------------------
# cusps


def _egcd(a, b):
    if b == 0:
        return (1, 0) if a >= 0 else (-1, 0)
    x, y = _egcd(b, a % b)
    return y, x - (a // b) * y


def cusp_conjugator(A):
    """gamma in SL(2,Z) with gamma A gamma^-1 = +-[[1, W], [0, 1]].  Returns (gamma, W, sign)."""
    A = np.asarray(A, dtype=int)
    sign = 1 if np.trace(A) > 0 else -1
    B = sign * A
    if abs(int(np.trace(B))) != 2 or (B == np.eye(2, dtype=int)).all():
        raise ValueError(f"monodromy {A.tolist()} is not parabolic")
    a, b, c, d = (int(v) for v in B.ravel())
    if c == 0:
        g = np.eye(2, dtype=int)
    else:
        x = Fraction(a - d, 2 * c)
        p, q = x.numerator, x.denominator
        u, v = _egcd(p, q)
        g = np.array([[u, v], [-q, p]], dtype=int)
    gi = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    Bt = g @ B @ gi
    W = int(Bt[0, 1])
    if W < 0:
        # a clockwise loop; conjugation in SL(2,Z) cannot flip the sign of W
        raise ValueError("negative cusp width; loop orientation reversed")
    return g, W, sign


@dataclass(frozen=True)
class CuspData:
    center: complex
    rho: float
    W: int
    a: float
    shift_q: float
    gamma: tuple
    xi0: complex
    coeffs: tuple  # Taylor coefficients of X(w), scaled
    U_winding: int
    unipotent: bool


def cusp_loop_data(curve, center, rho, n=256, ctx=None):
    ts, tau, z, dtau, dz, A = curve.loop(center, rho, n, ctx)
    g, W, sign = cusp_conjugator(A)
    j = g[1, 0] * tau + g[1, 1]
    tt = (g[0, 0] * tau + g[0, 1]) / j
    zt = z / j
    shift = zt[-1] - zt[0]
    if sign < 0:
        return None, dict(ts=ts, tau=tau, z=z, dtau=dtau, dz=dz, A=A)
    q = shift.imag / tt[-1].imag
    p = (shift - q * tt[-1]).real
    a = p / W
    X = np.exp(2j * np.pi * (zt - a * tt))[:-1]
    c = np.fft.fft(X) / len(X)
    Ut = _U(tau, z, dtau, dz)[:-1] / j[:-1]
    steps = np.angle(np.roll(Ut, -1) / Ut)
    uw = int(round(np.sum(steps) / (2 * np.pi))) if np.max(np.abs(steps)) < np.pi / 2 else None
    coeffs = tuple(complex(c[k] / rho**k) for k in range(0, 8))
    data = CuspData(complex(center), rho, W, float(a), float(q), tuple(map(tuple, g.tolist())), complex(c[0]), coeffs, uw, True)
    return data, dict(ts=ts, tau=tau, z=z, dtau=dtau, dz=dz, tt=tt, zt=zt, A=A, X=X)


@dataclass(frozen=True)
class MultiplicityRecord:
    point: object  # complex or periods.INFINITY
    m_b: int
    r_b: int
    kind: str  # good | cusp
    evidence: str
    m_definition: int | None = None
    flags: tuple = field(default=())

    def __post_init__(self):
        if self.m_b < 1:
            raise ValueError("multiplicity must be positive")
        if self.kind not in ("good", "cusp"):
            raise ValueError("kind must be good or cusp")


def _xi_order(d1: CuspData, d2: CuspData, tol=1e-7):
    """First Taylor index j >= 1 of X - X(0) that is consistently non-zero at two radii."""
    for k in range(1, len(d1.coeffs)):
        a1, a2 = d1.coeffs[k], d2.coeffs[k]
        big = max(abs(a1), abs(a2))
        scale = max(abs(d1.xi0), 1e-300)
        if big * min(d1.rho, d2.rho) ** k > tol * scale and abs(a1 - a2) < 1e-3 * big + 1e-12:
            return k
    return None


def cusp_multiplicity(spec, ctx, t_c, radii=(0.02, 0.005), slope_radii=None, circle_tol: float = 1e-4, r_b: int | None = None) -> MultiplicityRecord:
    """Betti multiplicity at a bad fibre.

    Two readings are computed: the contact order of the toroidal coordinate
    (m_definition) and 1 + the exponent of psi fitted with an automatically
    chosen log factor (m_b).  They agree unless |xi(0)| = 1, where the psi
    exponent is one larger; the census uses m_b.
    """
    if isinstance(spec, S.SurfaceSpec):
        if t_c is S.INF:
            curve, center = SectionCurve(spec.inverted()), 0j
        else:
            curve, center = SectionCurve(spec), complex(t_c)
        if r_b is None:
            r_b = S.ramification_index_at(spec, t_c)
    else:
        curve, center = spec, complex(t_c)
        r_b = 1 if r_b is None else r_b
    flags = []
    d1, _ = cusp_loop_data(curve, center, radii[0], ctx=None)
    d2, _ = cusp_loop_data(curve, center, radii[1], ctx=None)
    if d1 is None or d2 is None:
        return MultiplicityRecord(t_c, 1, r_b, "cusp", "additive monodromy (-1 times unipotent): indeterminate", None, ("indeterminate",))
    on_circle = abs(abs(d2.xi0) - 1) < circle_tol
    if abs(d2.shift_q) > 1e-6:
        flags.append(f"z-monodromy has a tau component {d2.shift_q:.3g}")
    if on_circle:
        j = _xi_order(d1, d2)
        if j is None:
            return MultiplicityRecord(t_c, 1, r_b, "cusp", "|xi(0)| = 1 but no Taylor order resolved", None, ("indeterminate",))
        m_def = j
    else:
        m_def = 1
    if slope_radii is None:
        slope_radii = np.geomspace(radii[1], radii[1] * 1e-4, 9)
    ref = curve.ref_at(center + slope_radii[0]) if isinstance(curve, SectionCurve) else None
    fit = order_by_slope(curve, None, center, slope_radii, "auto", curve_ref=ref)
    e = int(round(fit.exponent))
    if abs(fit.exponent - e) > 0.25:
        flags.append(f"psi exponent {fit.exponent:.3f} not near an integer")
    m_psi = 1 + e
    if m_psi != m_def:
        flags.append(f"xi-order reading {m_def} differs from psi-exponent reading {m_psi}")
    evidence = (
        f"W={d2.W} a={d2.a:.6g} |xi0|={abs(d2.xi0):.12g} xi_order={m_def if on_circle else '-'} "
        f"psi_exponent={fit.exponent:.4f} ({fit.correction}) U_winding={d2.U_winding}"
    )
    return MultiplicityRecord(t_c, max(m_psi, 1), r_b, "cusp", evidence, m_def, tuple(flags))


def good_point_multiplicity(spec, ctx, t_b, r_b: int, radius: float = 1e-3) -> MultiplicityRecord:
    """m_b at a good point: 1 + winding of U, cross-checked with the psi exponent (m - r)."""
    curve = as_curve(spec)
    ref = curve.ref_at(t_b + radius, ctx) if isinstance(curve, SectionCurve) else None
    w = winding_of(lambda p: _U(*curve.lift(p, ref)), t_b, radius)[0]
    fit = order_by_slope(curve, None, t_b, radius * np.geomspace(1, 1e-2, 6), "none", curve_ref=ref)
    m = 1 + w
    flags = []
    if abs(fit.exponent - (m - r_b)) > 0.25:
        flags.append(f"psi exponent {fit.exponent:.3f} disagrees with m - r = {m - r_b}")
    return MultiplicityRecord(t_b, m, r_b, "good", f"U_winding={w} psi_exponent={fit.exponent:.4f}", None, tuple(flags))


def cusp_annulus_count(spec, t_c, inner: float, outer: float) -> int:
    """Zeros of eta in inner < |w| < outer around a bad fibre (cusp-frame winding of U)."""
    if t_c is S.INF:
        curve, center = SectionCurve(spec.inverted()), 0j
    else:
        curve, center = SectionCurve(spec), complex(t_c)
    d_out, _ = cusp_loop_data(curve, center, outer, n=512)
    d_in, _ = cusp_loop_data(curve, center, inner, n=512)
    if d_out is None or d_in is None or d_out.U_winding is None or d_in.U_winding is None:
        raise RuntimeError("annulus winding unavailable")
    return d_out.U_winding - d_in.U_winding


# --------------------------------------------------------------------------
# torsion


def torsion_test(spec, ctx=None, grid: GridConfig = GridConfig(n=12), warn=None) -> bool:
    """True iff psi vanishes on a sample grid; cross-checked by exact multiplication."""
    rng = np.random.default_rng(grid.seed)
    fin, _ = _chart_points(spec)
    pts = []
    while len(pts) < grid.n:
        t = complex(*rng.uniform(-1.5, 1.5, 2))
        if all(abs(t - b) > 0.05 for b in fin):
            pts.append(t)
    pts = np.array(pts)
    lam, dlam, F, dF, p1, p2, dp1, dp2 = S.principal_lift(spec, pts)
    tau = p2 / p1
    dtau = (dp2 * p1 - p2 * dp1) / p1**2
    z = F / p1
    dz = (dF * p1 - F * dp1) / p1**2
    ps = uhp.psi_arrays(tau, z, dtau, dz)
    if not np.all(np.isfinite(ps)):
        if warn is not None:
            warn.append("torsion_test: non-finite psi on grid")
        return False
    scale = np.max(np.abs(dz) ** 2 * np.imag(tau) / np.maximum(np.abs(dtau) ** 2, 1e-300)) + 1.0
    sampled = bool(np.max(ps) < 1e-14 * scale)
    try:
        exact = S.torsion_order_exact(spec, 12) is not None
    except Exception:  # exact arithmetic is a cross-check only
        exact = None
    if exact is not None and exact != sampled and warn is not None:
        warn.append(f"torsion_test: sampled verdict {sampled} disagrees with exact search {exact}")
    return sampled
