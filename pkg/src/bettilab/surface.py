"""Elliptic surfaces over P^1 in Legendre form, given by lam = r(t) and a section.

Exact bookkeeping (on-curve check, bad fibres, ramification, degrees) runs in
sympy over QQ.  Numbers only appear when roots are isolated, and every root
carries a residual certificate.  The analytic side (``sigma_lift`` and
friends) turns t into (tau, z) on a tracked branch.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
import sympy as sp

from . import periods as P

T = sp.Symbol("t")
INF = P.INFINITY


class NotOnCurveError(ValueError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"section is not on the curve; residual numerator {residual}")


class RootFindingError(RuntimeError):
    pass


class SpecParseError(ValueError):
    def __init__(self, msg, line, col):
        self.msg, self.line, self.col = msg, line, col
        super().__init__(f"line {line}, column {col}: {msg}")


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _poly(coeffs) -> sp.Poly:
    """Poly in t from a constant-term-first coefficient list."""
    rev = [sp.Rational(c.numerator, c.denominator) for c in reversed([_frac(c) for c in coeffs])]
    return sp.Poly(rev or [0], T, domain="QQ")


def _coeffs(p: sp.Poly) -> tuple:
    out = [Fraction(int(c.p), int(c.q)) for c in reversed(p.all_coeffs())]
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class RationalMap:
    """num/den with coefficient lists, constant term first; stored in lowest terms."""

    numerator: tuple
    denominator: tuple = (Fraction(1),)

    def __post_init__(self):
        n, d = _poly(self.numerator), _poly(self.denominator)
        if d.is_zero:
            raise ValueError("zero denominator")
        g = sp.gcd(n, d)
        n, d = n.exquo(g), d.exquo(g)
        lc = d.LC()
        n, d = n.quo_ground(lc), d.quo_ground(lc)
        object.__setattr__(self, "numerator", _coeffs(n))
        object.__setattr__(self, "denominator", _coeffs(d))

    @classmethod
    def from_polys(cls, n: sp.Poly, d: sp.Poly) -> "RationalMap":
        return cls(_coeffs(n), _coeffs(d))

    @classmethod
    def from_expr(cls, expr) -> "RationalMap":
        n, d = sp.fraction(sp.cancel(sp.sympify(expr)))
        return cls.from_polys(sp.Poly(n, T, domain="QQ"), sp.Poly(d, T, domain="QQ"))

    @property
    def num(self) -> sp.Poly:
        return _poly(self.numerator)

    @property
    def den(self) -> sp.Poly:
        return _poly(self.denominator)

    @property
    def degree(self) -> int:
        n, d = self.num, self.den
        return max(0 if n.is_zero else n.degree(), d.degree())

    def expr(self):
        return self.num.as_expr() / self.den.as_expr()

    def _np(self):
        n = np.array([float(c) for c in reversed(self.numerator)], dtype=complex)
        d = np.array([float(c) for c in reversed(self.denominator)], dtype=complex)
        return n, d

    def __call__(self, t):
        n, d = self._np()
        return np.polyval(n, t) / np.polyval(d, t)

    def derivative_at(self, t):
        n, d = self._np()
        nv, dv = np.polyval(n, t), np.polyval(d, t)
        return (np.polyval(np.polyder(n), t) * dv - nv * np.polyval(np.polyder(d), t)) / dv**2 if len(n) > 1 or len(d) > 1 else 0 * t

    def inverted(self) -> "RationalMap":
        """The map s -> r(1/s)."""
        return RationalMap.from_expr(self.expr().subs(T, 1 / T))

    def is_constant(self) -> bool:
        return self.degree == 0


@dataclass(frozen=True)
class SurfaceSpec:
    r: RationalMap
    sec_x: RationalMap
    sec_y: RationalMap
    label: str = ""
    level: int = 2

    def __post_init__(self):
        if self.r.degree < 1:
            raise ValueError("classifying map must be non-constant")

    def inverted(self) -> "SurfaceSpec":
        return SurfaceSpec(self.r.inverted(), self.sec_x.inverted(), self.sec_y.inverted(), self.label + "@inf", self.level)

    def with_section(self, x: RationalMap, y: RationalMap, label: str | None = None) -> "SurfaceSpec":
        return replace(self, sec_x=x, sec_y=y, label=self.label if label is None else label)


@dataclass(frozen=True)
class RamificationRecord:
    t_b: object  # complex or INF
    r_b: int
    in_S: bool

    def __post_init__(self):
        if self.r_b < 1:
            raise ValueError("ramification index must be positive")


@dataclass(frozen=True)
class CuspChart:
    k: int
    n: int
    t_c: object = None

    def __post_init__(self):
        if not 0 <= self.n < self.k:
            raise ValueError("chart integer must satisfy 0 <= n < k")


@dataclass(frozen=True)
class BadPoint:
    t: object  # complex or INF
    multiplicity: int
    kind: str  # lambda=0 | lambda=1 | lambda=inf
    residual: float = 0.0


# --------------------------------------------------------------------------
# exact algebra


def fixture_spec() -> SurfaceSpec:
    """lam = 2 - 2t^2 with the section (2, 2t)."""
    return SurfaceSpec(
        RationalMap((2, 0, -2)), RationalMap((2,)), RationalMap((0, 2)), label="legendre-fixture"
    )


def validate_section(spec: SurfaceSpec) -> None:
    x, y, r = spec.sec_x.expr(), spec.sec_y.expr(), spec.r.expr()
    resid = sp.cancel(y**2 - x * (x - 1) * (x - r))
    num, _ = sp.fraction(resid)
    if num != 0:
        raise NotOnCurveError(sp.Poly(num, T, domain="QQ").as_expr())


def aberth(coeffs, tol: float = 1e-15, max_iter: int = 500):
    """All roots of a polynomial (highest degree first) by Aberth-Ehrlich iteration.

    Returns ``(roots, radii)``; each disk of the given radius around a root
    contains a true root (Newton inclusion radius n|p|/|p'|).
    """
    c = np.asarray(coeffs, dtype=complex)
    c = c / c[0]
    n = len(c) - 1
    if n < 1:
        return np.array([], dtype=complex), np.array([])
    dc = np.polyder(c)
    # initial points on a circle of radius from the Cauchy bound
    rad = 1 + np.max(np.abs(c[1:]))
    z = rad * 0.5 * np.exp(2j * np.pi * (np.arange(n) + 0.25) / n)
    for _ in range(max_iter):
        pz, dpz = np.polyval(c, z), np.polyval(dc, z)
        ratio = np.divide(pz, dpz, out=np.zeros_like(pz), where=dpz != 0)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1)
        s = np.sum(np.where(np.eye(n, dtype=bool), 0, 1 / diff), axis=1)
        step = ratio / (1 - ratio * s)
        z = z - step
        if np.all(np.abs(step) <= tol * np.maximum(1, np.abs(z))):
            break
    else:
        raise RootFindingError("Aberth iteration did not converge")
    pz, dpz = np.polyval(c, z), np.polyval(dc, z)
    radii = n * np.abs(pz) / np.maximum(np.abs(dpz), 1e-300)
    return z, radii


def _roots_of(p: sp.Poly):
    """Roots of an exact polynomial with multiplicities, via square-free parts."""
    if p.is_zero or p.degree() < 1:
        return []
    out = []
    for factor, mult in sp.sqf_list(p)[1]:
        coeffs = [complex(sp.N(c, 30)) for c in factor.all_coeffs()]
        roots, radii = aberth(coeffs)
        sep = np.min(np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots)) * 1e300) if len(roots) > 1 else np.inf
        if np.any(radii > 0.25 * sep):
            raise RootFindingError("root inclusion disks overlap")
        for z, rad in zip(roots, radii):
            out.append((_clean(z), mult, float(rad)))
    return out


def _clean(z: complex, eps: float = 1e-14) -> complex:
    re_, im_ = z.real, z.imag
    scale = max(1.0, abs(z))
    if abs(im_) < eps * scale:
        im_ = 0.0
    if abs(re_) < eps * scale:
        re_ = 0.0
    return complex(re_, im_)


def _order_at_infinity(n: sp.Poly, d: sp.Poly) -> int:
    """ord_{t=inf} of n/d (positive for a zero)."""
    if n.is_zero:
        return math.inf
    return d.degree() - n.degree()


def bad_reduction_set(spec: SurfaceSpec) -> list:
    n, d = spec.r.num, spec.r.den
    pts = []
    for poly, kind in ((n, "lambda=0"), (n - d, "lambda=1"), (d, "lambda=inf")):
        for z, mult, rad in _roots_of(poly):
            pts.append(BadPoint(z, mult, kind, rad))
    # value of r at infinity
    o = _order_at_infinity(n, d)
    if o > 0:
        pts.append(BadPoint(INF, o, "lambda=0"))
    elif o < 0:
        pts.append(BadPoint(INF, -o, "lambda=inf"))
    else:
        o1 = _order_at_infinity(n - d, d)
        if o1 > 0:
            pts.append(BadPoint(INF, o1, "lambda=1"))
    return pts


def _ramification_poly(r: RationalMap) -> sp.Poly:
    n, d = r.num, r.den
    return n.diff(T) * d - n * d.diff(T)


def ramification(spec: SurfaceSpec) -> list:
    """Points with index >= 2, plus infinity whatever its index.

    At a finite t the index is 1 + ord_t(n'd - nd'); this holds at poles too.
    Infinity is handled by the same rule after t -> 1/t.
    """
    n, d = spec.r.num, spec.r.den
    bad = n * (n - d) * d
    recs = []
    w = _ramification_poly(spec.r)
    if not w.is_zero:
        for factor, mult in sp.sqf_list(w)[1]:
            f_in = sp.gcd(factor, bad)
            f_out = factor.exquo(f_in)
            for part, in_s in ((f_in, True), (f_out, False)):
                for z, _, _ in _roots_of(part):
                    recs.append(RamificationRecord(z, 1 + mult, in_s))
    inv = spec.r.inverted()
    w_inf = _ramification_poly(inv)
    e_inf = 1 + _order_at_zero(w_inf)
    inf_in_s = any(b.t is INF for b in bad_reduction_set(spec))
    recs.append(RamificationRecord(INF, e_inf, inf_in_s))
    return recs


def _order_at_zero(p: sp.Poly) -> int:
    coeffs = list(reversed(p.all_coeffs()))
    for i, c in enumerate(coeffs):
        if c != 0:
            return i
    return math.inf


def ramification_degree(recs) -> int:
    """deg R_{f0} = sum over good points of (r_b - 1)."""
    return sum(rec.r_b - 1 for rec in recs if not rec.in_S)


def hurwitz_total(recs) -> int:
    return sum(rec.r_b - 1 for rec in recs)


def ramification_index_at(spec: SurfaceSpec, t) -> int:
    for rec in ramification(spec):
        if rec.t_b is INF and t is INF:
            return rec.r_b
        if rec.t_b is not INF and t is not INF and abs(rec.t_b - t) < 1e-9:
            return rec.r_b
    return 1


# --------------------------------------------------------------------------
# level bookkeeping


def _prime_divisors(k: int):
    ps, p = [], 2
    while p * p <= k:
        if k % p == 0:
            ps.append(p)
            while k % p == 0:
                k //= p
        p += 1
    if k > 1:
        ps.append(k)
    return ps


def nu_infinity(k: int) -> int:
    """Number of cusps of X(k); k = 2 is special-cased to 3."""
    if k < 2:
        raise ValueError("level must be at least 2")
    if k == 2:
        return 3
    val = Fraction(k * k, 2)
    for p in _prime_divisors(k):
        val *= 1 - Fraction(1, p * p)
    assert val.denominator == 1
    return int(val)


def modular_index(k: int) -> int:
    """Index of the image of Gamma(k) in PSL(2, Z)."""
    if k == 2:
        return 6
    val = Fraction(k**3, 2)
    for p in _prime_divisors(k):
        val *= 1 - Fraction(1, p * p)
    return int(val)


@dataclass(frozen=True)
class DegreeReport:
    d: int
    g_B: int
    S_reduced: int
    S_preimage: int
    deg_Rf0: int
    half_log_canonical_degree: Fraction
    hodge_degree: Fraction
    eq2_value: Fraction
    eq2_value_preimage: Fraction
    bound_rhs: Fraction
    bound_rhs_uu: Fraction
    hurwitz_ok: bool
    flags: tuple = field(default=())


def degree_report(spec: SurfaceSpec, k: int | None = None, genus_X: int = 0, g_B: int = 0) -> DegreeReport:
    k = spec.level if k is None else k
    d = spec.r.degree
    bad = bad_reduction_set(spec)
    s_red = len(bad)
    s_pre = sum(b.multiplicity for b in bad)
    recs = ramification(spec)
    deg_r = ramification_degree(recs)
    half = d * (Fraction(genus_X) - 1 + Fraction(nu_infinity(k), 2))
    # degree of the Hodge bundle pulled back: index/12 per sheet
    hodge = d * Fraction(modular_index(k), 12)
    eq2 = Fraction(2 * g_B - 2 + s_red + deg_r, 2)
    eq2_pre = Fraction(2 * g_B - 2 + s_pre + deg_r, 2)
    bound = 2 * g_B - 2 - half + s_red
    bound_uu = 2 * g_B - 2 - hodge + s_red
    flags = []
    if eq2 != eq2_pre:
        flags.append("eq2: reduced and preimage readings of |S| differ")
    if eq2.denominator != 1:
        flags.append("eq2: value is not an integer")
    if k == 2:
        flags.append("level 2: extrapolated")
    return DegreeReport(
        d, g_B, s_red, s_pre, deg_r, half, hodge, eq2, eq2_pre, bound, bound_uu,
        hurwitz_total(recs) == 2 * d - 2, tuple(flags),
    )


# --------------------------------------------------------------------------
# toroidal charts


def choose_chart_n(tau: complex, z: complex, k: int) -> int:
    """Chart integer minimising |Im(z - n tau / k)|, reduced mod k."""
    return int(round(k * z.imag / tau.imag)) % k


def toroidal_coords(tau, z, chart: CuspChart):
    k, n = chart.k, chart.n
    zeta = np.exp(2j * np.pi * (z - n * tau / k))
    xi = np.exp(2j * np.pi * ((n + 1) * tau / k - z))
    return xi, zeta


# --------------------------------------------------------------------------
# spec files

_FIELDS = ("level", "r.num", "r.den", "section.x.num", "section.x.den", "section.y.num", "section.y.den", "label")
_RAT = re.compile(r"^[+-]?\d+(/[+-]?\d+)?$")


def _parse_coeffs(raw: str, line: int, col: int):
    """Coefficient list from the text after '='; ``col`` is the 1-based column of raw[0]."""
    body = raw.rstrip()
    col += len(body) - len(body.lstrip())
    body = body.lstrip()
    if body.startswith("[") != body.endswith("]"):
        raise SpecParseError("unbalanced brackets", line, col)
    if body.startswith("["):
        body, col = body[1:-1], col + 1
    out = []
    pos = col
    for tok in body.split(","):
        c = pos + len(tok) - len(tok.lstrip())
        t = tok.strip().strip("\"'").replace(" ", "")
        if not t:
            raise SpecParseError("empty coefficient", line, c)
        if not _RAT.match(t):
            raise SpecParseError(f"bad coefficient {t!r}", line, c)
        if "/" in t and int(t.split("/")[1]) == 0:
            raise SpecParseError(f"zero denominator in {t!r}", line, c)
        out.append(Fraction(t))
        pos += len(tok) + 1
    return tuple(out)


def parse_spec_text(text: str) -> SurfaceSpec:
    vals = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line and ":" not in line:
            raise SpecParseError("expected 'key = value'", ln, 1)
        sep = "=" if "=" in line else ":"
        key, val = line.split(sep, 1)
        key = "".join(key.split())
        vcol = len(line.split(sep, 1)[0]) + 2  # 1-based column just after the separator
        if key not in _FIELDS:
            raise SpecParseError(f"unknown field {key!r}", ln, 1)
        if key in vals:
            raise SpecParseError(f"duplicate field {key!r}", ln, 1)
        if key == "label":
            vals[key] = val.strip().strip("\"'")
        elif key == "level":
            v = val.strip()
            if not v.isdigit():
                raise SpecParseError(f"bad level {v!r}", ln, vcol)
            vals[key] = int(v)
        else:
            vals[key] = _parse_coeffs(val, ln, vcol)
    for key in ("r.num", "section.x.num", "section.y.num"):
        if key not in vals:
            raise SpecParseError(f"missing field {key!r}", len(text.splitlines()) + 1, 1)
    one = (Fraction(1),)
    spec = SurfaceSpec(
        RationalMap(vals["r.num"], vals.get("r.den", one)),
        RationalMap(vals["section.x.num"], vals.get("section.x.den", one)),
        RationalMap(vals["section.y.num"], vals.get("section.y.den", one)),
        label=vals.get("label", ""),
        level=vals.get("level", 2),
    )
    return spec


def format_spec(spec: SurfaceSpec) -> str:
    def fmt(cs):
        return ", ".join(str(c) for c in cs)

    return "\n".join([
        f"label = {spec.label}",
        f"level = {spec.level}",
        f"r.num = [{fmt(spec.r.numerator)}]",
        f"r.den = [{fmt(spec.r.denominator)}]",
        f"section.x.num = [{fmt(spec.sec_x.numerator)}]",
        f"section.x.den = [{fmt(spec.sec_x.denominator)}]",
        f"section.y.num = [{fmt(spec.sec_y.numerator)}]",
        f"section.y.den = [{fmt(spec.sec_y.denominator)}]",
    ]) + "\n"


# --------------------------------------------------------------------------
# section arithmetic (exact)


_QT = sp.QQ.frac_field(T)


def _to_field(m: RationalMap):
    return _QT.from_sympy(m.expr())


def _from_field(f) -> RationalMap:
    return RationalMap.from_expr(_QT.to_sympy(f))


def _chord_tangent(lam, p, q):
    """p + q on y^2 = x(x-1)(x-lam) over Q(t); points are (x, y) pairs or None."""
    if p is None:
        return q
    if q is None:
        return p
    (x1, y1), (x2, y2) = p, q
    a2 = -(1 + lam)
    if x1 == x2:
        if y1 == -y2:
            return None
        m = (3 * x1**2 + 2 * a2 * x1 + lam) / (2 * y1)
    else:
        m = (y2 - y1) / (x2 - x1)
    x3 = m**2 - a2 - x1 - x2
    return (x3, -(y1 + m * (x3 - x1)))


def section_multiple(spec: SurfaceSpec, n: int) -> SurfaceSpec:
    """n * sigma by the chord-tangent law over Q(t); torsion collapse raises."""
    lam = _to_field(spec.r)
    x0, y0 = _to_field(spec.sec_x), _to_field(spec.sec_y)
    base = (x0, -y0) if n < 0 else (x0, y0)
    n = abs(n)
    acc = None
    while n:
        if n & 1:
            acc = _chord_tangent(lam, acc, base)
        base = _chord_tangent(lam, base, base) if base is not None else None
        n >>= 1
    if acc is None:
        raise ValueError("multiple is the zero section")
    return spec.with_section(_from_field(acc[0]), _from_field(acc[1]), f"{spec.label}*")


def torsion_order_exact(spec: SurfaceSpec, max_order: int = 12):
    """Smallest n <= max_order with n*sigma = O over Q(t), else None."""
    lam = _to_field(spec.r)
    base = (_to_field(spec.sec_x), _to_field(spec.sec_y))
    acc = base
    for n in range(2, max_order + 1):
        acc = _chord_tangent(lam, acc, base)
        if acc is None:
            return n
    return None


# --------------------------------------------------------------------------
# lifting to H x C


@dataclass(frozen=True)
class Lift:
    tau: np.ndarray
    z: np.ndarray
    dtau: np.ndarray
    dz: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


def _section_values(spec: SurfaceSpec, t):
    lam = spec.r(t)
    dlam = spec.r.derivative_at(t)
    x = spec.sec_x(t)
    dx = spec.sec_x.derivative_at(t) * np.ones_like(t)
    y = spec.sec_y(t)
    return lam, dlam, x, dx, y


def principal_lift(spec: SurfaceSpec, t):
    """(tau, z, dtau, dz, w1, w2, dw1, dw2) on the principal period branch.

    z is F/omega1 for the ray integral F; this is a legitimate branch at each
    point, but neighbouring points may sit on different lattice representatives.
    """
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    lam, dlam, x, dx, y = _section_values(spec, t)
    w1, w2, d1, d2 = P.principal_data(lam)
    F, dF_lam = P.elliptic_log_raw(x, y, lam, with_derivative=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        fx = np.where(dx == 0, 0, dx / y)
    dF = fx + dlam * dF_lam
    return lam, dlam, F, dF, w1, w2, d1 * dlam, d2 * dlam


def lift_matched(spec: SurfaceSpec, t, ref_w1, ref_w2, ref_z=None, pred_z=None) -> Lift:
    """Lift on the branch whose periods are nearest (ref_w1, ref_w2) (vectorised).

    ``pred_z`` (or ``ref_z``) picks the lattice representative for z.
    """
    lam, dlam, F, dF, p1, p2, dp1, dp2 = principal_lift(spec, t)
    coeffs, _ = P.match_basis(ref_w1, ref_w2, p1, p2)
    w1, w2 = P.apply_coeffs(coeffs, p1, p2)
    dw1, dw2 = P.apply_coeffs(coeffs, dp1, dp2)
    tau = w2 / w1
    dtau = (dw2 * w1 - w2 * dw1) / w1**2
    z0 = F / w1
    dz0 = (dF * w1 - F * dw1) / w1**2
    target = pred_z if pred_z is not None else ref_z
    if target is None:
        z, dz = z0, dz0
    else:
        z = P.nearest_representative(z0, target, tau)
        n2 = np.rint(np.imag(z - z0) / np.imag(tau))
        dz = dz0 + n2 * dtau
    return Lift(tau, z, dtau, dz, w1, w2)


def basis_coeff_residual(spec, t, ref_w1, ref_w2):
    lam = spec.r(np.atleast_1d(np.asarray(t, dtype=complex)))
    p1, p2, _, _ = P.principal_data(lam)
    return P.match_basis(ref_w1, ref_w2, p1, p2)[1]


@dataclass(frozen=True)
class SectionContext:
    """A BranchContext for a section: base point t, basis and log there."""

    spec: SurfaceSpec
    t: complex
    w1: complex
    w2: complex
    z: complex
    path: tuple = ()

    @property
    def tau(self) -> complex:
        return self.w2 / self.w1

    def as_branch_context(self) -> P.BranchContext:
        lam = complex(self.spec.r(self.t))
        pt = P.EllipticPoint(complex(self.spec.sec_x(self.t)), complex(self.spec.sec_y(self.t)))
        return P.BranchContext(tuple(complex(self.spec.r(s)) for s in self.path) or (lam,), P.PeriodBasis(self.w1, self.w2), self.z, pt)


def root_context(spec: SurfaceSpec, t0=None) -> SectionContext:
    """Principal-branch context at a base point, preferring r(t0) = 1/2."""
    if t0 is None:
        cands = [z for z, _, _ in _roots_of(spec.r.num - spec.r.den * sp.Rational(1, 2))]
        cands.sort(key=lambda z: (abs(z.imag), -z.real))
        t0 = None
        for c in cands:
            y = complex(spec.sec_y(c))
            if np.isfinite(y) and abs(y) > 1e-8 and abs(complex(spec.r.derivative_at(c))) > 1e-8:
                t0 = c
                break
        if t0 is None:
            t0 = 0.123 + 0.456j
    t0 = complex(t0)
    _, _, F, _, p1, p2, _, _ = principal_lift(spec, t0)
    return SectionContext(spec, t0, complex(p1[0]), complex(p2[0]), complex(F[0] / p1[0]), (t0,))


def _hyp(t1, t2):
    return math.acosh(1 + abs(t1 - t2) ** 2 / (2 * t1.imag * t2.imag))


def transport(ctx: SectionContext, t_next, max_step: float = 0.05, max_halvings: int = 40) -> SectionContext:
    """Continue along the straight segment ctx.t -> t_next, subdividing as needed."""
    spec = ctx.spec
    t_next = complex(t_next)
    cur = ctx
    start = ctx.t
    length = abs(t_next - start)
    if length == 0:
        return ctx
    s = 0.0
    h = min(1.0, max_step / length)
    lift_prev = lift_matched(spec, cur.t, cur.w1, cur.w2, pred_z=cur.z)
    halvings = 0
    while s < 1.0 - 1e-15:
        h = min(h, 1.0 - s)
        tn = start + (s + h) * (t_next - start)
        dt = tn - cur.t
        pred = cur.z + lift_prev.dz[0] * dt
        resid = basis_coeff_residual(spec, tn, cur.w1, cur.w2)[0]
        ok = resid < 0.05
        if ok:
            lf = lift_matched(spec, tn, cur.w1, cur.w2, pred_z=pred)
            tau_n = complex(lf.tau[0])
            cell = min(1.0, tau_n.imag)
            ok = _hyp(cur.tau, tau_n) < 0.1 and abs(complex(lf.z[0]) - pred) < 0.05 * cell
        if not ok:
            h *= 0.5
            halvings += 1
            if halvings > max_halvings:
                raise P.ContinuationError(f"continuation stalled near t = {tn}")
            continue
        cur = SectionContext(spec, tn, complex(lf.w1[0]), complex(lf.w2[0]), complex(lf.z[0]), cur.path)
        lift_prev = lf
        s += h
        h *= 1.5
        halvings = 0
    return replace(cur, t=t_next, path=ctx.path + (t_next,))


def transport_path(ctx: SectionContext, pts) -> SectionContext:
    for p in pts:
        ctx = transport(ctx, p)
    return ctx


def sigma_lift(spec: SurfaceSpec, ctx: SectionContext, t):
    """(tau, z, dtau/dt, dz/dt) at t on the branch of ctx (transported to t if needed)."""
    t = complex(t)
    if abs(ctx.t - t) > 1e-12:
        ctx = transport(ctx, t)
    lf = lift_matched(spec, t, ctx.w1, ctx.w2, pred_z=ctx.z)
    return complex(lf.tau[0]), complex(lf.z[0]), complex(lf.dtau[0]), complex(lf.dz[0])


def sigma_lift_fd(spec: SurfaceSpec, ctx: SectionContext, t, h: float = 1e-5):
    """Same as sigma_lift but derivatives by central differences (cross-check)."""
    t = complex(t)
    step = h * max(1.0, abs(t))
    tau, z, _, _ = sigma_lift(spec, ctx, t)
    lf = lift_matched(spec, np.array([t + step, t - step]), ctx.w1 if abs(ctx.t - t) < 1e-12 else transport(ctx, t).w1,
                      ctx.w2 if abs(ctx.t - t) < 1e-12 else transport(ctx, t).w2, pred_z=z)
    dtau = (lf.tau[0] - lf.tau[1]) / (2 * step)
    dz = (lf.z[0] - lf.z[1]) / (2 * step)
    return tau, z, complex(dtau), complex(dz)


def local_lift(spec: SurfaceSpec, t, t_ref, ref: tuple | None = None) -> Lift:
    """Vectorised lift on one local branch around t_ref.

    The branch is the principal one at t_ref unless ``ref`` = (w1, w2, z)
    is supplied.  Valid while all t stay well inside a disk around t_ref
    that avoids bad fibres.
    """
    if ref is None:
        _, _, F, _, p1, p2, _, _ = principal_lift(spec, t_ref)
        ref = (complex(p1[0]), complex(p2[0]), complex(F[0] / p1[0]))
    w1, w2, z = ref
    t = np.asarray(t, dtype=complex)
    shape = t.shape
    lf = lift_matched(spec, t.ravel(), w1, w2, ref_z=z)
    return Lift(*(np.reshape(a, shape) for a in (lf.tau, lf.z, lf.dtau, lf.dz, lf.w1, lf.w2)))


def lift_along(spec: SurfaceSpec, ts, start: tuple | None = None, max_resid: float = 0.05) -> Lift:
    """Lift along a finely sampled path, each basis matched to the previous one.

    Principal data comes from one vectorised call; only the matching is
    sequential.  ``start`` = (w1, w2, z) fixes the branch at ts[0]
    (principal by default).  Raises ContinuationError when the sampling is
    too coarse to follow the branch.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=complex))
    N = len(ts)
    lam, dlam, F, dF, p1, p2, dp1, dp2 = principal_lift(spec, ts)
    out = np.empty((6, N), dtype=complex)
    if start is None:
        w1, w2, z_prev = p1[0], p2[0], F[0] / p1[0]
    else:
        w1, w2, z_prev = start
    z_prev2 = None
    for k in range(N):
        (a, b, c, d), res = P.match_basis(w1, w2, p1[k], p2[k])
        if res > max_resid:
            raise P.ContinuationError(f"basis jump at t={ts[k]}")
        w1, w2 = a * p1[k] + b * p2[k], c * p1[k] + d * p2[k]
        dw1, dw2 = a * dp1[k] + b * dp2[k], c * dp1[k] + d * dp2[k]
        tau = w2 / w1
        pred = z_prev if z_prev2 is None else 2 * z_prev - z_prev2
        z0 = F[k] / w1
        z = P.nearest_representative(z0, pred, tau)
        if k and (_hyp(out[0, k - 1], tau) > 0.1 or abs(z - pred) > 0.05 * min(1.0, tau.imag)):
            raise P.ContinuationError(f"path step too large at t={ts[k]}")
        n2 = np.rint(np.imag(z - z0) / tau.imag)
        dtau = (dw2 * w1 - w2 * dw1) / w1**2
        dz = (dF[k] * w1 - F[k] * dw1) / w1**2 + n2 * dtau
        out[:, k] = (tau, z, dtau, dz, w1, w2)
        z_prev2, z_prev = (z_prev, z) if k else (None, z)
    return Lift(*out)
