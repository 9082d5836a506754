"""Command line: ``bettilab <subcommand> [options]`` or ``python -m bettilab``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness as HN
from . import surface as S


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="surface spec file (default: built-in fixture)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--grid", type=int, default=40, help="cells per side for the zero scan")
    common.add_argument("--eps-min", type=float, default=0.002, help="smallest radius in the eps-trace")
    common.add_argument("--json", type=Path, help="write the report here")
    common.add_argument("--csv", type=Path, help="write census rows here")
    common.add_argument("--scalar-mul", type=int, help="also compute h(n sigma)/h(sigma)")
    common.add_argument("--level", type=int, help="level k of the modular curve")
    common.add_argument("--genus-x", type=int, default=0)

    p = argparse.ArgumentParser(prog="bettilab", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)
    st = sub.add_parser("selftest", parents=[common], help="run the invariant suites")
    st.add_argument("--mutate", choices=("mu", "theta"), help=argparse.SUPPRESS)
    sub.add_parser("area", parents=[common], help="hyperbolic area of a fundamental domain")
    sub.add_parser("height", parents=[common], help="canonical height of the section")
    sub.add_parser("census", parents=[common], help="Betti multiplicities at all special points")
    sub.add_parser("theorem1", parents=[common], help="total multiplicity against its prediction")
    sub.add_parser("bound", parents=[common], help="points of vertical contact against the bound")
    return p


def _spec(args) -> S.SurfaceSpec:
    if args.config is None:
        return S.fixture_spec()
    return HN.parse_config(args.config)


def _opts(args) -> HN.RunOptions:
    return HN.RunOptions(seed=args.seed, grid=args.grid, eps_min=args.eps_min, level=args.level,
                         genus_x=args.genus_x, scalar_mul=args.scalar_mul)


def _summary(rep: HN.CampaignReport) -> str:
    lines = [f"label: {rep.label}  level: {rep.level}  degree: {rep.degree}"]
    for r in rep.census:
        lines.append(f"  {str(r.point):>28}  {r.kind:<5} m={r.m_b} r={r.r_b}  {r.evidence}")
    for key in ("lhs_total", "rhs_ramification", "rhs_area_term", "eq2_value", "bound_lhs", "bound_rhs"):
        v = getattr(rep, key)
        if v is not None:
            lines.append(f"{key}: {v}")
    if rep.height is not None:
        h = rep.height
        lines.append(f"height: {h.value:.15g} +- {h.error_estimate:.2g}  ~ {h.rational[0]}/{h.rational[1]} (residual {h.rational[2]:.2g})")
        for n, ratio in h.quadraticity:
            lines.append(f"  h({n} sigma)/h(sigma) = {ratio:.12g}")
    for k, v in sorted(rep.verdicts.items()):
        lines.append(f"verdict {k}: {v}")
    for d in rep.diagnostics:
        lines.append(f"# {d}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.cmd == "selftest":
            code, _ = HN.cmd_selftest(args.seed, args.mutate, out=sys.stdout)
            return code
        if args.cmd == "area":
            a = HN.cmd_area(args.level or 2, args.genus_x)
            print(f"level {a.level}: numeric {a.numeric:.12g} (+- {a.error:.1g}), prediction {a.prediction}, "
                  f"SL(2,Z) domain {a.sl2z_numeric:.12g}; {a.verdict} [{a.note}]")
            if args.json:
                args.json.write_text(HN._dump(HN.area_dict(a)) + "\n")
            return 0 if a.verdict == "agrees" else 1
        spec = _spec(args)
        opts = _opts(args)
        if args.cmd == "height":
            rep = HN.cmd_height(spec, opts)
        elif args.cmd == "census":
            rep = HN.cmd_census(spec, opts)
        elif args.cmd == "theorem1":
            rep = HN.cmd_theorem1(spec, opts)
        else:
            rep = HN.cmd_bound(spec, opts)
    except S.SpecParseError as e:
        print(f"error: {args.config}:{e.line}:{e.col}: {e.msg}", file=sys.stderr)
        return 2
    except S.NotOnCurveError as e:
        print(f"error: section is not on the curve; residual {e.residual}", file=sys.stderr)
        return 2
    except HN.TorsionSectionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(_summary(rep))
    if args.json:
        args.json.write_text(HN.report_json(rep))
    if args.csv:
        args.csv.write_text(HN.census_csv(rep.census))
    return 0
