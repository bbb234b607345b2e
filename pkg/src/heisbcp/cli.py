"""Command-line front end.

Every document goes to stdout as one JSON line with floats rounded to 12
significant digits. Errors go to stderr as one JSON line; exit codes are
0 (success), 2 (usage error) and 3 (contradictory verdicts).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import checks
from .dsl import DSLError
from .family import SearchConfig, eps_net_greedy, search_family, trace_csv
from .group import GroupPoint
from .metric import BracketingError, DistanceOracle
from .profile import ZOO_NAMES, ProfileError, load_profile, profile_to_json, validate_profile, zoo_entry

EXIT_OK, EXIT_USAGE, EXIT_CONFLICT = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def rounded(obj):
    """Round floats to 12 significant digits; non-finite floats become null."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return rounded(obj.item())
    return obj


def dumps(doc) -> str:
    return json.dumps(rounded(doc), ensure_ascii=False, allow_nan=False)


def _point(text: str) -> GroupPoint:
    try:
        parts = [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"bad point {text!r}; expected x,y,z") from None
    if len(parts) != 3:
        raise UsageError(f"bad point {text!r}; expected x,y,z")
    return GroupPoint.of(*parts)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _oracle(name: str, eps: float, alpha: float, closed: bool) -> DistanceOracle:
    if closed:
        if name not in ZOO_NAMES:
            raise UsageError("--closed-form needs a zoo name")
        entry = zoo_entry(name, eps, alpha)
        if entry.closed_form is None:
            raise UsageError(f"{name} has no closed form")
        return DistanceOracle.closed(entry.closed_form, **dict(entry.params))
    return DistanceOracle.gauge(load_profile(name, eps, alpha))


# -- subcommands -----------------------------------------------------------------


def cmd_zoo(args, out):
    entries = []
    for name in ZOO_NAMES:
        e = zoo_entry(name)
        entries.append(
            {"name": name, "profile": profile_to_json(e.profile), "closed_form": e.closed_form, "note": e.note}
        )
    out.write(dumps({"zoo": entries}) + "\n")


def cmd_dist(args, out):
    o = _oracle(args.distance, args.eps, args.alpha, args.closed_form)
    p, q = _point(args.p), _point(args.q)
    d = o.distance(p, q)
    route = "closed_form" if o.closed_form else "gauge"
    out.write(dumps({"distance": d, "oracle": o.label, "route": route, "p": p.as_tuple(), "q": q.as_tuple()}) + "\n")


def cmd_check(args, out):
    p = load_profile(args.profile, args.eps, args.alpha)
    grid = {"radial_grid": args.radial, "angular_grid": args.angular, "seed": args.seed}
    which = args.which
    if which == "sufficient":
        alphas = _floats(args.alphas) if args.alphas else checks.DEFAULT_ALPHAS
        report = checks.sufficient_check(p, alphas, **grid)
    elif which == "rotational":
        report = checks.rotational_check(p)
    elif which == "necessary":
        report = checks.necessary_gradient_check(p, angular_grid=args.angular, seed=args.seed)
    elif which == "monotone":
        report = checks.radial_monotone_check(p)
    elif which == "origin":
        report = checks.origin_regularity_check(p)
    elif which == "hessian":
        report = checks.hessian_check(
            p, args.h, args.smooth, args.hessian_diff, angular_grid=args.angular, seed=args.seed
        )
    else:
        report = checks.run_all(p, args.seed, args.radial, args.angular, args.smooth, args.hessian_diff)
    out.write(dumps(report.to_json()) + "\n")


def cmd_validate(args, out):
    p = load_profile(args.profile, args.eps, args.alpha)
    out.write(dumps(validate_profile(p, args.samples, args.seed).to_json()) + "\n")


def cmd_search(args, out):
    o = _oracle(args.distance, args.eps, args.alpha, args.closed_form)
    cfg = SearchConfig(
        budget=args.budget,
        seed=args.seed,
        strategy=args.strategy,
        radius_range=(args.r_min, args.r_max),
        slack=args.slack,
        chains=args.chains,
    )
    res = search_family(o, cfg)
    fam = res.family.to_json()
    if args.out:
        Path(args.out).write_text(dumps(fam) + "\n", encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(trace_csv(res.trace), encoding="utf-8")
    summary = {
        "distance": o.label,
        "strategy": cfg.strategy,
        "seed": cfg.seed,
        "budget": cfg.budget,
        "evaluations": res.evaluations,
        "cardinality": len(res.family),
        "verified": bool(res.check),
        "min_separation": res.check.min_separation,
        "family": fam if not args.out else args.out,
    }
    out.write(dumps(summary) + "\n")


def cmd_net(args, out):
    o = _oracle(args.distance, args.dist_eps, args.alpha, args.closed_form)
    net = eps_net_greedy(o, args.eps, args.candidates, args.seed)
    doc = {"distance": o.label, "eps": args.eps, "candidates": args.candidates, "seed": args.seed, "size": len(net)}
    if args.points:
        doc["points"] = net.tolist()
    out.write(dumps(doc) + "\n")


# -- parser -----------------------------------------------------------------------


def _profile_flags(p, flag="--profile", eps_flag="--eps"):
    p.add_argument(flag, required=True, help="zoo name or profile JSON file")
    p.add_argument(eps_flag, type=float, default=1.0, dest="eps" if eps_flag == "--eps" else "dist_eps",
                   help="parameter of d_eps")
    p.add_argument("--alpha", type=float, default=1.0, help="parameter of d_alpha")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="heisbcp", description="Homogeneous distances on the Heisenberg group and BCP checks.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    z = sub.add_parser("zoo", help="list the built-in profiles")
    z.add_argument("action", choices=["list"])
    z.set_defaults(run=cmd_zoo)

    d = sub.add_parser("dist", help="distance between two points")
    _profile_flags(d, "--distance")
    d.add_argument("--p", required=True, help="x,y,z")
    d.add_argument("--q", required=True, help="x,y,z")
    d.add_argument("--closed-form", action="store_true", help="use the closed form instead of the gauge")
    d.set_defaults(run=cmd_dist)

    c = sub.add_parser("check", help="run BCP checkers")
    c.add_argument("which", choices=["sufficient", "rotational", "necessary", "monotone", "origin", "hessian", "all"])
    _profile_flags(c)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--radial", type=int, default=64, help="radial grid count")
    c.add_argument("--angular", type=int, default=256, help="angular grid count")
    c.add_argument("--alphas", help="comma-separated cone half-angles for the sufficient check")
    c.add_argument("--h", type=float, default=1e-4, help="finite-difference step for the Hessian")
    c.add_argument("--smooth", action="store_true", help="assert phi is C^2 on int(K)")
    c.add_argument("--hessian-diff", action="store_true", help="assert the Hessian is differentiable at 0")
    c.set_defaults(run=cmd_check)

    v = sub.add_parser("validate", help="sampled distance-validity checks for a profile")
    _profile_flags(v)
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(run=cmd_validate)

    s = sub.add_parser("search", help="search for large Besicovitch families")
    s.add_argument("target", choices=["family"])
    _profile_flags(s, "--distance")
    s.add_argument("--budget", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--strategy", choices=["greedy", "anneal"], default="anneal")
    s.add_argument("--r-min", type=float, default=0.05)
    s.add_argument("--r-max", type=float, default=1.0)
    s.add_argument("--slack", type=float, default=1e-8)
    s.add_argument("--chains", type=int, default=1)
    s.add_argument("--out", help="write the family JSON here")
    s.add_argument("--trace", help="write the trace CSV here")
    s.add_argument("--closed-form", action="store_true")
    s.set_defaults(run=cmd_search)

    n = sub.add_parser("net", help="greedy eps-net of the unit ball")
    _profile_flags(n, "--distance", "--dist-eps")
    n.add_argument("--eps", type=float, required=True, help="separation")
    n.add_argument("--candidates", type=int, default=10_000)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--points", action="store_true", help="include the net points")
    n.add_argument("--closed-form", action="store_true")
    n.set_defaults(run=cmd_net)
    return ap


def _fail(kind: str, message: str, code: int, err) -> int:
    err.write(dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def _join_points(argv):
    """Glue '--p -1,0,0' into '--p=-1,0,0' so argparse does not read the value as a flag."""
    argv = list(sys.argv[1:] if argv is None else argv)
    joined = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--p", "--q") and i + 1 < len(argv) and argv[i + 1][:2] in ("-.",) + tuple(f"-{d}" for d in "0123456789"):
            joined.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        joined.append(tok)
        i += 1
    return joined


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(_join_points(argv))
        args.run(args, out)
    except checks.VerdictConflictError as exc:
        return _fail("verdict_conflict", str(exc), EXIT_CONFLICT, err)
    except (UsageError, checks.CheckUsageError, ProfileError, DSLError, BracketingError, ValueError, OSError) as exc:
        return _fail("usage", str(exc), EXIT_USAGE, err)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
