"""Command-line interface: ``amermot {check,price,hedge,curtain,study}``.

Exit codes: 0 success, 1 input or solver failure, 2 marginals not in
convex order.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys

from .costs import check_theorem_hypotheses, cost_from_json, read_cost_json
from .curtain import left_curtain
from .exceptions import AmerMotError, CostError, NotInConvexOrder
from .experiments import Density, refinement_study, study_csv
from .fmt import dumps, fmt_float, write_atomic
from .lp import DEFAULT_TOL
from .measures import check_convex_order, irreducible_decomposition, read_measure_csv
from .mot import DualCertificate, build_mot_lp, solve_relaxed, verify_certificate
from .pricing import PriceOptions, price_american

EXIT_OK, EXIT_ERROR, EXIT_NOT_ORDERED = 0, 1, 2


def _tolerances(args):
    if getattr(args, "tol", None) is None:
        return DEFAULT_TOL
    return DEFAULT_TOL.scaled(args.tol / DEFAULT_TOL.gap_tol)


def _load_pair(args):
    return read_measure_csv(args.mu), read_measure_csv(args.nu)


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _describe_component(c):
    where = "complement" if c.interval is None else f"({fmt_float(c.interval[0])}, {fmt_float(c.interval[1])})"
    return (f"component {c.index}: I={where} mu_mass={fmt_float(c.mu_part.mass())} "
            f"nu_mass={fmt_float(c.nu_part.mass())} mu_atoms={len(c.mu_part)} nu_atoms={len(c.nu_part)}")


def _yn(v):
    return "n/a" if v is None else ("yes" if v else "no")


def cmd_check(args) -> int:
    mu, nu = _load_pair(args)
    cost = read_cost_json(args.cost) if args.cost else None
    res = check_convex_order(mu, nu)
    if not res.ordered:
        line = f"convex_order=no reason={res.reason}"
        if res.witness is not None:
            line += f" witness={fmt_float(res.witness)}"
        print(line + f" violation={fmt_float(res.max_violation)}")
        return EXIT_NOT_ORDERED
    print("convex_order=yes")
    comps = irreducible_decomposition(mu, nu)
    print(f"components={sum(1 for c in comps if c.index > 0)}")
    for c in comps:
        print(_describe_component(c))
    if cost is not None and cost.is_american:
        h = check_theorem_hypotheses(cost.bind(mu, nu), mu, nu)
        print(f"strict_convexity={_yn(h.strict_convexity)} "
              f"diagonal_separated={_yn(h.diagonal_separated)} "
              f"nu_absolutely_continuous={_yn(h.nu_absolutely_continuous)}")
    return EXIT_OK


def _maybe_dump_lp(args, mu, nu, cost):
    path = getattr(args, "dump_lp", None)
    if not path:
        return
    lp, _ = build_mot_lp(mu, nu, cost.grids(mu, nu))
    buf = io.StringIO()
    lp.dump(buf)
    write_atomic(path, buf.getvalue())


def _price_csv(rep) -> str:
    cols = ["p_bar", "p_c", "p_c_is_exact", "gap", "overlap_mass", "pure", "feasibility", "tightness"]
    vals = [fmt_float(rep.p_bar), fmt_float(rep.p_c), str(rep.p_c_is_exact).lower(),
            fmt_float(rep.gap), fmt_float(rep.overlap_mass), str(rep.pure).lower(),
            fmt_float(rep.slack.feasibility), fmt_float(rep.slack.tightness)]
    return ",".join(cols) + "\n" + ",".join(vals) + "\n"


def cmd_price(args) -> int:
    mu, nu = _load_pair(args)
    cost = read_cost_json(args.cost).bind(mu, nu)
    _maybe_dump_lp(args, mu, nu, cost)
    opts = PriceOptions(max_enum=args.max_enum, tol=_tolerances(args), seed=args.seed)
    rep = price_american(mu, nu, cost, opts)
    if args.out:
        text = dumps(rep.to_json()) + "\n" if args.format == "json" else _price_csv(rep)
        write_atomic(args.out, text)
    print(rep.summary())
    return EXIT_OK


def _certificate_json(dual, mu, nu, slack, p_bar=None):
    obj = {"phi": dual.phi.tolist(), "psi": dual.psi.tolist(), "theta": dual.theta.tolist(),
           "dual_value": dual.value(mu, nu)}
    if p_bar is not None:
        obj["p_bar"] = p_bar
    obj["slack"] = slack.to_json()
    return obj


def cmd_hedge(args) -> int:
    mu, nu = _load_pair(args)
    cost = read_cost_json(args.cost).bind(mu, nu)
    _maybe_dump_lp(args, mu, nu, cost)
    tol = _tolerances(args)
    rel = solve_relaxed(mu, nu, cost, tol)
    if args.verify:
        with open(args.verify) as fh:
            try:
                obj = json.load(fh)
                dual = DualCertificate(obj["phi"], obj["psi"], obj["theta"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CostError(f"{args.verify}: unreadable certificate ({exc})") from None
        slack = verify_certificate(rel.plan, dual, cost)
        ok = slack.feasibility <= tol.opt_tol * 10 and slack.tightness <= tol.gap_tol * (1 + abs(rel.value))
        print(f"feasibility={fmt_float(slack.feasibility)} tightness={fmt_float(slack.tightness)} "
              f"dual_value={fmt_float(dual.value(mu, nu))} p_bar={fmt_float(rel.value)} "
              f"valid={'yes' if ok else 'no'}")
        if args.out:
            write_atomic(args.out, dumps(_certificate_json(dual, mu, nu, slack, rel.value)) + "\n")
        return EXIT_OK
    slack = verify_certificate(rel.plan, rel.dual, cost)
    if args.out:
        write_atomic(args.out, dumps(_certificate_json(rel.dual, mu, nu, slack, rel.value)) + "\n")
    print(f"p_bar={fmt_float(rel.value)} dual_value={fmt_float(rel.dual.value(mu, nu))} "
          f"feasibility={fmt_float(slack.feasibility)} tightness={fmt_float(slack.tightness)}")
    return EXIT_OK


def cmd_curtain(args) -> int:
    mu, nu = _load_pair(args)
    res = left_curtain(mu, nu, _tolerances(args))
    verdict = f"monotone={'yes' if res.report.monotone else 'no'}"
    if res.report.violation is not None:
        verdict += " violation=" + ":".join(str(v) for v in res.report.violation)
    lines = ["i,j,mass"] + [f"{i},{j},{fmt_float(w)}" for i, j, w in res.plan.triplets(1e-12)]
    lines.append(f"# {verdict}")
    _emit("\n".join(lines) + "\n", args.out)
    if args.out:
        print(verdict)
    return EXIT_OK


def cmd_study(args) -> int:
    with open(args.config) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CostError(f"{args.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    try:
        mu_d = Density.from_json(cfg["mu_density"])
        nu_d = Density.from_json(cfg["nu_density"])
        cost = cost_from_json(cfg["cost"])
        sizes = [int(s) for s in cfg["sizes"]]
    except KeyError as exc:
        raise CostError(f"{args.config}: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise CostError(f"{args.config}: {exc}") from None
    opts = PriceOptions(max_enum=int(cfg.get("max_enum", 16)), seed=int(cfg.get("seed", 0)),
                        tol=_tolerances(args))
    rows = refinement_study(mu_d, nu_d, cost, sizes, cfg.get("mu_atoms"),
                            cfg.get("method", "quantile"), opts)
    _emit(study_csv(rows), args.out)
    if args.out:
        for r in rows:
            print(f"n={r.n} p_bar={fmt_float(r.p_bar)} p_c={fmt_float(r.p_c)} "
                  f"gap={fmt_float(r.gap)} pure={_yn(r.pure)}")
    for r in rows:
        if r.error:
            print(f"n={r.n} error: {r.error}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="amermot",
                                description="Model-free bounds for two-date American options.")
    sub = p.add_subparsers(dest="command", required=True)

    def pair(sp):
        sp.add_argument("mu", help="CSV file with x,weight lines for the first-date law")
        sp.add_argument("nu", help="CSV file with x,weight lines for the second-date law")

    sp = sub.add_parser("check", help="convex order, decomposition and hypothesis report")
    pair(sp)
    sp.add_argument("cost", nargs="?", help="optional cost JSON")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("price", help="relaxed bound, exact value and diagnostics")
    pair(sp)
    sp.add_argument("cost")
    sp.add_argument("--max-enum", type=int, default=16,
                    help="largest atom count solved exactly (default 16)")
    sp.add_argument("--tol", type=float, default=None, help="duality-gap tolerance (default 1e-8)")
    sp.add_argument("--out", help="report path")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dump-lp", help="write the relaxed LP as text triplets")
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("hedge", help="superhedging certificate of the relaxed bound")
    pair(sp)
    sp.add_argument("cost")
    sp.add_argument("--out")
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--verify", metavar="CERT", help="check an existing certificate file instead")
    sp.add_argument("--dump-lp")
    sp.set_defaults(func=cmd_hedge)

    sp = sub.add_parser("curtain", help="left-curtain coupling as (i, j, mass) triplets")
    pair(sp)
    sp.add_argument("--out")
    sp.add_argument("--tol", type=float, default=None)
    sp.set_defaults(func=cmd_curtain)

    sp = sub.add_parser("study", help="grid-refinement study from a JSON config")
    sp.add_argument("config")
    sp.add_argument("--out")
    sp.add_argument("--tol", type=float, default=None)
    sp.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    if os.environ.get("MOT_LOG", "").lower() == "debug":
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotInConvexOrder as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_ORDERED
    except (AmerMotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
