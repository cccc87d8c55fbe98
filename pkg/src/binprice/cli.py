"""Batch command-line front end.

Sub-commands::

    binprice solve     --instance f.json --alg dp|lp-opt|ex-ante|hierarchy|ptas
    binprice simulate  --instance f.json --policy p.json --trials N --seed S
    binprice verify    --instance f.json [--policy p.json] [--search]
    binprice transform --instance f.json

Reports go to stdout (or ``--output``) as JSON or CSV; diagnostics go to
stderr.  Exit codes: 0 ok, 2 invalid instance, 3 state-space cap exceeded,
4 LP failure, 5 verification property failed, 6 policy/instance mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness, lp, myerson, ptas
from .dp import concavity_check, solve_full_dp, solve_subproblem_dp
from .model import (
    DEFAULT_STATE_CAP,
    InstanceError,
    LaminarInstance,
    Marking,
    ProductionInstance,
    SizingError,
    as_laminar,
    load_instance,
    serialize_instance,
    validate,
)
from .rounding import (
    RoundingError,
    compose_policies,
    extract_all,
    extract_pricing,
    mark_laminar,
    policy_from_json,
    policy_to_json,
)

EXIT_OK = 0
EXIT_INSTANCE = 2
EXIT_SIZING = 3
EXIT_LP = 4
EXIT_PROPERTY = 5
EXIT_MISMATCH = 6


def _diag(msg):
    print(msg, file=sys.stderr)


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(doc, fmt, path, csv_rows=None):
    if fmt == "csv":
        rows = csv_rows if csv_rows is not None else [
            (k, v, "", doc.get("trials", ""), doc.get("seed", ""))
            for k, v in doc.items()
            if isinstance(v, (int, float, str))]
        _emit(harness.report_to_csv(rows), path)
    else:
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", path)


def _load(path):
    inst = load_instance(path)
    errs = validate(inst)
    if errs:
        raise InstanceError(errs)
    return inst


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    state_cap = args.state_cap
    engine = args.engine
    doc = {"command": "solve", "algorithm": args.alg}
    policy = None
    if args.alg == "dp":
        table, policy = solve_full_dp(as_laminar(inst), state_cap=state_cap)
        doc["objective"] = table.optimal
    elif args.alg == "lp-opt":
        built = lp.build_lp_optimal(as_laminar(inst), state_cap=state_cap)
        sol = lp.solve_optimal(built.model, engine)
        policy = extract_pricing(sol, built, "root")
        doc["objective"] = sol.objective
        doc["engine"] = sol.engine
    elif args.alg == "ex-ante":
        if not isinstance(inst, ProductionInstance):
            raise InstanceError("ex-ante solve requires a production instance")
        built = lp.build_lp_exante(inst, args.scale, state_cap=state_cap)
        sol = lp.solve_optimal(built.model, engine)
        policy = compose_policies(inst, extract_all(sol, built))
        doc["objective"] = sol.objective
        doc["engine"] = sol.engine
        doc["capacity_scale"] = args.scale
    elif args.alg == "hierarchy":
        lam = as_laminar(inst)
        delta = args.delta if args.delta else ptas.delta_of(args.epsilon)
        mk = mark_laminar(lam, delta)
        built = lp.build_lp_hierarchy(lam, mk, args.scale, state_cap=state_cap)
        sol = lp.solve_optimal(built.model, engine)
        policy = compose_policies(lam, extract_all(sol, built), mk)
        doc["objective"] = sol.objective
        doc["engine"] = sol.engine
        doc["capacity_scale"] = args.scale
        doc["marking"] = {"large": sorted(mk.large),
                          "small_maximal": sorted(mk.small_maximal)}
    else:  # ptas
        cfg = ptas.PtasConfig(epsilon=args.epsilon, delta=args.delta)
        if isinstance(inst, ProductionInstance):
            result = ptas.ptas_production(inst, cfg, state_cap=state_cap,
                                          engine=engine)
        else:
            result = ptas.ptas_laminar(inst, cfg, state_cap=state_cap,
                                       engine=engine)
        policy = result.policy
        doc["objective"] = result.objective
        doc["branch"] = result.branch
        doc["lp"] = result.lp_kind
        doc["epsilon"] = cfg.epsilon
        doc["delta"] = cfg.resolved_delta
        if result.marking is not None:
            doc["marking"] = result.marking_summary()
    if args.policy_out and policy is not None:
        _emit(policy_to_json(policy), args.policy_out)
        doc["policy_path"] = args.policy_out
    elif policy is not None and args.format == "json":
        doc["policy"] = policy.to_json_dict()
    _report(doc, args.format, args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = _load(args.instance)
    with open(args.policy, "r", encoding="utf-8") as fh:
        policy = policy_from_json(fh.read())
    try:
        report = harness.simulate(policy, inst, args.trials, args.seed,
                                  threads=args.threads,
                                  state_cap=args.state_cap)
    except (InstanceError, harness.CoverageError) as exc:
        _diag(f"policy/instance mismatch: {exc}")
        return EXIT_MISMATCH
    doc = {"command": "simulate", **report.to_json_dict()}
    _report(doc, args.format, args.output, csv_rows=report.to_csv_rows())
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load(args.instance)
    lam = as_laminar(inst)
    state_cap = args.state_cap
    checks = []

    table, dp_policy = solve_full_dp(lam, state_cap=state_cap)
    dp_value = table.optimal
    built1 = lp.build_lp_optimal(lam, state_cap=state_cap)
    sol1 = lp.solve_optimal(built1.model, args.engine)
    checks.append(("lp-opt equals dp", abs(sol1.objective - dp_value) <= 1e-6,
                   f"lp={sol1.objective!r} dp={dp_value!r}"))

    lp_policy = extract_pricing(sol1, built1, "root")
    welfare, trace = harness.evaluate_exact(lp_policy, lam, state_cap=state_cap)
    ydev = _trace_deviation(sol1, built1, trace)
    checks.append(("rounding exactness",
                   abs(welfare - sol1.objective) <= 1e-6 and ydev <= 1e-7,
                   f"welfare={welfare!r} ydev={ydev!r}"))

    if args.policy:
        with open(args.policy, "r", encoding="utf-8") as fh:
            given = policy_from_json(fh.read())
        try:
            got, _ = harness.evaluate_exact(given, inst, state_cap=state_cap)
            ok = abs(got - sol1.objective) <= 1e-6
        except harness.CoverageError as exc:
            got, ok = None, False
            _diag(f"supplied policy does not cover the instance: {exc}")
        checks.append(("supplied policy exactness", ok,
                       f"welfare={got!r} lp={sol1.objective!r}"))

    if isinstance(inst, ProductionInstance):
        built2 = lp.build_lp_exante(inst, 1.0, state_cap=state_cap)
        sol2 = lp.solve_optimal(built2.model, args.engine)
        checks.append(("ex-ante relaxes dp", sol2.objective >= dp_value - 1e-6,
                       f"exante={sol2.objective!r} dp={dp_value!r}"))
        for j in range(inst.num_types):
            buyers = inst.buyers_of_type(j)
            if not buyers or len(buyers) > 12:
                continue
            ok, subset, gap = harness.check_negative_cylinder(inst, j, 0.0)
            checks.append((f"negative cylinder type {j}", ok,
                           f"worst subset={subset} gap={gap!r}"))
            tbl = solve_subproblem_dp(inst, j, 0.0, state_cap=state_cap)
            conc, worst = concavity_check(tbl)
            checks.append((f"value concavity type {j}", conc, f"worst={worst}"))
    else:
        mk_small = Marking.all_small(lam)
        built4 = lp.build_lp_hierarchy(lam, mk_small, 1.0, state_cap=state_cap)
        sol4 = lp.solve_optimal(built4.model, args.engine)
        checks.append(("all-small hierarchy equals lp-opt",
                       abs(sol4.objective - sol1.objective) <= 1e-6,
                       f"lp4={sol4.objective!r} lp1={sol1.objective!r}"))

    cfg = ptas.PtasConfig(epsilon=args.epsilon, delta=args.delta)
    if isinstance(inst, ProductionInstance):
        result = ptas.ptas_production(inst, cfg, state_cap=state_cap,
                                      engine=args.engine)
    else:
        result = ptas.ptas_laminar(inst, cfg, state_cap=state_cap,
                                   engine=args.engine)
    sim = harness.simulate(result.policy, inst, args.trials, args.seed,
                           threads=args.threads, state_cap=state_cap)
    checks.append(("feasibility simulation", sim.total_violations == 0,
                   f"violations={sim.total_violations}"))

    doc = {"command": "verify",
           "checks": [{"name": n, "ok": ok, "detail": d}
                      for n, ok, d in checks]}
    if args.search and isinstance(inst, LaminarInstance):
        hits = harness.search_dependency_counterexample(inst.dists)
        doc["counterexample"] = ([
            {"tree": h.tree, "price_after_pick": h.price_after_pick,
             "price_after_skip": h.price_after_skip} for h in hits[:5]]
            if hits else "no hit")
    failed = [n for n, ok, _ in checks if not ok]
    doc["ok"] = not failed
    _report(doc, args.format, args.output)
    if failed:
        _diag("failed properties: " + ", ".join(failed))
        return EXIT_PROPERTY
    return EXIT_OK


def _trace_deviation(sol, built, trace) -> float:
    info = built.block("root")
    dev = 0.0
    for lvl in range(len(info.levels)):
        tlab = info.time_label(lvl)
        t = len(info.elements) if tlab == lp.END else tlab
        for s in info.levels[lvl]:
            got = trace.get((t, s), 0.0)
            want = sol.value(lp.y_name("root", tlab, s))
            dev = max(dev, abs(got - want))
    return dev


def cmd_transform(args) -> int:
    inst = _load(args.instance)
    try:
        out = myerson.revenue_transform(inst)
    except ValueError as exc:
        raise InstanceError(str(exc)) from None
    _emit(json.dumps(serialize_instance(out), indent=2, sort_keys=True) + "\n",
          args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binprice",
        description="Posted-price policies for Bayesian online selection "
                    "under production and laminar capacity constraints.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--instance", required=True, help="instance JSON path")
        sp.add_argument("--output", default=None, help="report path (stdout)")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"),
                            default="json")
        sp.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)

    sp = sub.add_parser("solve", help="solve an instance")
    common(sp)
    sp.add_argument("--alg", required=True,
                    choices=("dp", "lp-opt", "ex-ante", "hierarchy", "ptas"))
    sp.add_argument("--epsilon", type=float, default=0.2)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--scale", type=float, default=1.0,
                    help="capacity scale for ex-ante/hierarchy")
    sp.add_argument("--engine", choices=("auto", "simplex", "highs"),
                    default="auto")
    sp.add_argument("--policy-out", default=None,
                    help="write the policy JSON here instead of inline")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="simulate a policy")
    common(sp)
    sp.add_argument("--policy", required=True, help="policy JSON path")
    sp.add_argument("--trials", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="run the property checks")
    common(sp)
    sp.add_argument("--policy", default=None,
                    help="externally supplied policy to check")
    sp.add_argument("--trials", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--epsilon", type=float, default=0.2)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--engine", choices=("auto", "simplex", "highs"),
                    default="auto")
    sp.add_argument("--search", action="store_true",
                    help="also search for a conditional-price drop")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("transform",
                        help="rewrite values as ironed virtual values")
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_transform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceError as exc:
        for msg in exc.violations:
            _diag(f"invalid instance: {msg}")
        return EXIT_INSTANCE
    except FileNotFoundError as exc:
        _diag(f"missing file: {exc}")
        return EXIT_INSTANCE
    except SizingError as exc:
        _diag(str(exc))
        return EXIT_SIZING
    except (lp.LpError, RoundingError) as exc:
        _diag(f"lp failure: {exc}")
        return EXIT_LP


if __name__ == "__main__":
    sys.exit(main())
