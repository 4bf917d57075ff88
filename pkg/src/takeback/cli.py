"""Command-line front end.

Subcommands: validate, solve, sweep, oracle, generate.  Exit codes:
0 success, 2 validation failure, 3 enumeration-guard violation,
4 iteration limit reached with a nonzero gap.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .benders import SolveReport, benders_solve
from .errors import InstanceValidationError, TooManySites
from .model import (
    Instance,
    derive_params,
    load_instance_dir,
    with_scenario,
    write_instance,
)
from .oracle import oracle_solve
from .synth import generate_instance

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GUARD = 3
EXIT_ITERATION_LIMIT = 4

AUDIT_TOL = 1e-6


def build_report_dict(inst: Instance, rep: SolveReport) -> dict:
    """JSON-ready report: scenario echo, openings, flows, cost breakdown,
    bounds trace.  Currency values keep full precision here; the human
    summary rounds to cents."""
    sc = inst.scenario
    opened_sites = []
    for i in np.nonzero(rep.opened)[0]:
        site = inst.sites[i]
        entry = {"id": site.id, "name": site.name}
        if site.position is not None:
            entry["lat"], entry["lon"] = site.position
        opened_sites.append(entry)

    assignments = []
    for i, j, k in zip(*np.nonzero(rep.returned)):
        assignments.append(
            {
                "site": inst.site_ids[i],
                "zone": inst.zone_ids[j],
                "profile": inst.profile_ids[k],
                "pills": float(rep.returned[i, j, k]),
                "incentive": float(rep.incentive[i, j, k]),
            }
        )
    unreturned = [
        {
            "zone": inst.zone_ids[j],
            "profile": inst.profile_ids[k],
            "pills": float(rep.unreturned[j, k]),
        }
        for j, k in zip(*np.nonzero(rep.unreturned))
    ]
    return {
        "scenario": {
            "theta": sc.theta,
            "incentive_level": sc.incentive_level,
            "penalty_per_prescription": sc.penalty_per_prescription,
            "pills_per_prescription": sc.pills_per_prescription,
            "mileage_rate": sc.mileage_rate,
        },
        "status": rep.status,
        "gap": rep.gap,
        "iterations": rep.iterations,
        "wall_time_seconds": rep.wall_time,
        "opened_sites": opened_sites,
        "assignments": assignments,
        "unreturned": unreturned,
        "cost_breakdown": {
            "fixed": rep.fixed_cost,
            "incentive": rep.incentive_cost,
            "penalty": rep.penalty_cost,
            "total": rep.objective,
        },
        "bounds_trace": [
            {
                "iter": r.iteration,
                "lb": r.lower_bound,
                "ub": r.upper_bound,
                "gap": r.gap,
                "opened_count": r.opened_count,
                "cut_constant": r.cut_constant,
            }
            for r in rep.trace.records
        ],
    }


def audit_report(instance_dir, report: dict) -> list[str]:
    """Independent feasibility audit of an emitted report.

    Reloads the instance from its raw files and re-checks every campaign
    constraint (reachability, openings, capacities, coverage, offer
    floors) plus the breakdown arithmetic against the report's own
    numbers, without consulting any solver internals.  Returns a list of
    violation messages; empty means the report audits clean.
    """
    inst = load_instance_dir(instance_dir)
    inst = with_scenario(
        inst,
        theta=report["scenario"]["theta"],
        incentive_level=report["scenario"]["incentive_level"],
        penalty_per_prescription=report["scenario"]["penalty_per_prescription"],
        pills_per_prescription=report["scenario"]["pills_per_prescription"],
        mileage_rate=report["scenario"]["mileage_rate"],
    )
    sc = inst.scenario
    radius = inst.level_policy.max_distance[sc.incentive_level]
    opened = {s["id"] for s in report["opened_sites"]}
    problems: list[str] = []

    inflow: dict[str, float] = {}
    covered: dict[tuple[str, str], float] = {}
    incentive_total = 0.0
    for a in report["assignments"]:
        sid, zid, pid = a["site"], a["zone"], a["profile"]
        pills, offer = a["pills"], a["incentive"]
        if pills < -AUDIT_TOL:
            problems.append(f"negative flow on ({sid},{zid},{pid})")
        if sid not in opened:
            problems.append(f"flow into closed site {sid}")
        if inst.distance[(sid, zid)] > radius + AUDIT_TOL:
            problems.append(f"flow beyond willingness radius on ({sid},{zid})")
        floor = sc.mileage_rate * inst.distance[(sid, zid)] + inst.profiles[
            inst.profile_index[pid]
        ].reservation_incentive[sc.incentive_level]
        if offer < floor - AUDIT_TOL:
            problems.append(
                f"offer {offer} below covering price {floor} on ({sid},{zid},{pid})"
            )
        inflow[sid] = inflow.get(sid, 0.0) + pills
        covered[(zid, pid)] = covered.get((zid, pid), 0.0) + pills
        incentive_total += pills * offer / sc.pills_per_prescription

    for sid, pills in inflow.items():
        cap = inst.sites[inst.site_index[sid]].capacity
        if pills > cap * (1 + AUDIT_TOL) + AUDIT_TOL:
            problems.append(f"site {sid} over capacity: {pills} > {cap}")

    short = {(u["zone"], u["profile"]): u["pills"] for u in report["unreturned"]}
    penalty_total = 0.0
    per_pill = sc.penalty_per_prescription / sc.pills_per_prescription
    for z in inst.zones:
        for p in inst.profiles:
            target = sc.theta * inst.unused_quantity[(z.id, p.id)]
            got = covered.get((z.id, p.id), 0.0) + short.get((z.id, p.id), 0.0)
            if got < target - AUDIT_TOL * (1 + target):
                problems.append(
                    f"coverage shortfall at ({z.id},{p.id}): {got} < {target}"
                )
    penalty_total = per_pill * sum(short.values())

    fixed_total = sum(inst.sites[inst.site_index[s]].fixed_cost for s in opened)
    br = report["cost_breakdown"]
    for name, want in (
        ("fixed", fixed_total),
        ("incentive", incentive_total),
        ("penalty", penalty_total),
    ):
        if abs(br[name] - want) > AUDIT_TOL * (1 + abs(want)):
            problems.append(f"{name} cost mismatch: reported {br[name]}, audit {want}")
    total = br["fixed"] + br["incentive"] + br["penalty"]
    if abs(total - br["total"]) > 1e-6 * (1 + abs(br["total"])):
        problems.append(f"breakdown does not sum to total: {total} vs {br['total']}")
    return problems


def _summary_line(rep: SolveReport) -> str:
    return (
        f"status={rep.status} opened={int(rep.opened.sum())} "
        f"total=${rep.objective:,.2f} (fixed=${rep.fixed_cost:,.2f} "
        f"incentive=${rep.incentive_cost:,.2f} penalty=${rep.penalty_cost:,.2f}) "
        f"gap={rep.gap:.2e} iters={rep.iterations} time={rep.wall_time:.2f}s"
    )


def cmd_validate(args) -> int:
    try:
        inst = load_instance_dir(args.instance_dir)
    except InstanceValidationError as exc:
        print(json.dumps({"errors": [i.as_dict() for i in exc.issues]}, indent=2))
        return EXIT_VALIDATION
    dp = derive_params(inst)
    m, n, p = len(inst.sites), len(inst.zones), len(inst.profiles)
    print(f"{m} sites, {n} zones, {p} profiles")
    print(f"total unused pills: {inst.quantities.sum():,.0f}")
    for level in inst.level_policy.levels:
        radius = inst.level_policy.max_distance[level]
        density = float((inst.distances <= radius).mean()) if m and n else 0.0
        print(f"reachability at {level} (radius {radius} mi): {density:.1%} of pairs")
    print(f"scenario: theta={inst.scenario.theta} level={inst.scenario.incentive_level}")
    return EXIT_OK


def _load_with_overrides(args) -> Instance:
    inst = load_instance_dir(args.instance_dir)
    overrides = {}
    if getattr(args, "theta", None) is not None:
        overrides["theta"] = args.theta
    if getattr(args, "level", None) is not None:
        overrides["incentive_level"] = args.level
    return with_scenario(inst, **overrides) if overrides else inst


def cmd_solve(args) -> int:
    try:
        inst = _load_with_overrides(args)
    except InstanceValidationError as exc:
        print(json.dumps({"errors": [i.as_dict() for i in exc.issues]}, indent=2))
        return EXIT_VALIDATION
    rep = benders_solve(inst, eps=args.eps, max_iter=args.max_iter)
    report = build_report_dict(inst, rep)
    problems = audit_report(args.instance_dir, report)
    report["audit_passed"] = not problems
    if problems:
        report["audit_problems"] = problems

    out = Path(args.output) if args.output else None
    if out:
        out.write_text(json.dumps(report, indent=2) + "\n")
        print(f"report written to {out}")
    if args.csv_dir:
        _write_solution_csvs(Path(args.csv_dir), report)
    print(_summary_line(rep))
    if problems:
        print("AUDIT FAILED:", "; ".join(problems))
        return 1
    if rep.status == "iteration_limit" and rep.gap > args.eps:
        return EXIT_ITERATION_LIMIT
    return EXIT_OK


def _write_solution_csvs(directory: Path, report: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "assignments.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "zone", "profile", "pills", "incentive"])
        for a in report["assignments"]:
            w.writerow(
                [a["site"], a["zone"], a["profile"], repr(a["pills"]), repr(a["incentive"])]
            )
    with open(directory / "unreturned.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "profile", "pills"])
        for u in report["unreturned"]:
            w.writerow([u["zone"], u["profile"], repr(u["pills"])])
    with open(directory / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "lb", "ub", "gap", "opened_count", "cut_constant"])
        for r in report["bounds_trace"]:
            w.writerow(
                [r["iter"], repr(r["lb"]), repr(r["ub"]), repr(r["gap"]),
                 r["opened_count"], repr(r["cut_constant"])]
            )


def _sweep_cell(instance_dir: str, theta: float, level: str, eps: float,
                max_iter: int) -> dict:
    """One sweep cell; loads from files so it can run in a worker process."""
    inst = with_scenario(
        load_instance_dir(instance_dir), theta=theta, incentive_level=level
    )
    try:
        rep = benders_solve(inst, eps=eps, max_iter=max_iter)
    except Exception as exc:  # per-cell failures recorded, sweep continues
        return {"theta": theta, "level": level, "status": f"error: {exc}"}
    return {
        "theta": theta,
        "level": level,
        "status": rep.status,
        "fixed": rep.fixed_cost,
        "incentive": rep.incentive_cost,
        "penalty": rep.penalty_cost,
        "total": rep.objective,
        "opened_count": int(rep.opened.sum()),
    }


def run_sweep(instance_dir, thetas, levels, eps=1e-6, max_iter=500, workers=1):
    """Solve every (theta, level) cell; returns rows in grid order."""
    cells = [(str(instance_dir), t, lvl, eps, max_iter) for t in thetas for lvl in levels]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell_star, cells))
    else:
        rows = [_sweep_cell(*c) for c in cells]
    return rows


def _sweep_cell_star(c):
    return _sweep_cell(*c)


def sweep_summary(rows) -> dict:
    """Trend observations over a sweep grid.

    Reports whether total cost is non-decreasing in theta per level (a
    guaranteed property) and whether the penalty component decreases as
    the incentive level rises at each theta (an empirical observation,
    recorded but not asserted).
    """
    ok = [r for r in rows if not str(r["status"]).startswith("error")]
    thetas = sorted({r["theta"] for r in ok})
    levels = [lvl for lvl in ("low", "medium", "high") if any(r["level"] == lvl for r in ok)]
    theta_monotone = {}
    for lvl in levels:
        tot = [r["total"] for t in thetas for r in ok if r["level"] == lvl and r["theta"] == t]
        theta_monotone[lvl] = all(a <= b * (1 + 1e-9) for a, b in zip(tot, tot[1:]))
    penalty_decreasing = {}
    for t in thetas:
        pen = [r["penalty"] for lvl in levels for r in ok if r["level"] == lvl and r["theta"] == t]
        penalty_decreasing[str(t)] = all(a >= b * (1 - 1e-9) for a, b in zip(pen, pen[1:]))
    return {
        "theta_monotone_total_per_level": theta_monotone,
        "penalty_decreasing_with_level_per_theta": penalty_decreasing,
    }


def cmd_sweep(args) -> int:
    try:
        load_instance_dir(args.instance_dir)
    except InstanceValidationError as exc:
        print(json.dumps({"errors": [i.as_dict() for i in exc.issues]}, indent=2))
        return EXIT_VALIDATION
    thetas = [float(t) for t in args.thetas.split(",") if t]
    levels = [lvl.strip() for lvl in args.levels.split(",") if lvl]
    t0 = time.perf_counter()
    rows = run_sweep(
        args.instance_dir, thetas, levels, eps=args.eps, max_iter=args.max_iter,
        workers=args.workers,
    )
    elapsed = time.perf_counter() - t0

    out = Path(args.output)
    fields = ["theta", "level", "status", "fixed", "incentive", "penalty",
              "total", "opened_count"]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([repr(r[f]) if isinstance(r.get(f), float) else r.get(f, "")
                        for f in fields])
    summary = sweep_summary(rows)
    summary["cells"] = len(rows)
    summary["wall_time_seconds"] = elapsed
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{len(rows)} cells -> {out} in {elapsed:.1f}s")
    for r in rows:
        if str(r["status"]).startswith("error"):
            print(f"cell theta={r['theta']} level={r['level']}: {r['status']}")
        else:
            print(
                f"theta={r['theta']} level={r['level']:<6} "
                f"total=${r['total']:,.2f} opened={r['opened_count']}"
            )
    print("summary:", json.dumps(summary))
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        inst = _load_with_overrides(args)
    except InstanceValidationError as exc:
        print(json.dumps({"errors": [i.as_dict() for i in exc.issues]}, indent=2))
        return EXIT_VALIDATION
    try:
        orc = oracle_solve(inst)
    except TooManySites as exc:
        print(f"guard violation: {exc}")
        return EXIT_GUARD
    rep = benders_solve(inst, eps=args.eps, max_iter=args.max_iter)
    gap = abs(rep.objective - orc.objective) / (1 + abs(orc.objective))
    print(f"decomposition objective: {rep.objective!r}")
    print(f"reference objective:     {orc.objective!r}")
    print(f"relative gap:            {gap:.3e}")
    return EXIT_OK if gap <= 1e-6 else 1


def cmd_generate(args) -> int:
    inst = generate_instance(
        seed=args.seed if args.seed is not None else 0,
        n_sites=args.sites,
        n_zones=args.zones,
        n_profiles=args.profiles,
        fixed_cost=args.fixed_cost,
        capacity=args.capacity,
        theta=args.theta if args.theta is not None else 0.5,
        incentive_level=args.level or "low",
        max_quantity=args.max_quantity,
    )
    write_instance(inst, args.output_dir)
    print(f"instance written to {args.output_dir}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, default=1e-6,
                        help="relative bound-gap tolerance (default 1e-6)")
    common.add_argument("--max-iter", type=int, default=500,
                        help="cut-generation iteration cap (default 500)")
    common.add_argument("--workers", type=int, default=1,
                        help="parallel workers for sweeps (default 1)")
    common.add_argument("--seed", type=int, default=None, help="generator seed")

    parser = argparse.ArgumentParser(
        prog="takeback",
        description="Plan drug take-back kiosk locations and incentives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check instance files", parents=[common])
    p.add_argument("instance_dir")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve one scenario", parents=[common])
    p.add_argument("instance_dir")
    p.add_argument("-o", "--output", help="write the JSON report here")
    p.add_argument("--csv-dir", help="also write assignment/trace CSVs here")
    p.add_argument("--theta", type=float, help="override scenario theta")
    p.add_argument("--level", help="override scenario incentive level")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve a theta x level grid", parents=[common])
    p.add_argument("instance_dir")
    p.add_argument("--thetas", default="0.5,0.8,1.0")
    p.add_argument("--levels", default="low,medium,high")
    p.add_argument("-o", "--output", required=True, help="tidy CSV path")
    p.add_argument("--summary", help="write trend summary JSON here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="cross-check against brute force",
                       parents=[common])
    p.add_argument("instance_dir")
    p.add_argument("--theta", type=float, help="override scenario theta")
    p.add_argument("--level", help="override scenario incentive level")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("generate", help="write a random instance", parents=[common])
    p.add_argument("output_dir")
    p.add_argument("--sites", type=int, default=6)
    p.add_argument("--zones", type=int, default=3)
    p.add_argument("--profiles", type=int, default=2)
    p.add_argument("--fixed-cost", type=float, default=2000.0)
    p.add_argument("--capacity", type=float, default=None)
    p.add_argument("--max-quantity", type=float, default=60000.0)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--level", default=None)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    return args.func(args)


def run() -> None:
    sys.exit(main())
