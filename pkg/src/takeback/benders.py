"""Two-stage cut-generation solver for the kiosk campaign problem.

Stage one decides which kiosks open and what incentive schedule is
offered; stage two, with those fixed, routes returned pills to open
kiosks and absorbs any shortfall at the per-pill penalty.  The loop:

    1. evaluate the stage-two problem for the current openings,
    2. turn its dual values into an affine lower bound (a cut) on the
       stage-two cost as a function of the openings,
    3. re-solve the stage-one problem with all cuts so far,
    4. stop when the bound gap closes or the openings repeat.

Incentives are held at their pointwise floor, travel cost plus the
profile's reservation incentive, for every reachable site-zone-profile
triple: any larger offer only inflates the payout term, so the floor is
optimal, and with offers at the floor the stage-two LP relaxation has an
integral assignment interpretation and is exact.

Stage two is solved through its transportation-form reduction (shipping
pills from zone-profile demands to open reachable kiosks, with a
penalty arc for the shortfall).  The dual families of the dropped
constraint rows are completed analytically afterwards; the completed
vector is dual-feasible and complementary for the full five-row-family
formulation, makes every cut exactly tight at its generating openings,
and is what :func:`build_cut` consumes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DualUnavailable, SolverError
from .mip import MixedProgram, solve_mip
from .model import DerivedParams, Instance
from .simplex import OPTIMAL, LinearProgram, solve_lp

# Pills below this count as no flow when reporting assignments.
ASSIGN_TOL = 1e-7


@dataclass(frozen=True)
class FirstStageDecision:
    """Kiosk openings plus the per-triple incentive offer."""

    open: np.ndarray          # (sites,) bool
    incentive: np.ndarray     # (sites, zones, profiles) dollars/prescription
    recourse_value: float = 0.0

    def opened_count(self) -> int:
        return int(np.count_nonzero(self.open))


@dataclass(frozen=True)
class SubproblemSolution:
    """Optimal stage-two routing with the five dual families.

    Dual sign convention follows the simplex module: duals of <= rows
    are <= 0, duals of >= rows are >= 0.

    assigned[i,j,p]            1.0 when profile p in zone j returns to site i
    returned[i,j,p]            pills routed along that triple
    unreturned[j,p]            target shortfall absorbed by the penalty
    open_link_duals[i,j,p]     rows "assignment needs an open reachable site"
    arc_link_duals[i,j,p]      rows "arc flow needs its assignment"
    site_capacity_duals[i]     rows "site inflow within capacity"
    coverage_duals[j,p]        rows "returns + shortfall reach the target"
    offer_cap_duals[i,j,p]     rows "assignment needs a covering offer"
    """

    assigned: np.ndarray
    returned: np.ndarray
    unreturned: np.ndarray
    objective: float
    open_link_duals: np.ndarray
    arc_link_duals: np.ndarray
    site_capacity_duals: np.ndarray
    coverage_duals: np.ndarray
    offer_cap_duals: np.ndarray
    status: str = OPTIMAL


@dataclass(frozen=True)
class OptimalityCut:
    """Affine lower bound on stage-two cost: u >= constant + coeff . Y."""

    constant: float
    open_coeff: np.ndarray    # (sites,)

    def value_at(self, open_vec: np.ndarray) -> float:
        return self.constant + float(self.open_coeff @ np.asarray(open_vec, float))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    lower_bound: float
    upper_bound: float
    gap: float
    opened: tuple[bool, ...]
    opened_count: int
    subproblem_objective: float
    cut_constant: float


@dataclass
class BendersTrace:
    records: list[IterationRecord] = field(default_factory=list)
    cuts: list[OptimalityCut] = field(default_factory=list)


@dataclass
class SolveReport:
    """Final solver output: incumbent solution, costs and the bound trace."""

    status: str                      # "optimal" | "iteration_limit"
    objective: float
    gap: float
    iterations: int
    opened: np.ndarray               # (sites,) bool
    incentive: np.ndarray            # (sites, zones, profiles)
    returned: np.ndarray             # (sites, zones, profiles)
    unreturned: np.ndarray           # (zones, profiles)
    fixed_cost: float
    incentive_cost: float
    penalty_cost: float
    trace: BendersTrace
    wall_time: float


def initial_decision(inst: Instance, dp: DerivedParams) -> FirstStageDecision:
    """Open everything and offer every reachable triple its floor price.

    Opening all sites makes the first stage-two evaluation as permissive
    as possible; unreachable triples get no offer since no return can
    happen there anyway.
    """
    m = len(inst.sites)
    floor = dp.travel_cost[:, :, None] + dp.reservation[None, None, :]
    incentive = np.where(dp.reachable, floor, 0.0)
    return FirstStageDecision(open=np.ones(m, dtype=bool), incentive=incentive)


def solve_subproblem(
    inst: Instance, dp: DerivedParams, dec: FirstStageDecision
) -> SubproblemSolution:
    """Optimal stage-two routing for fixed openings and offers.

    Never infeasible: the shortfall variables absorb any unmet target.
    """
    m, n, p = dp.reachable.shape
    ppx = inst.scenario.pills_per_prescription
    pen = dp.per_pill_penalty
    target = dp.target

    open_vec = np.asarray(dec.open, dtype=bool)
    arc_mask = dp.reachable & open_vec[:, None, None]
    arc_i, arc_j, arc_p = np.nonzero(arc_mask)
    arc_cost = dec.incentive[arc_i, arc_j, arc_p] / ppx

    lp = LinearProgram()
    arc_vars = np.array(
        [lp.add_var(obj=c) for c in arc_cost], dtype=np.int64
    )
    short_vars = np.array(
        [lp.add_var(obj=pen) for _ in range(n * p)], dtype=np.int64
    ).reshape(n, p)

    open_sites = np.nonzero(open_vec)[0]
    cap_row_of_site = {}
    for i in open_sites:
        sel = np.nonzero(arc_i == i)[0]
        cap_row_of_site[int(i)] = lp.add_row(
            arc_vars[sel], np.ones(sel.size), "<=", inst.capacities[i]
        )
    cov_row = np.empty((n, p), dtype=np.int64)
    for j in range(n):
        for q in range(p):
            sel = np.nonzero((arc_j == j) & (arc_p == q))[0]
            idx = list(arc_vars[sel]) + [int(short_vars[j, q])]
            cov_row[j, q] = lp.add_row(
                idx, np.ones(len(idx)), ">=", target[j, q]
            )

    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        raise SolverError(f"stage-two solve unexpectedly {sol.status}")

    returned = np.zeros((m, n, p))
    returned[arc_i, arc_j, arc_p] = sol.x[arc_vars]
    returned[returned < ASSIGN_TOL] = 0.0
    unreturned = np.maximum(sol.x[short_vars.ravel()].reshape(n, p), 0.0)
    assigned = (returned > 0.0).astype(float)

    gamma = np.zeros(m)
    for i, row in cap_row_of_site.items():
        gamma[i] = min(0.0, sol.duals[row])
    delta = np.maximum(sol.duals[cov_row.ravel()].reshape(n, p), 0.0)

    # Analytic completion of the dual families whose rows were reduced
    # away.  Closed sites concentrate their potential savings in the
    # capacity dual; the assignment-link rows then absorb whatever the
    # offer cost cannot cover, keeping the full system dual-feasible.
    offer_rc = dec.incentive / ppx - delta[None, :, :]
    closed = ~open_vec
    if np.any(closed) and n * p:
        best = np.where(dp.reachable[closed], offer_rc[closed], np.inf)
        best = best.reshape(int(closed.sum()), -1).min(axis=1)
        gamma[closed] = np.minimum(0.0, np.where(np.isfinite(best), best, 0.0))
    beta = np.minimum(0.0, offer_rc - gamma[:, None, None])
    beta[arc_mask] = 0.0
    alpha = inst.capacities[:, None, None] * beta
    phi = np.zeros((m, n, p))

    objective = float(
        np.sum(returned * dec.incentive) / ppx + pen * float(np.sum(unreturned))
    )
    return SubproblemSolution(
        assigned=assigned,
        returned=returned,
        unreturned=unreturned,
        objective=objective,
        open_link_duals=alpha,
        arc_link_duals=beta,
        site_capacity_duals=gamma,
        coverage_duals=delta,
        offer_cap_duals=phi,
    )


def build_cut(
    inst: Instance,
    dp: DerivedParams,
    dec: FirstStageDecision,
    sub: SubproblemSolution,
) -> OptimalityCut:
    """Optimality cut from the stage-two duals.

    The opening coefficients collect the open-link duals over reachable
    triples plus capacity duals scaled by capacity; the constant collects
    the arc-link, coverage and offer-cap terms evaluated at the
    generating assignment.  By strong duality the cut equals the
    stage-two objective at the generating openings and never exceeds it
    elsewhere.
    """
    if sub.status != OPTIMAL:
        raise DualUnavailable("stage-two solve did not reach optimality")
    reach = dp.reachable.astype(float)
    coeff = (
        np.sum(sub.open_link_duals * reach, axis=(1, 2))
        + sub.site_capacity_duals * inst.capacities
    )
    floor = dp.travel_cost[:, :, None] + dp.reservation[None, None, :]
    constant = float(
        np.sum(sub.arc_link_duals * inst.capacities[:, None, None] * sub.assigned)
        + np.sum(sub.coverage_duals * dp.target)
        + np.sum(sub.offer_cap_duals * sub.assigned * np.where(dp.reachable, floor, 0.0))
    )
    return OptimalityCut(constant=constant, open_coeff=coeff)


def solve_master(
    inst: Instance,
    dp: DerivedParams,
    cuts: Sequence[OptimalityCut],
    w_bar: np.ndarray,
) -> FirstStageDecision:
    """Stage-one problem: openings, offers and the recourse bound.

    Minimizes recourse + fixed costs subject to every cut; offers are
    floor-bounded at the generating assignment's covering price, which
    is where the simplex leaves them since they carry no cost.
    """
    m, n, p = dp.reachable.shape
    floor = dp.travel_cost[:, :, None] + dp.reservation[None, None, :]
    offer_lb = np.where(np.asarray(w_bar) > 0.5, np.where(dp.reachable, floor, 0.0), 0.0)

    lp = LinearProgram()
    u = lp.add_var(lb=0.0, obj=1.0, name="recourse")
    y_vars = [
        lp.add_var(lb=0.0, ub=1.0, obj=inst.fixed_costs[i], name=f"open[{i}]")
        for i in range(m)
    ]
    r_vars = np.array(
        [lp.add_var(lb=v) for v in offer_lb.ravel()], dtype=np.int64
    ).reshape(m, n, p)
    for cut in cuts:
        lp.add_row(
            [u] + y_vars, np.concatenate([[1.0], -cut.open_coeff]), ">=", cut.constant
        )

    sol = solve_mip(MixedProgram(lp, tuple(y_vars)), gap_tol=1e-9)
    open_vec = sol.x[y_vars] > 0.5 if m else np.zeros(0, dtype=bool)
    incentive = sol.x[r_vars.ravel()].reshape(m, n, p) if m * n * p else np.zeros((m, n, p))
    return FirstStageDecision(
        open=open_vec, incentive=incentive, recourse_value=float(sol.x[u])
    )


def benders_solve(
    inst: Instance,
    dp: Optional[DerivedParams] = None,
    eps: float = 1e-6,
    max_iter: int = 500,
) -> SolveReport:
    """Run the cut-generation loop to the requested relative gap.

    Stops when (upper - lower) <= eps * (1 + |upper|), when the openings
    repeat between consecutive iterations, or at ``max_iter`` (status
    "iteration_limit", best incumbent returned with its gap).
    """
    from .model import derive_params

    if eps <= 0:
        raise ValueError("eps must be positive")
    if dp is None:
        dp = derive_params(inst)

    t0 = time.perf_counter()
    dec = initial_decision(inst, dp)
    offer_schedule = dec.incentive
    fixed_costs = inst.fixed_costs

    trace = BendersTrace()
    cuts: list[OptimalityCut] = []
    upper = np.inf
    incumbent: Optional[tuple[FirstStageDecision, SubproblemSolution]] = None
    status = "iteration_limit"
    gap = np.inf

    for it in range(1, max_iter + 1):
        sub = solve_subproblem(inst, dp, dec)
        total = float(fixed_costs @ dec.open) + sub.objective
        if total < upper:
            upper = total
            incumbent = (dec, sub)

        cut = build_cut(inst, dp, dec, sub)
        cuts.append(cut)
        trace.cuts.append(cut)

        mdec = solve_master(inst, dp, cuts, sub.assigned)
        lower = mdec.recourse_value + float(fixed_costs @ mdec.open)
        gap = (upper - lower) / (1.0 + abs(upper))

        trace.records.append(
            IterationRecord(
                iteration=it,
                lower_bound=lower,
                upper_bound=upper,
                gap=gap,
                opened=tuple(bool(v) for v in dec.open),
                opened_count=dec.opened_count(),
                subproblem_objective=sub.objective,
                cut_constant=cut.constant,
            )
        )

        if gap <= eps:
            status = "optimal"
            break
        if np.array_equal(mdec.open, dec.open):
            # Repeated openings mean the newest cut already prices this
            # decision exactly; the incumbent is optimal.
            status = "optimal"
            break
        dec = FirstStageDecision(
            open=mdec.open,
            incentive=offer_schedule,
            recourse_value=mdec.recourse_value,
        )

    assert incumbent is not None
    best_dec, best_sub = incumbent
    fixed = float(fixed_costs @ best_dec.open)
    ppx = inst.scenario.pills_per_prescription
    incentive_cost = float(np.sum(best_sub.returned * best_dec.incentive)) / ppx
    penalty_cost = dp.per_pill_penalty * float(np.sum(best_sub.unreturned))
    return SolveReport(
        status=status,
        objective=upper,
        gap=max(gap, 0.0),
        iterations=len(trace.records),
        opened=best_dec.open.copy(),
        incentive=best_dec.incentive.copy(),
        returned=best_sub.returned.copy(),
        unreturned=best_sub.unreturned.copy(),
        fixed_cost=fixed,
        incentive_cost=incentive_cost,
        penalty_cost=penalty_cost,
        trace=trace,
        wall_time=time.perf_counter() - t0,
    )


def export_trace(report: SolveReport, path) -> None:
    """Write one JSON record per iteration for external tooling."""
    with open(path, "w") as fh:
        for rec in report.trace.records:
            fh.write(
                json.dumps(
                    {
                        "iter": rec.iteration,
                        "lb": rec.lower_bound,
                        "ub": rec.upper_bound,
                        "gap": rec.gap,
                        "opened_count": rec.opened_count,
                        "cut_constant": rec.cut_constant,
                    }
                )
                + "\n"
            )
