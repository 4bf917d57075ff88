"""Exact brute-force reference solver for small instances.

Enumerates every subset of kiosk sites; for each subset the remaining
decision is a transportation problem (ship pills from zone-profile
demands to open reachable kiosks at the floor offer price per pill,
with an always-available penalty arc for the shortfall) whose optimum
is found with scipy's HiGHS solver.  Nothing here touches the
production cut-generation path, so agreement between the two is a
genuine cross-check.

Subset evaluations are independent of each other and safe to run
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .errors import SolverError, TooManySites
from .model import DerivedParams, Instance

ENUMERATION_GUARD = 20


@dataclass(frozen=True)
class SubsetRecord:
    open_sites: tuple[int, ...]
    fixed_cost: float
    routing_cost: float

    @property
    def total(self) -> float:
        return self.fixed_cost + self.routing_cost


@dataclass
class OracleResult:
    best_open_set: tuple[int, ...]   # positional site indices
    objective: float
    per_subset: Optional[list[SubsetRecord]] = field(default=None)


def _routing_cost(
    open_idx: np.ndarray,
    reach_pairs: np.ndarray,
    arc_cost_pp: np.ndarray,
    capacities: np.ndarray,
    demand: np.ndarray,
    penalty_pp: float,
) -> float:
    """Transportation optimum for one subset of open sites.

    reach_pairs[i, jp] marks usable arcs, arc_cost_pp the per-pill offer
    cost; demands with no usable arc pay the penalty outright.
    """
    if open_idx.size == 0:
        return penalty_pp * float(demand.sum())
    sub_reach = reach_pairs[open_idx]
    usable = sub_reach.any(axis=0)
    base = penalty_pp * float(demand[~usable].sum())
    if not usable.any():
        return base
    rows = open_idx
    cols = np.nonzero(usable)[0]
    ai, aj = np.nonzero(sub_reach[:, cols])
    n_arc, n_dem = ai.size, cols.size
    c = np.concatenate(
        [arc_cost_pp[rows[ai], cols[aj]], np.full(n_dem, penalty_pp)]
    )
    A = np.zeros((rows.size + n_dem, n_arc + n_dem))
    for k in range(n_arc):
        A[ai[k], k] = 1.0
        A[rows.size + aj[k], k] = -1.0
    for j in range(n_dem):
        A[rows.size + j, n_arc + j] = -1.0
    b = np.concatenate([capacities[rows], -demand[cols]])
    res = linprog(c, A_ub=A, b_ub=b, method="highs")
    if res.status != 0:
        raise SolverError(f"reference transportation solve failed: {res.message}")
    return base + float(res.fun)


def oracle_solve(
    inst: Instance,
    dp: Optional[DerivedParams] = None,
    keep_log: bool = False,
) -> OracleResult:
    """Exact optimum by subset enumeration; guard at 20 sites."""
    from .model import derive_params

    if dp is None:
        dp = derive_params(inst)
    m = len(inst.sites)
    if m > ENUMERATION_GUARD:
        raise TooManySites(
            f"{m} sites exceeds the enumeration guard of {ENUMERATION_GUARD}"
        )

    n, p = dp.target.shape
    reach_pairs = dp.reachable.reshape(m, n * p)
    floor = dp.travel_cost[:, :, None] + dp.reservation[None, None, :]
    arc_cost_pp = (floor / inst.scenario.pills_per_prescription).reshape(m, n * p)
    demand = dp.target.reshape(n * p)
    fixed = inst.fixed_costs

    best_set: tuple[int, ...] = ()
    best_obj = np.inf
    log: list[SubsetRecord] = [] if keep_log else None

    for mask in range(1 << m):
        open_idx = np.array(
            [i for i in range(m) if mask >> i & 1], dtype=np.int64
        )
        fc = float(fixed[open_idx].sum())
        if fc >= best_obj and not keep_log:
            continue
        rc = _routing_cost(
            open_idx, reach_pairs, arc_cost_pp, inst.capacities, demand,
            dp.per_pill_penalty,
        )
        total = fc + rc
        if keep_log:
            log.append(SubsetRecord(tuple(open_idx.tolist()), fc, rc))
        if total < best_obj:
            best_obj = total
            best_set = tuple(open_idx.tolist())

    return OracleResult(best_open_set=best_set, objective=best_obj, per_subset=log)
