"""Branch-and-bound for linear programs with binary variables.

Node relaxations are solved by :mod:`takeback.simplex`.  Node selection
is best-bound; the branching variable is the most fractional binary with
ties broken by the lowest index, so runs are deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleProgram, NodeLimitExceeded, SolverError
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, solve_lp

INTEGRALITY_TOL = 1e-6
DEFAULT_NODE_LIMIT = 1_000_000


@dataclass(frozen=True)
class MixedProgram:
    """A LinearProgram plus the variable indices required to be binary."""

    lp: LinearProgram
    binary: tuple[int, ...]

    def __post_init__(self):
        for j in self.binary:
            if not (0 <= j < self.lp.n_vars):
                raise ValueError(f"binary index {j} out of range")
            if self.lp.lb[j] < 0.0 or self.lp.ub[j] > 1.0:
                raise ValueError(
                    f"binary variable {j} must have bounds within [0, 1], "
                    f"got [{self.lp.lb[j]}, {self.lp.ub[j]}]"
                )


@dataclass
class MipSolution:
    status: str
    x: np.ndarray
    objective: float
    node_count: int
    gap: float
    bound_trace: list[float] = field(default_factory=list)


def _most_fractional(x: np.ndarray, binary: Sequence[int]) -> Optional[int]:
    best_j, best_frac = None, INTEGRALITY_TOL
    for j in binary:
        frac = min(x[j] - np.floor(x[j]), np.ceil(x[j]) - x[j])
        if frac > best_frac:
            best_j, best_frac = j, frac
    return best_j


def solve_mip(
    mp: MixedProgram,
    gap_tol: float = 1e-9,
    node_limit: int = DEFAULT_NODE_LIMIT,
    tol: float = 1e-9,
) -> MipSolution:
    """Minimize a MixedProgram to within ``gap_tol`` relative gap.

    Raises InfeasibleProgram when no integral-feasible point exists and
    NodeLimitExceeded when the node cap is hit first.
    """
    lp = mp.lp
    base_lb = np.asarray(lp.lb, dtype=float)
    base_ub = np.asarray(lp.ub, dtype=float)

    incumbent_x: Optional[np.ndarray] = None
    incumbent_obj = np.inf
    node_count = 0
    counter = 0
    bound_trace: list[float] = []

    # Heap of (parent bound, insertion counter, lb overrides, ub overrides).
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = []
    heapq.heappush(heap, (-np.inf, counter, base_lb, base_ub))

    def rel_gap() -> float:
        if incumbent_obj == np.inf:
            return np.inf
        best_open = heap[0][0] if heap else incumbent_obj
        return max(0.0, (incumbent_obj - min(best_open, incumbent_obj))) / (
            1.0 + abs(incumbent_obj)
        )

    while heap:
        bound, _cnt, node_lb, node_ub = heapq.heappop(heap)
        if bound >= incumbent_obj - gap_tol * (1.0 + abs(incumbent_obj)):
            continue
        if node_count >= node_limit:
            raise NodeLimitExceeded(
                f"node limit {node_limit} reached",
                best=MipSolution(
                    "node_limit",
                    incumbent_x if incumbent_x is not None else np.array([]),
                    incumbent_obj,
                    node_count,
                    rel_gap(),
                    bound_trace,
                ),
            )
        node_count += 1

        sol = solve_lp(lp.replace_bounds(node_lb, node_ub), tol=tol)
        if sol.status == INFEASIBLE:
            continue
        if sol.status == UNBOUNDED:
            raise SolverError("relaxation is unbounded; mixed program is ill-posed")
        assert sol.status == OPTIMAL
        bound_trace.append(max(bound, -1e300))
        if sol.objective >= incumbent_obj - gap_tol * (1.0 + abs(incumbent_obj)):
            continue

        j = _most_fractional(sol.x, mp.binary)
        if j is None:
            x = sol.x.copy()
            x[list(mp.binary)] = np.round(x[list(mp.binary)])
            incumbent_x, incumbent_obj = x, sol.objective
            continue

        counter += 1
        down_ub = node_ub.copy()
        down_ub[j] = 0.0
        heapq.heappush(heap, (sol.objective, counter, node_lb, down_ub))
        counter += 1
        up_lb = node_lb.copy()
        up_lb[j] = 1.0
        heapq.heappush(heap, (sol.objective, counter, up_lb, node_ub))

    if incumbent_x is None:
        raise InfeasibleProgram("no integral-feasible point found")
    return MipSolution(OPTIMAL, incumbent_x, incumbent_obj, node_count, 0.0, bound_trace)
