"""Self-contained linear-programming engine with dual extraction.

Solves ``min c.x  s.t.  rows, l <= x <= u`` with a bounded-variable
primal simplex (two-phase start, Dantzig pricing, Bland's rule fallback
for anti-cycling).  The returned solution carries one dual value per
constraint row under the convention, for a minimization problem:

    duals of >= rows are >= 0,
    duals of <= rows are <= 0,
    duals of  = rows are unrestricted.

After the pivot loop terminates, primal values, duals and reduced costs
are recomputed exactly from the final basis factorization, so strong
duality holds to machine precision on every optimal result.

Concurrency: a LinearProgram is immutable once built (the solver never
mutates it); each solve works on private copies, so distinct programs
may be solved from concurrent threads or processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ._kernels import (
    ITER_LIMIT,
    OPT_CANDIDATE,
    PIVOT_BREAKDOWN,
    UNBOUNDED_CANDIDATE,
    active_backend,
    active_pivot_loop,
)
from .errors import NumericalBreakdown

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

RELATIONS = ("<=", ">=", "=")

DEFAULT_TOL = 1e-9

# Observers receive every LpSolution the engine produces; used by the
# verification suite to audit strong duality across whole solver runs.
_observers: list[Callable[["LpSolution"], None]] = []


def add_solution_observer(fn: Callable[["LpSolution"], None]) -> None:
    _observers.append(fn)


def remove_solution_observer(fn: Callable[["LpSolution"], None]) -> None:
    _observers.remove(fn)


class LinearProgram:
    """A minimization LP built incrementally.

    Variables are added with bounds and an objective coefficient; rows
    with sparse coefficients, a relation and a right-hand side.
    """

    def __init__(self):
        self.obj: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.var_names: list[str] = []
        self.rows: list[tuple[np.ndarray, np.ndarray, str, float]] = []

    @property
    def n_vars(self) -> int:
        return len(self.obj)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(
        self,
        lb: float = 0.0,
        ub: float = np.inf,
        obj: float = 0.0,
        name: str = "",
    ) -> int:
        if np.isnan(lb) or np.isnan(ub) or not np.isfinite(obj):
            raise ValueError(f"bad variable data: lb={lb} ub={ub} obj={obj}")
        if lb > ub:
            raise ValueError(f"variable bounds cross: [{lb}, {ub}]")
        self.obj.append(float(obj))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.var_names.append(name or f"x{len(self.obj) - 1}")
        return len(self.obj) - 1

    def add_row(
        self,
        indices: Sequence[int],
        values: Sequence[float],
        rel: str,
        rhs: float,
    ) -> int:
        if rel not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}, got {rel!r}")
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=float)
        if idx.shape != val.shape:
            raise ValueError("indices and values must have matching length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_vars):
            raise ValueError("row references a variable that does not exist")
        if not np.all(np.isfinite(val)) or not np.isfinite(rhs):
            raise ValueError("row coefficients and rhs must be finite")
        self.rows.append((idx, val, rel, float(rhs)))
        return len(self.rows) - 1

    def replace_bounds(self, lb: Sequence[float], ub: Sequence[float]) -> "LinearProgram":
        """A copy with new variable bounds, sharing the row storage."""
        clone = LinearProgram.__new__(LinearProgram)
        clone.obj = self.obj
        clone.lb = list(lb)
        clone.ub = list(ub)
        clone.var_names = self.var_names
        clone.rows = self.rows
        return clone

    def dump(self, path) -> None:
        """Write the model in the plain-text format described in the README.

        One constraint per line; floats via repr so the dump is bit-exact.
        """
        out = ["takeback-lp 1", "minimize", f"vars {self.n_vars}"]
        for j in range(self.n_vars):
            out.append(
                f"var {j} {self.lb[j]!r} {self.ub[j]!r} {self.obj[j]!r} "
                f"{self.var_names[j]}"
            )
        out.append(f"rows {self.n_rows}")
        for r, (idx, val, rel, rhs) in enumerate(self.rows):
            terms = " ".join(f"{int(j)}:{float(v)!r}" for j, v in zip(idx, val))
            out.append(f"row {r} {rel} {rhs!r} {idx.size} {terms}".rstrip())
        out.append("end")
        Path(path).write_text("\n".join(out) + "\n")


def parse_lp_dump(path) -> LinearProgram:
    """Read a model file written by :meth:`LinearProgram.dump`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "takeback-lp 1":
        raise ValueError("not a takeback-lp 1 file")
    lp = LinearProgram()
    for line in lines[1:]:
        parts = line.split()
        if not parts or parts[0] in ("minimize", "vars", "rows", "end"):
            continue
        if parts[0] == "var":
            lp.add_var(
                lb=float(parts[2]),
                ub=float(parts[3]),
                obj=float(parts[4]),
                name=parts[5] if len(parts) > 5 else "",
            )
        elif parts[0] == "row":
            rel, rhs = parts[2], float(parts[3])
            nnz = int(parts[4])
            idx, val = [], []
            for term in parts[5 : 5 + nnz]:
                j, v = term.split(":")
                idx.append(int(j))
                val.append(float(v))
            lp.add_row(idx, val, rel, rhs)
    return lp


@dataclass
class LpSolution:
    """Result of one LP solve.

    ``x`` and ``duals`` are populated on optimal results; ``certificate``
    carries an unbounded primal ray or the phase-one dual vector proving
    infeasibility.
    """

    status: str
    x: Optional[np.ndarray]
    duals: Optional[np.ndarray]
    objective: Optional[float]
    dual_objective: Optional[float]
    iterations: int
    certificate: Optional[np.ndarray] = None


class _StandardForm:
    """Equality standard form with slacks plus phase-one artificials."""

    def __init__(self, lp: LinearProgram):
        m, n = lp.n_rows, lp.n_vars
        self.n_struct = n
        self.m = m
        nnz_rows = lp.rows

        self.lb = np.concatenate([np.asarray(lp.lb, dtype=float), np.zeros(m)])
        self.ub = np.concatenate([np.asarray(lp.ub, dtype=float), np.zeros(m)])
        self.c = np.concatenate([np.asarray(lp.obj, dtype=float), np.zeros(m)])
        self.b = np.array([row[3] for row in nnz_rows], dtype=float)

        A = np.zeros((m, n + m))
        for r, (idx, val, rel, _rhs) in enumerate(nnz_rows):
            np.add.at(A[r], idx, val)
            A[r, n + r] = 1.0
            if rel == "<=":
                self.lb[n + r], self.ub[n + r] = 0.0, np.inf
            elif rel == ">=":
                self.lb[n + r], self.ub[n + r] = -np.inf, 0.0
            else:
                self.lb[n + r], self.ub[n + r] = 0.0, 0.0

        # Initial nonbasic placement of structural variables and slacks.
        stat = np.empty(n + m, dtype=np.int8)
        for j in range(n + m):
            if self.lb[j] == self.ub[j]:
                stat[j] = 4
            elif np.isfinite(self.lb[j]):
                stat[j] = 0
            elif np.isfinite(self.ub[j]):
                stat[j] = 1
            else:
                stat[j] = 3
        values = _nonbasic_values(stat, self.lb, self.ub)
        resid = self.b - A[:, :n] @ values[:n]

        # Columns appearing in exactly one row can seed the basis when the
        # slack cannot; this skips phase one on transportation-shaped rows.
        col_nnz = np.count_nonzero(A[:, :n], axis=0) if m else np.zeros(n, int)
        singletons: dict[int, list[int]] = {}
        for j in np.nonzero(col_nnz == 1)[0]:
            r = int(np.nonzero(A[:, j])[0][0])
            singletons.setdefault(r, []).append(int(j))

        # Use each row's slack as the initial basic variable when its
        # bounds allow, then try a structural singleton column; otherwise
        # clamp the slack and add an artificial.
        basis = np.empty(m, dtype=np.int64)
        xB = np.empty(m)
        art_cols: list[np.ndarray] = []
        for r in range(m):
            s = n + r
            clamped = min(max(resid[r], self.lb[s]), self.ub[s])
            leftover = resid[r] - clamped
            if leftover == 0.0 and self.lb[s] < self.ub[s]:
                basis[r] = s
                stat[s] = 2
                xB[r] = resid[r]
                continue
            crashed = False
            for j in singletons.get(r, ()):
                if stat[j] in (2, 4):
                    continue
                vj = values[j] + leftover / A[r, j]
                if self.lb[j] <= vj <= self.ub[j]:
                    stat[s] = 4 if self.lb[s] == self.ub[s] else (
                        0 if clamped == self.lb[s] else 1
                    )
                    stat[j] = 2
                    basis[r] = j
                    xB[r] = vj
                    crashed = True
                    break
            if crashed:
                continue
            stat[s] = 4 if self.lb[s] == self.ub[s] else (
                0 if clamped == self.lb[s] else 1
            )
            col = np.zeros(m)
            col[r] = 1.0 if leftover >= 0.0 else -1.0
            art_cols.append(col)
            basis[r] = n + m + len(art_cols) - 1
            xB[r] = abs(leftover)

        n_art = len(art_cols)
        if n_art:
            A = np.hstack([A, np.column_stack(art_cols)])
            self.lb = np.concatenate([self.lb, np.zeros(n_art)])
            self.ub = np.concatenate([self.ub, np.full(n_art, np.inf)])
            self.c = np.concatenate([self.c, np.zeros(n_art)])
            stat = np.concatenate([stat, np.full(n_art, 2, dtype=np.int8)])

        self.A = A
        self.stat = stat
        self.basis = basis
        self.xB = xB
        self.n_art = n_art
        self.c_phase1 = np.zeros(A.shape[1])
        if n_art:
            self.c_phase1[n + m :] = 1.0


def _nonbasic_values(stat: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    values = np.where(stat == 1, ub, np.where(stat == 3, 0.0, lb))
    return np.where(np.isfinite(values), values, 0.0)


def _recompute(A, b, c, lb, ub, basis, stat):
    """Exact tableau, basic values and reduced costs from the basis."""
    B = A[:, basis]
    try:
        Binv_A = np.linalg.solve(B, A)
        values = _nonbasic_values(stat, lb, ub)
        values[basis] = 0.0
        xB = np.linalg.solve(B, b - A @ values)
        y = np.linalg.solve(B.T, c[basis])
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"singular basis during refresh: {exc}") from exc
    d = c - y @ A
    d[basis] = 0.0
    return Binv_A, xB, d, y


def _price_violation(d, stat, tol):
    viol = np.where(
        stat == 0, d, np.where(stat == 1, -d, np.where(stat == 3, -np.abs(d), 0.0))
    )
    return viol.min() < -tol if viol.size else False


def _run_phase(sf, c, tol, max_iter):
    """Drive the pivot kernel, refreshing from the factorization whenever
    it proposes to stop, so termination decisions use exact numbers."""
    loop = active_pivot_loop()
    T, xB, d, _y = _recompute(sf.A, sf.b, c, sf.lb, sf.ub, sf.basis, sf.stat)
    sf.xB = xB
    bland = False
    total_iters = 0
    for _refreshes in range(8):
        code, iters, e, sdir, bland = loop(
            T, sf.xB, d, sf.basis, sf.stat, sf.lb, sf.ub, tol, max_iter, bland
        )
        total_iters += iters
        T, xB, d, _y = _recompute(sf.A, sf.b, c, sf.lb, sf.ub, sf.basis, sf.stat)
        sf.xB = xB
        if code == OPT_CANDIDATE or code == PIVOT_BREAKDOWN:
            if _price_violation(d, sf.stat, tol):
                continue
            return "optimal", total_iters, None
        if code == UNBOUNDED_CANDIDATE:
            # Verify the ray against exact numbers before reporting.
            w = sdir * T[:, e]
            lbB, ubB = sf.lb[sf.basis], sf.ub[sf.basis]
            blocked = np.any(
                ((w > 1e-9) & np.isfinite(lbB)) | ((w < -1e-9) & np.isfinite(ubB))
            )
            own_room = (
                np.isinf(sf.ub[e] - sf.lb[e]) if sf.stat[e] != 3 else True
            )
            improving = (sdir > 0 and d[e] < -tol) or (sdir < 0 and d[e] > tol)
            if not blocked and own_room and improving:
                return "unbounded", total_iters, (e, sdir, T[:, e].copy())
            continue
        if code == ITER_LIMIT:
            raise NumericalBreakdown(
                f"simplex iteration budget exhausted ({total_iters} pivots)"
            )
    raise NumericalBreakdown("simplex failed to converge after repeated refreshes")


def solve_lp(
    lp: LinearProgram, tol: float = DEFAULT_TOL, max_iter: Optional[int] = None
) -> LpSolution:
    """Solve a LinearProgram; see the module docstring for guarantees.

    Raises NumericalBreakdown when pivoting stalls below the magnitude
    threshold (or a basis turns singular) despite anti-cycling recovery
    and exact refreshes.
    """
    n, m = lp.n_vars, lp.n_rows
    if max_iter is None:
        max_iter = 20000 + 40 * (n + m)

    if n == 0 and m == 0:
        return _notify(
            LpSolution(OPTIMAL, np.zeros(0), np.zeros(0), 0.0, 0.0, 0)
        )

    sf = _StandardForm(lp)
    iters = 0

    if sf.n_art:
        status, iters, _ray = _run_phase(sf, sf.c_phase1, tol, max_iter)
        if status != "optimal":
            raise NumericalBreakdown("phase one cannot be unbounded; basis corrupt")
        _T, xB, _d, y1 = _recompute(
            sf.A, sf.b, sf.c_phase1, sf.lb, sf.ub, sf.basis, sf.stat
        )
        sf.xB = xB
        art_total = float(np.sum(np.abs(xB[np.asarray(sf.basis) >= n + m])))
        scale = 1.0 + float(np.max(np.abs(sf.b))) if m else 1.0
        if art_total > 1e-7 * scale:
            return _notify(
                LpSolution(INFEASIBLE, None, None, None, None, iters, certificate=y1)
            )
        # Pin the artificials at zero for phase two.
        sf.ub[n + m :] = 0.0
        sf.stat[n + m :] = np.where(sf.stat[n + m :] == 2, 2, 4)

    status, phase2_iters, ray = _run_phase(sf, sf.c, tol, max_iter)
    iters += phase2_iters

    if status == "unbounded":
        e, sdir, col = ray
        direction = np.zeros(sf.A.shape[1])
        direction[e] = sdir
        direction[sf.basis] = -sdir * col
        return _notify(
            LpSolution(
                UNBOUNDED, None, None, None, None, iters,
                certificate=direction[:n].copy(),
            )
        )

    _T, xB, d, y = _recompute(sf.A, sf.b, sf.c, sf.lb, sf.ub, sf.basis, sf.stat)
    values = _nonbasic_values(sf.stat, sf.lb, sf.ub)
    values[sf.basis] = xB
    x = values[:n].copy()
    objective = float(np.asarray(lp.obj) @ x)
    nonbasic = np.ones(sf.A.shape[1], dtype=bool)
    nonbasic[sf.basis] = False
    dual_objective = float(y @ sf.b + d[nonbasic] @ values[nonbasic])
    return _notify(
        LpSolution(OPTIMAL, x, y.copy(), objective, dual_objective, iters)
    )


def _notify(sol: LpSolution) -> LpSolution:
    for fn in _observers:
        fn(sol)
    return sol


def backend_name() -> str:
    """Which pivot-loop backend is active ("numba" or "numpy")."""
    return active_backend()
