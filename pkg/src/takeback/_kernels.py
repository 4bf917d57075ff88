"""Hot numeric kernels for the simplex engine.

The pivot loop below is written once in array style.  By default it is
compiled with numba's ``@njit``; setting the environment variable
``TAKEBACK_NO_NUMBA=1`` (or running without numba installed) selects the
identical pure-numpy implementation.  ``benchmarks/bench_simplex.py``
times the two against each other.

Status codes returned by the loop:
    0  no improving column (optimal candidate, verify before trusting)
    1  improving ray found (unbounded candidate)
    2  iteration budget exhausted
    3  acceptable pivot magnitude not found

Variable status codes (``stat``):
    0  nonbasic at lower bound
    1  nonbasic at upper bound
    2  basic
    3  nonbasic free, held at zero
    4  fixed (never priced)
"""

from __future__ import annotations

import os

import numpy as np

OPT_CANDIDATE = 0
UNBOUNDED_CANDIDATE = 1
ITER_LIMIT = 2
PIVOT_BREAKDOWN = 3

_PIV_EPS = 1e-9
_DEGEN_STEP = 1e-10


def pivot_loop(T, xB, d, basis, stat, lb, ub, tol, max_iter, bland):
    """Run bounded-variable primal simplex pivots in place.

    T      (m, n) current tableau, basis columns are unit vectors
    xB     (m,)   values of the basic variables
    d      (n,)   reduced costs for the current objective
    basis  (m,)   column index of the basic variable of each row
    stat   (n,)   variable status codes (see module docstring)
    lb, ub (n,)   bounds, +-inf allowed

    Returns (code, iterations, entering, direction, bland).
    """
    m = T.shape[0]
    n = d.shape[0]
    it = 0
    degen_run = 0
    degen_limit = 2 * (m + n) + 100
    e = -1
    sdir = 1.0
    while it < max_iter:
        it += 1

        # Pricing: how much each nonbasic column violates optimality.
        viol = np.where(
            stat == 0, d, np.where(stat == 1, -d, np.where(stat == 3, -np.abs(d), 0.0))
        )
        if bland:
            e = -1
            for j in range(n):
                if viol[j] < -tol:
                    e = j
                    break
            if e < 0:
                return OPT_CANDIDATE, it, e, sdir, bland
        else:
            e = int(np.argmin(viol))
            if viol[e] >= -tol:
                return OPT_CANDIDATE, it, e, sdir, bland

        if stat[e] == 0:
            sdir = 1.0
            v_e = lb[e]
        elif stat[e] == 1:
            sdir = -1.0
            v_e = ub[e]
        else:
            sdir = 1.0 if d[e] < 0.0 else -1.0
            v_e = 0.0

        # Ratio test against the bounds of the basic variables.
        w = sdir * T[:, e]
        lbB = lb[basis]
        ubB = ub[basis]
        pos = w > _PIV_EPS
        neg = w < -_PIV_EPS
        wsafe = np.where(pos | neg, w, 1.0)
        lim = np.where(
            pos,
            (xB - lbB) / wsafe,
            np.where(neg, (xB - ubB) / wsafe, np.inf),
        )
        lim = np.maximum(lim, 0.0)
        t_rows = np.inf if m == 0 else np.min(lim)

        # The entering variable may hit its own opposite bound first.
        if stat[e] == 3:
            t_bound = np.inf
        else:
            t_bound = ub[e] - lb[e]

        t = min(t_rows, t_bound)
        if not np.isfinite(t):
            return UNBOUNDED_CANDIDATE, it, e, sdir, bland

        if degen_run > degen_limit:
            bland = True
        if t <= _DEGEN_STEP:
            degen_run += 1
        else:
            degen_run = 0

        if t_bound <= t_rows:
            # Bound flip: no basis change.
            xB -= t_bound * w
            stat[e] = 1 - stat[e]
            continue

        # Leaving row: largest pivot among the blocking rows (smallest
        # basic variable index under Bland's rule).
        cut = t * (1.0 + 1e-9) + 1e-12
        r = -1
        if bland:
            best_idx = np.iinfo(np.int64).max
            for i in range(m):
                if lim[i] <= cut and np.abs(w[i]) > _PIV_EPS:
                    if basis[i] < best_idx:
                        best_idx = basis[i]
                        r = i
        else:
            best_mag = 0.0
            for i in range(m):
                if lim[i] <= cut:
                    mag = np.abs(w[i])
                    if mag > best_mag:
                        best_mag = mag
                        r = i
        if r < 0 or np.abs(T[r, e]) < _PIV_EPS:
            return PIVOT_BREAKDOWN, it, e, sdir, bland

        # Move to the new vertex.
        xB -= t * w
        leaving = basis[r]
        if lb[leaving] == ub[leaving]:
            stat[leaving] = 4
        elif w[r] > 0.0:
            stat[leaving] = 0
        else:
            stat[leaving] = 1
        xB[r] = v_e + sdir * t
        basis[r] = e
        stat[e] = 2

        # Eliminate the entering column from the tableau.
        piv = T[r, e]
        T[r, :] /= piv
        col = T[:, e].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r, :])
        d -= d[e] * T[r, :]

    return ITER_LIMIT, it, e, sdir, bland


PIVOT_LOOP_NUMPY = pivot_loop
PIVOT_LOOP_NUMBA = None

_DISABLED = os.environ.get("TAKEBACK_NO_NUMBA", "").strip() not in ("", "0")
if not _DISABLED:
    try:
        from numba import njit

        PIVOT_LOOP_NUMBA = njit(cache=True)(pivot_loop)
    except ImportError:  # pragma: no cover - numba is a default dependency
        PIVOT_LOOP_NUMBA = None


# Runtime override, mainly for the backend benchmark: None follows the
# import-time selection, otherwise "numpy" or "numba".
FORCE_BACKEND: str | None = None


def use_backend(name: str | None) -> None:
    if name not in (None, "numpy", "numba"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and PIVOT_LOOP_NUMBA is None:
        raise RuntimeError("numba backend unavailable")
    global FORCE_BACKEND
    FORCE_BACKEND = name


def active_backend() -> str:
    """Name of the pivot-loop implementation in use."""
    if FORCE_BACKEND is not None:
        return FORCE_BACKEND
    return "numba" if PIVOT_LOOP_NUMBA is not None else "numpy"


def active_pivot_loop():
    return PIVOT_LOOP_NUMBA if active_backend() == "numba" else PIVOT_LOOP_NUMPY
