import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from takeback.simplex import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    add_solution_observer,
    backend_name,
    parse_lp_dump,
    remove_solution_observer,
    solve_lp,
)


def brute_force_vertices(c, A, rels, rhs, lb, ub):
    """Enumerate candidate vertices of a small LP by activating every
    subset of constraints/bounds of size n and keep the best feasible
    point.  Independent of any simplex machinery."""
    n = len(c)
    eqs = []
    for row, rel, b in zip(A, rels, rhs):
        eqs.append((np.asarray(row, float), b))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lb[j]):
            eqs.append((e.copy(), lb[j]))
        if np.isfinite(ub[j]):
            eqs.append((e.copy(), ub[j]))

    def feasible(x):
        if np.any(x < np.asarray(lb) - 1e-7) or np.any(x > np.asarray(ub) + 1e-7):
            return False
        for row, rel, b in zip(A, rels, rhs):
            v = float(np.dot(row, x))
            if rel == "<=" and v > b + 1e-7:
                return False
            if rel == ">=" and v < b - 1e-7:
                return False
            if rel == "=" and abs(v - b) > 1e-7:
                return False
        return True

    best = None
    for combo in itertools.combinations(range(len(eqs)), n):
        M = np.array([eqs[i][0] for i in combo])
        v = np.array([eqs[i][1] for i in combo])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, v)
        if feasible(x):
            val = float(np.dot(c, x))
            if best is None or val < best:
                best = val
    return best


def test_single_variable_floor():
    lp = LinearProgram()
    x = lp.add_var(lb=0.0, obj=1.0)
    lp.add_row([x], [1.0], ">=", 1.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-12)
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-12)


def test_two_variable_vertex_matches_enumeration():
    c = [2.0, 3.0]
    A = [[1.0, 1.0], [1.0, 0.0]]
    rels = [">=", "<="]
    rhs = [4.0, 3.0]
    lb, ub = [0.0, 0.0], [np.inf, np.inf]
    expected = brute_force_vertices(c, A, rels, rhs, lb, ub)
    assert expected == pytest.approx(9.0, abs=1e-9)

    lp = LinearProgram()
    x = lp.add_var(obj=2.0)
    y = lp.add_var(obj=3.0)
    lp.add_row([x, y], [1.0, 1.0], ">=", 4.0)
    lp.add_row([x], [1.0], "<=", 3.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(expected, abs=1e-9)
    assert sol.x == pytest.approx([3.0, 1.0], abs=1e-9)


def test_empty_feasible_set():
    lp = LinearProgram()
    x = lp.add_var()
    lp.add_row([x], [1.0], ">=", 1.0)
    lp.add_row([x], [1.0], "<=", 0.0)
    sol = solve_lp(lp)
    assert sol.status == INFEASIBLE
    assert sol.certificate is not None


def test_unbounded_with_ray():
    lp = LinearProgram()
    x = lp.add_var(obj=-1.0)
    y = lp.add_var(obj=0.0, ub=5.0)
    lp.add_row([y], [1.0], "<=", 4.0)
    sol = solve_lp(lp)
    assert sol.status == UNBOUNDED
    ray = sol.certificate
    assert ray is not None and ray[0] > 0


def test_dual_sign_convention():
    # Active >= row gets a nonnegative dual, active <= row a nonpositive one.
    lp = LinearProgram()
    x = lp.add_var(obj=1.0)
    y = lp.add_var(obj=1.0)
    lp.add_row([x, y], [1.0, 1.0], ">=", 2.0)
    lp.add_row([x], [1.0], "<=", 0.5)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.duals[0] >= -1e-12
    assert sol.duals[1] <= 1e-12


def _random_lp(rng):
    n = int(rng.integers(1, 9))
    m = int(rng.integers(1, 9))
    c = rng.normal(0, 2, n).round(2)
    lb = np.where(rng.random(n) < 0.8, 0.0, -rng.integers(0, 4, n)).astype(float)
    ub = np.where(rng.random(n) < 0.5, np.inf, lb + rng.integers(1, 8, n))
    A = (rng.random((m, n)) < 0.7) * rng.normal(0, 1.5, (m, n)).round(2)
    rels = rng.choice(["<=", ">=", "="], m, p=[0.5, 0.4, 0.1])
    rhs = rng.normal(0, 4, m).round(2)
    lp = LinearProgram()
    for j in range(n):
        lp.add_var(lb=lb[j], ub=ub[j], obj=c[j])
    for r in range(m):
        idx = np.nonzero(A[r])[0]
        lp.add_row(idx, A[r, idx], rels[r], rhs[r])
    return lp, (c, A, rels, rhs, lb, ub)


def _scipy_solve(c, A, rels, rhs, lb, ub):
    Aub, bub, Aeq, beq = [], [], [], []
    for row, rel, b in zip(A, rels, rhs):
        if rel == "<=":
            Aub.append(row)
            bub.append(b)
        elif rel == ">=":
            Aub.append(-row)
            bub.append(-b)
        else:
            Aeq.append(row)
            beq.append(b)
    return linprog(
        c,
        A_ub=np.array(Aub) if Aub else None,
        b_ub=np.array(bub) if bub else None,
        A_eq=np.array(Aeq) if Aeq else None,
        b_eq=np.array(beq) if beq else None,
        bounds=[(l, None if np.isinf(u) else u) for l, u in zip(lb, ub)],
        method="highs",
    )


def test_random_lps_match_reference_and_satisfy_duality():
    rng = np.random.default_rng(42)
    for _ in range(200):
        lp, data = _random_lp(rng)
        sol = solve_lp(lp)
        ref = _scipy_solve(*data)
        ref_status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
        assert sol.status == ref_status
        if sol.status != OPTIMAL:
            continue
        assert sol.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
        # Strong duality.
        assert abs(sol.objective - sol.dual_objective) <= 1e-8 * (
            1 + abs(sol.objective)
        )
        # Complementary slackness row by row.
        c, A, rels, rhs, lb, ub = data
        for r, (row, rel, b) in enumerate(zip(A, rels, rhs)):
            slack = b - float(row @ sol.x)
            scale = 1.0 + abs(b) + float(np.abs(row).sum())
            assert abs(sol.duals[r] * slack) <= 1e-8 * scale * (
                1 + abs(sol.duals[r])
            )


def test_random_transportation_lps_match_reference():
    # Feasible transportation problems up to 10 x 10 with a shortfall arc.
    rng = np.random.default_rng(9)
    for _ in range(40):
        ns, nd = int(rng.integers(1, 11)), int(rng.integers(1, 11))
        cap = rng.uniform(10, 100, ns).round(1)
        dem = rng.uniform(5, 80, nd).round(1)
        cost = rng.uniform(0.1, 3.0, (ns, nd)).round(3)
        pen = round(float(rng.uniform(0.5, 4.0)), 3)
        lp = LinearProgram()
        xs = [[lp.add_var(obj=cost[i, j]) for j in range(nd)] for i in range(ns)]
        bs = [lp.add_var(obj=pen) for _ in range(nd)]
        for i in range(ns):
            lp.add_row(xs[i], np.ones(nd), "<=", cap[i])
        for j in range(nd):
            lp.add_row([xs[i][j] for i in range(ns)] + [bs[j]],
                       np.ones(ns + 1), ">=", dem[j])
        sol = solve_lp(lp)
        assert sol.status == OPTIMAL
        cvec = np.concatenate([cost.ravel(), np.full(nd, pen)])
        A = np.zeros((ns + nd, ns * nd + nd))
        for i in range(ns):
            A[i, i * nd : (i + 1) * nd] = 1.0
        for j in range(nd):
            A[ns + j, j::nd][:ns] = -1.0
            A[ns + j, ns * nd + j] = -1.0
        b = np.concatenate([cap, -dem])
        ref = linprog(cvec, A_ub=A, b_ub=b, method="highs")
        assert sol.objective == pytest.approx(ref.fun, rel=1e-8, abs=1e-8)


def test_tiny_lps_match_vertex_enumeration():
    rng = np.random.default_rng(17)
    hits = 0
    for _ in range(60):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 4))
        c = rng.normal(0, 1, n).round(2)
        lb = np.zeros(n)
        ub = np.full(n, float(rng.integers(1, 6)))
        A = rng.normal(0, 1, (m, n)).round(2)
        rels = rng.choice(["<=", ">="], m)
        rhs = rng.normal(0, 2, m).round(2)
        expected = brute_force_vertices(c, A, rels, rhs, lb, ub)
        lp = LinearProgram()
        for j in range(n):
            lp.add_var(lb=lb[j], ub=ub[j], obj=c[j])
        for r in range(m):
            lp.add_row(range(n), A[r], rels[r], rhs[r])
        sol = solve_lp(lp)
        if expected is None:
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL
            assert sol.objective == pytest.approx(expected, rel=1e-7, abs=1e-7)
            hits += 1
    assert hits > 10


def test_observer_sees_solutions():
    seen = []
    add_solution_observer(seen.append)
    try:
        lp = LinearProgram()
        x = lp.add_var(obj=1.0)
        lp.add_row([x], [1.0], ">=", 2.0)
        solve_lp(lp)
    finally:
        remove_solution_observer(seen.append)
    assert len(seen) == 1 and seen[0].objective == pytest.approx(2.0)


def test_dump_round_trip(tmp_path):
    lp = LinearProgram()
    x = lp.add_var(lb=0.0, ub=3.5, obj=2.25, name="ship")
    y = lp.add_var(obj=-1.0, name="hold")
    lp.add_row([x, y], [1.0, -2.5], "<=", 7.125)
    lp.add_row([y], [1.0], "=", 0.5)
    path = tmp_path / "model.lp"
    lp.dump(path)
    text = path.read_text()
    assert text.splitlines()[0] == "takeback-lp 1"
    again = parse_lp_dump(path)
    assert again.obj == lp.obj and again.lb == lp.lb and again.ub == lp.ub
    for (i1, v1, r1, b1), (i2, v2, r2, b2) in zip(lp.rows, again.rows):
        assert list(i1) == list(i2) and list(v1) == list(v2)
        assert r1 == r2 and b1 == b2
    sol1, sol2 = solve_lp(lp), solve_lp(again)
    assert sol1.objective == sol2.objective


def test_validation_errors():
    lp = LinearProgram()
    with pytest.raises(ValueError):
        lp.add_var(lb=2.0, ub=1.0)
    with pytest.raises(ValueError):
        lp.add_var(obj=np.inf)
    x = lp.add_var()
    with pytest.raises(ValueError):
        lp.add_row([x + 5], [1.0], "<=", 1.0)
    with pytest.raises(ValueError):
        lp.add_row([x], [np.nan], "<=", 1.0)
    with pytest.raises(ValueError):
        lp.add_row([x], [1.0], "<", 1.0)


def test_backend_is_reported():
    assert backend_name() in ("numpy", "numba")
