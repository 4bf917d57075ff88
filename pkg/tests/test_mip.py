import itertools

import numpy as np
import pytest

from takeback.errors import InfeasibleProgram, NodeLimitExceeded
from takeback.mip import MixedProgram, solve_mip
from takeback.simplex import LinearProgram, solve_lp


def enumerate_binaries(lp, binaries):
    """Reference optimum: try all binary assignments, each leaf solved
    as an LP with the binaries pinned."""
    best = None
    for assign in itertools.product([0.0, 1.0], repeat=len(binaries)):
        lb, ub = list(lp.lb), list(lp.ub)
        for j, v in zip(binaries, assign):
            lb[j] = ub[j] = v
        leaf = solve_lp(lp.replace_bounds(lb, ub))
        if leaf.status == "optimal" and (best is None or leaf.objective < best):
            best = leaf.objective
    return best


def test_pick_one_of_two():
    lp = LinearProgram()
    y1 = lp.add_var(0, 1, -1.0)
    y2 = lp.add_var(0, 1, -1.0)
    lp.add_row([y1, y2], [1.0, 1.0], "<=", 1.0)
    sol = solve_mip(MixedProgram(lp, (y1, y2)))
    assert sol.objective == pytest.approx(
        enumerate_binaries(lp, (y1, y2)), abs=1e-9
    )
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)


def test_positive_costs_open_nothing():
    lp = LinearProgram()
    ys = [lp.add_var(0, 1, f) for f in (2000.0, 1500.0, 10.0)]
    sol = solve_mip(MixedProgram(lp, tuple(ys)))
    assert sol.objective == 0.0
    assert (sol.x == 0).all()


def test_set_cover_toy_matches_enumeration():
    # Four candidate sites, five zones; each zone must be covered by an
    # open site within radius.  Covers[z] lists the sites that reach z.
    covers = [(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)]
    costs = [5.0, 4.0, 6.0, 3.0]
    lp = LinearProgram()
    ys = [lp.add_var(0, 1, c) for c in costs]
    for sites in covers:
        lp.add_row([ys[i] for i in sites], np.ones(len(sites)), ">=", 1.0)
    sol = solve_mip(MixedProgram(lp, tuple(ys)))

    best = None
    for assign in itertools.product([0, 1], repeat=4):
        if all(any(assign[i] for i in sites) for sites in covers):
            val = sum(a * c for a, c in zip(assign, costs))
            best = val if best is None else min(best, val)
    assert sol.objective == pytest.approx(best, abs=1e-9)


def test_random_mips_match_enumeration():
    rng = np.random.default_rng(31)
    for _ in range(50):
        nb = int(rng.integers(1, 13))
        nc = int(rng.integers(0, 3))
        lp = LinearProgram()
        ys = [lp.add_var(0, 1, float(rng.normal())) for _ in range(nb)]
        for _ in range(nc):
            lp.add_var(0, float(rng.uniform(1, 4)), float(rng.normal()))
        for _ in range(int(rng.integers(1, 5))):
            coef = rng.normal(0, 1, lp.n_vars).round(2)
            lp.add_row(range(lp.n_vars), coef, str(rng.choice(["<=", ">="])),
                       float(rng.normal(0, 2)))
        expected = enumerate_binaries(lp, ys)
        if expected is None:
            with pytest.raises(InfeasibleProgram):
                solve_mip(MixedProgram(lp, tuple(ys)))
        else:
            sol = solve_mip(MixedProgram(lp, tuple(ys)))
            assert sol.objective == pytest.approx(expected, rel=1e-8, abs=1e-8)
            ints = sol.x[list(ys)]
            assert np.all(np.minimum(ints, 1 - ints) <= 1e-6)


def test_best_bound_nondecreasing():
    rng = np.random.default_rng(8)
    lp = LinearProgram()
    ys = [lp.add_var(0, 1, float(rng.normal())) for _ in range(10)]
    for _ in range(4):
        lp.add_row(range(10), rng.normal(0, 1, 10).round(2), ">=",
                   float(rng.uniform(-1, 1)))
    sol = solve_mip(MixedProgram(lp, tuple(ys)))
    trace = sol.bound_trace
    assert all(a <= b + 1e-9 for a, b in zip(trace, trace[1:]))


def test_infeasible_raises():
    lp = LinearProgram()
    y = lp.add_var(0, 1)
    lp.add_row([y], [1.0], ">=", 2.0)
    with pytest.raises(InfeasibleProgram):
        solve_mip(MixedProgram(lp, (y,)))


def test_node_limit():
    rng = np.random.default_rng(4)
    lp = LinearProgram()
    ys = [lp.add_var(0, 1, float(rng.normal())) for _ in range(14)]
    lp.add_row(range(14), rng.uniform(0.5, 1.5, 14), "=", 5.0)
    with pytest.raises(NodeLimitExceeded):
        solve_mip(MixedProgram(lp, tuple(ys)), node_limit=2)


def test_binary_bounds_validated():
    lp = LinearProgram()
    y = lp.add_var(0, 2.0)
    with pytest.raises(ValueError):
        MixedProgram(lp, (y,))
