#!/usr/bin/env python3
"""Time the simplex pivot loop on both backends.

Workload: the stage-two routing LP of the bundled Middlesex fixture at
every incentive level (the hot path of a scenario sweep) plus a batch of
random instances.  Run after installing the package:

    python benchmarks/bench_simplex.py

Set TAKEBACK_NO_NUMBA=1 to check what the import-time fallback picks.
"""

from __future__ import annotations

import time

from takeback import _kernels
from takeback.benders import benders_solve, initial_decision, solve_subproblem
from takeback.data import fixture_dir
from takeback.model import derive_params, load_instance_dir, with_scenario
from takeback.synth import generate_instance


def fixture_workload():
    inst = load_instance_dir(fixture_dir())
    for level in ("low", "medium", "high"):
        cell = with_scenario(inst, theta=1.0, incentive_level=level)
        dp = derive_params(cell)
        yield cell, dp


def time_backend(name: str, repeats: int = 3) -> dict[str, float]:
    _kernels.use_backend(name)
    out: dict[str, float] = {}

    # Warm-up (numba compiles on first call).
    for cell, dp in fixture_workload():
        solve_subproblem(cell, dp, initial_decision(cell, dp))

    t0 = time.perf_counter()
    for _ in range(repeats):
        for cell, dp in fixture_workload():
            solve_subproblem(cell, dp, initial_decision(cell, dp))
    out["fixture_stage2_3levels"] = (time.perf_counter() - t0) / repeats

    insts = [
        generate_instance(seed=s, n_sites=8, n_zones=4, n_profiles=3)
        for s in range(10)
    ]
    t0 = time.perf_counter()
    for inst in insts:
        benders_solve(inst, eps=1e-9)
    out["benders_10_random_instances"] = time.perf_counter() - t0
    return out


def main() -> None:
    backends = ["numpy"]
    if _kernels.PIVOT_LOOP_NUMBA is not None:
        backends.append("numba")
    else:
        print("numba backend unavailable; timing numpy only")

    results = {}
    for name in backends:
        results[name] = time_backend(name)
        print(f"[{name}]")
        for key, secs in results[name].items():
            print(f"  {key:<32} {secs * 1e3:9.1f} ms")
    _kernels.use_backend(None)

    if len(results) == 2:
        print("[speedup numba vs numpy]")
        for key in results["numpy"]:
            ratio = results["numpy"][key] / results["numba"][key]
            print(f"  {key:<32} {ratio:9.2f}x")


if __name__ == "__main__":
    main()
