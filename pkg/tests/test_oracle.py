import numpy as np
import pytest

from takeback.errors import TooManySites
from takeback.model import KioskSite, make_instance
from takeback.oracle import oracle_solve
from takeback.synth import generate_instance

from conftest import t1_instance


def test_t1_enumerates_both_subsets(t1):
    res = oracle_solve(t1, keep_log=True)
    by_set = {r.open_sites: r.total for r in res.per_subset}
    assert by_set[()] == pytest.approx(20000.0, rel=1e-9)
    assert by_set[(0,)] == pytest.approx(2000.0 + 10000.0 * 12.0 / 18.0, rel=1e-9)
    assert res.best_open_set == (0,)
    assert res.objective == pytest.approx(by_set[(0,)], rel=1e-12)


def test_zero_demand_chooses_empty_set():
    res = oracle_solve(t1_instance(q=0.0))
    assert res.best_open_set == ()
    assert res.objective == 0.0


def test_zero_penalty_chooses_empty_set():
    res = oracle_solve(t1_instance(per_pill_penalty=0.0))
    assert res.best_open_set == ()
    assert res.objective == 0.0


def test_removing_a_site_never_helps():
    rng = np.random.default_rng(5)
    for seed in range(8):
        inst = generate_instance(seed=seed, n_sites=5, n_zones=3, n_profiles=2)
        full = oracle_solve(inst).objective
        for drop in range(5):
            sites = [s for i, s in enumerate(inst.sites) if i != drop]
            keep = {s.id for s in sites}
            smaller = make_instance(
                sites=sites, zones=inst.zones, profiles=inst.profiles,
                unused_quantity=inst.unused_quantity,
                distance={k: v for k, v in inst.distance.items() if k[0] in keep},
                scenario=inst.scenario, level_policy=inst.level_policy,
            )
            assert oracle_solve(smaller).objective >= full - 1e-7 * (1 + abs(full))


def test_enumeration_guard():
    base = t1_instance()
    sites = [KioskSite(f"s{i}", f"S{i}", 2000.0, 30000.0) for i in range(25)]
    inst = make_instance(
        sites=sites, zones=base.zones, profiles=base.profiles,
        unused_quantity=base.unused_quantity,
        distance={(s.id, "z1"): 4.0 for s in sites},
        scenario=base.scenario,
    )
    with pytest.raises(TooManySites):
        oracle_solve(inst)
