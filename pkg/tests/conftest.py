import pytest

from takeback.data import fixture_dir
from takeback.model import (
    KioskSite,
    Profile,
    ScenarioParams,
    Zone,
    load_instance_dir,
    make_instance,
)


def t1_instance(
    per_pill_penalty=2.0,
    theta=1.0,
    q=10000.0,
    distance=4.0,
    fixed_cost=2000.0,
    capacity=30000.0,
    reservation_low=10.0,
):
    """One site, one zone, one profile; reachable at the low level.

    With the defaults: travel cost 2.0, offer floor 12.0, per-pill
    return cost 12/18 vs penalty 2.0/pill, so opening the site and
    returning everything costs 2000 + 10000*12/18 = 8666.67 against a
    20000 all-penalty alternative.
    """
    return make_instance(
        sites=[KioskSite("s1", "Site 1", fixed_cost, capacity)],
        zones=[Zone("z1", "Zone 1")],
        profiles=[
            Profile("p1", "test", {"low": reservation_low,
                                   "medium": reservation_low + 2.0,
                                   "high": reservation_low + 4.0})
        ],
        unused_quantity={("z1", "p1"): q},
        distance={("s1", "z1"): distance},
        scenario=ScenarioParams(
            theta, "low", per_pill_penalty * 18.0, 18.0, 0.5
        ),
    )


def two_site_instance():
    """Two sites, two zones, two profiles with mixed reachability."""
    return make_instance(
        sites=[
            KioskSite("s1", "Near", 2000.0, 8000.0),
            KioskSite("s2", "Far", 1000.0, 8000.0),
        ],
        zones=[Zone("z1", "A"), Zone("z2", "B")],
        profiles=[
            Profile("p1", "cheap", {"low": 4.5, "medium": 6.5, "high": 8.5}),
            Profile("p2", "dear", {"low": 13.5, "medium": 15.5, "high": 17.5}),
        ],
        unused_quantity={
            ("z1", "p1"): 9000.0,
            ("z1", "p2"): 3000.0,
            ("z2", "p1"): 5000.0,
            ("z2", "p2"): 2000.0,
        },
        distance={
            ("s1", "z1"): 2.0,
            ("s1", "z2"): 10.0,
            ("s2", "z1"): 25.0,
            ("s2", "z2"): 3.0,
        },
        scenario=ScenarioParams(0.8, "low", 18.0, 18.0, 0.5),
    )


@pytest.fixture
def t1():
    return t1_instance()


@pytest.fixture(scope="session")
def middlesex_dir():
    return fixture_dir("middlesex")


@pytest.fixture(scope="session")
def middlesex():
    return load_instance_dir(fixture_dir("middlesex"))


def assert_close(a, b, rel=1e-9, abs_tol=1e-9):
    assert abs(a - b) <= abs_tol + rel * max(abs(a), abs(b)), (a, b)
