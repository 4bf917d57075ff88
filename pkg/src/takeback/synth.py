"""Random instance generation for tests and the ``generate`` command.

Magnitudes mirror the bundled Middlesex fixture: pill quantities in the
thousands to hundreds of thousands, reservation incentives on a
half-dollar grid climbing two dollars per level, travel distances up to
a few tens of miles.  Everything is drawn from a single seeded
generator, so a given seed always produces byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .model import (
    Instance,
    KioskSite,
    Profile,
    ScenarioParams,
    Zone,
    make_instance,
)


def generate_instance(
    seed: int,
    n_sites: int,
    n_zones: int,
    n_profiles: int,
    fixed_cost: float = 2000.0,
    capacity: float | None = None,
    theta: float = 0.5,
    incentive_level: str = "low",
    penalty_per_prescription: float | None = None,
    pills_per_prescription: float = 18.0,
    mileage_rate: float = 0.5,
    max_quantity: float = 60000.0,
    max_distance_miles: float = 30.0,
) -> Instance:
    """Build a schema-valid random instance.

    Capacity and penalty default to seed-dependent draws chosen so that
    both regimes (capacity-tight and penalty-attractive) occur across
    seeds.
    """
    if min(n_sites, n_zones, n_profiles) < 0:
        raise ValueError("sizes must be non-negative")
    rng = np.random.default_rng(seed)

    if capacity is None:
        capacity = float(np.round(rng.uniform(3000.0, 40000.0), 0))
    if penalty_per_prescription is None:
        penalty_per_prescription = float(np.round(rng.uniform(5.0, 30.0), 2))

    sites = [
        KioskSite(f"s{i + 1:02d}", f"Site {i + 1}", fixed_cost, capacity)
        for i in range(n_sites)
    ]
    zones = [Zone(f"z{j + 1:02d}", f"Zone {j + 1}") for j in range(n_zones)]

    profiles = []
    for k in range(n_profiles):
        low = float(rng.integers(8, 32)) / 2.0  # 4.0 .. 15.5 on a 0.5 grid
        profiles.append(
            Profile(
                f"p{k + 1:02d}",
                f"profile {k + 1}",
                {"low": low, "medium": low + 2.0, "high": low + 4.0},
            )
        )

    quantities = {}
    for z in zones:
        for p in profiles:
            pills = float(np.round(rng.uniform(0.0, max_quantity), 0))
            quantities[(z.id, p.id)] = pills
    if zones and profiles and sum(quantities.values()) <= 0:
        quantities[(zones[0].id, profiles[0].id)] = 1000.0

    distance = {}
    for s in sites:
        for z in zones:
            distance[(s.id, z.id)] = float(
                np.round(rng.uniform(0.5, max_distance_miles), 2)
            )

    scenario = ScenarioParams(
        theta=theta,
        incentive_level=incentive_level,
        penalty_per_prescription=penalty_per_prescription,
        pills_per_prescription=pills_per_prescription,
        mileage_rate=mileage_rate,
    )
    return make_instance(sites, zones, profiles, quantities, distance, scenario)
