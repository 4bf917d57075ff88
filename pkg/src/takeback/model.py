"""Domain model: campaign instances, file I/O and derived parameters.

An :class:`Instance` bundles everything a solver needs: candidate kiosk
sites, user zones, user profiles, unused-pill quantities, the site-zone
distance table and the scenario knobs (target fraction, incentive level,
penalty, mileage rate).  Instances are immutable after construction and
safe to share between concurrent solver runs.

File formats (one directory, six files):

    sites.csv       id,name,fixed_cost,capacity[,lat,lon]
    zones.csv       id,name
    profiles.csv    id,descriptor,reserve_low,reserve_medium,reserve_high
    quantities.csv  zone_id,profile_id,pills
    distances.csv   site_id,zone_id,<miles|cost_dollars>
    scenario.json   {"theta": ..., "incentive_level": ..., ...}

The third header field of distances.csv declares its unit.  Values given
as travel cost in dollars are converted to miles on load by dividing by
the scenario's mileage rate.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DUPLICATE_ID,
    INVALID_VALUE,
    MISSING_COLUMN,
    MISSING_FILE,
    MISSING_VALUE,
    NEGATIVE_VALUE,
    UNIT_MISMATCH,
    UNKNOWN_ID,
    InstanceValidationError,
    Issue,
)

LEVELS = ("low", "medium", "high")

SITES_FILE = "sites.csv"
ZONES_FILE = "zones.csv"
PROFILES_FILE = "profiles.csv"
QUANTITIES_FILE = "quantities.csv"
DISTANCES_FILE = "distances.csv"
SCENARIO_FILE = "scenario.json"


@dataclass(frozen=True)
class KioskSite:
    """A candidate pharmacy location for a disposal kiosk."""

    id: str
    name: str
    fixed_cost: float
    capacity: float
    position: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class Zone:
    """A populated area whose residents may return unused pills."""

    id: str
    name: str


@dataclass(frozen=True)
class Profile:
    """A user category with its own minimum reservation incentive.

    ``reservation_incentive`` maps each incentive level name to the
    smallest payment (before travel cost) at which users of this profile
    will return their pills; values must rise strictly with the level.
    """

    id: str
    descriptor: str
    reservation_incentive: Mapping[str, float]


@dataclass(frozen=True)
class IncentiveLevelPolicy:
    """Ordered incentive levels and the willingness radius of each."""

    levels: tuple[str, ...]
    max_distance: Mapping[str, float]


@dataclass(frozen=True)
class ScenarioParams:
    """Campaign-wide knobs, uniform across zones and profiles."""

    theta: float
    incentive_level: str
    penalty_per_prescription: float
    pills_per_prescription: float
    mileage_rate: float


@dataclass(frozen=True)
class Instance:
    """A complete, validated problem instance."""

    sites: tuple[KioskSite, ...]
    zones: tuple[Zone, ...]
    profiles: tuple[Profile, ...]
    unused_quantity: Mapping[tuple[str, str], float]
    distance: Mapping[tuple[str, str], float]
    level_policy: IncentiveLevelPolicy
    scenario: ScenarioParams

    # -- positional index helpers -----------------------------------------

    @cached_property
    def site_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sites)

    @cached_property
    def zone_ids(self) -> tuple[str, ...]:
        return tuple(z.id for z in self.zones)

    @cached_property
    def profile_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.profiles)

    @cached_property
    def site_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.site_ids)}

    @cached_property
    def zone_index(self) -> dict[str, int]:
        return {z: j for j, z in enumerate(self.zone_ids)}

    @cached_property
    def profile_index(self) -> dict[str, int]:
        return {p: k for k, p in enumerate(self.profile_ids)}

    # -- dense array views used by the solvers ----------------------------

    @cached_property
    def fixed_costs(self) -> np.ndarray:
        return np.array([s.fixed_cost for s in self.sites], dtype=float)

    @cached_property
    def capacities(self) -> np.ndarray:
        return np.array([s.capacity for s in self.sites], dtype=float)

    @cached_property
    def quantities(self) -> np.ndarray:
        """(zones, profiles) array of unused pills; missing pairs are 0."""
        q = np.zeros((len(self.zones), len(self.profiles)))
        for (zid, pid), pills in self.unused_quantity.items():
            q[self.zone_index[zid], self.profile_index[pid]] = pills
        return q

    @cached_property
    def distances(self) -> np.ndarray:
        """(sites, zones) array of one-way travel distances in miles."""
        d = np.full((len(self.sites), len(self.zones)), np.nan)
        for (sid, zid), miles in self.distance.items():
            d[self.site_index[sid], self.zone_index[zid]] = miles
        return d

    def reservation_array(self, level: str) -> np.ndarray:
        """(profiles,) reservation incentives at the given level."""
        return np.array(
            [p.reservation_incentive[level] for p in self.profiles], dtype=float
        )


@dataclass(frozen=True)
class DerivedParams:
    """Parameters computed from an Instance for its fixed scenario.

    travel_cost[i, j]      dollars for one trip from zone j to site i
    reachable[i, j, k]     True when zone j lies within the willingness
                           radius of the scenario's incentive level
    per_pill_penalty       penalty dollars per unreturned pill
    reservation[k]         reservation incentive of profile k at the
                           scenario's level
    target[j, k]           pills that must be accounted for (returned or
                           penalized) per zone and profile
    """

    travel_cost: np.ndarray
    reachable: np.ndarray
    per_pill_penalty: float
    reservation: np.ndarray
    target: np.ndarray


def derive_params(inst: Instance) -> DerivedParams:
    """Compute travel costs, reachability, penalties and targets."""
    sc = inst.scenario
    radius = inst.level_policy.max_distance[sc.incentive_level]
    dist = inst.distances
    pair_reach = dist <= radius
    reach = np.repeat(pair_reach[:, :, None], len(inst.profiles), axis=2)
    return DerivedParams(
        travel_cost=sc.mileage_rate * dist,
        reachable=reach,
        per_pill_penalty=sc.penalty_per_prescription / sc.pills_per_prescription,
        reservation=inst.reservation_array(sc.incentive_level),
        target=sc.theta * inst.quantities,
    )


def with_scenario(inst: Instance, **changes) -> Instance:
    """Return a copy of the instance with scenario fields replaced."""
    sc = replace(inst.scenario, **changes)
    _validate_scenario_values(sc, inst.level_policy, _Collector(raise_now=True))
    return replace(inst, scenario=sc)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


class _Collector:
    """Accumulates validation issues; optionally raises on the first one."""

    def __init__(self, raise_now: bool = False):
        self.issues: list[Issue] = []
        self.raise_now = raise_now

    def add(self, code: str, message: str) -> None:
        issue = Issue(code, message)
        if self.raise_now:
            raise InstanceValidationError([issue])
        self.issues.append(issue)

    def finish(self) -> None:
        if self.issues:
            raise InstanceValidationError(self.issues)


def _read_csv(path: Path, required: Sequence[str], col: _Collector):
    if not path.is_file():
        col.add(MISSING_FILE, f"{path.name} not found")
        return None, []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            col.add(MISSING_COLUMN, f"{path.name}: missing column(s) {missing}")
            return header, []
        return header, list(reader)


def _parse_float(raw: str, where: str, col: _Collector) -> Optional[float]:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        col.add(INVALID_VALUE, f"{where}: not a number: {raw!r}")
        return None
    if not np.isfinite(value):
        col.add(INVALID_VALUE, f"{where}: non-finite value {raw!r}")
        return None
    return value


def load_instance(
    sites_file,
    zones_file,
    profiles_file,
    quantities_file,
    distances_file,
    scenario_file,
) -> Instance:
    """Load and validate an instance from its six files.

    Raises :class:`InstanceValidationError` carrying every issue found.
    """
    col = _Collector()

    scenario, policy = _load_scenario(Path(scenario_file), col)
    sites = _load_sites(Path(sites_file), col)
    zones = _load_zones(Path(zones_file), col)
    profiles = _load_profiles(Path(profiles_file), col)

    col.finish()

    quantities = _load_quantities(Path(quantities_file), zones, profiles, col)
    distance = _load_distances(Path(distances_file), sites, zones, scenario, col)

    col.finish()
    return Instance(
        sites=tuple(sites),
        zones=tuple(zones),
        profiles=tuple(profiles),
        unused_quantity=quantities,
        distance=distance,
        level_policy=policy,
        scenario=scenario,
    )


def load_instance_dir(directory) -> Instance:
    """Load an instance from a directory using the conventional filenames."""
    d = Path(directory)
    return load_instance(
        d / SITES_FILE,
        d / ZONES_FILE,
        d / PROFILES_FILE,
        d / QUANTITIES_FILE,
        d / DISTANCES_FILE,
        d / SCENARIO_FILE,
    )


def _load_scenario(path: Path, col: _Collector):
    fallback = (
        ScenarioParams(0.5, "low", 12.0, 18.0, 0.5),
        IncentiveLevelPolicy(LEVELS, {"low": 4.0, "medium": 8.0, "high": 20.0}),
    )
    if not path.is_file():
        col.add(MISSING_FILE, f"{path.name} not found")
        return fallback
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        col.add(INVALID_VALUE, f"{path.name}: invalid JSON ({exc})")
        return fallback
    required = (
        "theta",
        "incentive_level",
        "penalty_per_prescription",
        "pills_per_prescription",
        "mileage_rate",
        "max_distance",
    )
    missing = [k for k in required if k not in raw]
    if missing:
        col.add(MISSING_COLUMN, f"{path.name}: missing key(s) {missing}")
        return fallback
    max_distance = {lvl: float(raw["max_distance"].get(lvl, np.nan)) for lvl in LEVELS}
    policy = IncentiveLevelPolicy(LEVELS, max_distance)
    scenario = ScenarioParams(
        theta=float(raw["theta"]),
        incentive_level=str(raw["incentive_level"]),
        penalty_per_prescription=float(raw["penalty_per_prescription"]),
        pills_per_prescription=float(raw["pills_per_prescription"]),
        mileage_rate=float(raw["mileage_rate"]),
    )
    _validate_scenario_values(scenario, policy, col)
    return scenario, policy


def _validate_scenario_values(
    sc: ScenarioParams, policy: IncentiveLevelPolicy, col: _Collector
) -> None:
    if not (0.0 <= sc.theta <= 1.0):
        col.add(INVALID_VALUE, f"theta must lie in [0, 1], got {sc.theta}")
    if sc.incentive_level not in policy.levels:
        col.add(INVALID_VALUE, f"unknown incentive_level {sc.incentive_level!r}")
    if sc.penalty_per_prescription < 0:
        col.add(NEGATIVE_VALUE, "penalty_per_prescription must be >= 0")
    if not sc.pills_per_prescription > 0:
        col.add(INVALID_VALUE, "pills_per_prescription must be > 0")
    if sc.mileage_rate < 0:
        col.add(NEGATIVE_VALUE, "mileage_rate must be >= 0")
    radii = [policy.max_distance.get(lvl, np.nan) for lvl in policy.levels]
    if any(not np.isfinite(r) for r in radii):
        col.add(MISSING_VALUE, "max_distance must cover every incentive level")
    elif not all(a < b for a, b in zip(radii, radii[1:])):
        col.add(INVALID_VALUE, f"willingness radii must increase with level: {radii}")


def _load_sites(path: Path, col: _Collector) -> list[KioskSite]:
    header, rows = _read_csv(path, ["id", "name", "fixed_cost", "capacity"], col)
    sites: list[KioskSite] = []
    seen: set[str] = set()
    has_pos = header is not None and "lat" in header and "lon" in header
    for n, row in enumerate(rows, start=2):
        sid = row["id"].strip()
        if sid in seen:
            col.add(DUPLICATE_ID, f"{path.name} line {n}: duplicate site id {sid!r}")
            continue
        seen.add(sid)
        fc = _parse_float(row["fixed_cost"], f"{path.name} line {n} fixed_cost", col)
        cap = _parse_float(row["capacity"], f"{path.name} line {n} capacity", col)
        if fc is None or cap is None:
            continue
        if fc < 0:
            col.add(NEGATIVE_VALUE, f"{path.name} line {n}: fixed_cost {fc} < 0")
        if cap <= 0:
            col.add(INVALID_VALUE, f"{path.name} line {n}: capacity must be > 0")
        pos = None
        if has_pos and row.get("lat") and row.get("lon"):
            lat = _parse_float(row["lat"], f"{path.name} line {n} lat", col)
            lon = _parse_float(row["lon"], f"{path.name} line {n} lon", col)
            if lat is not None and lon is not None:
                pos = (lat, lon)
        sites.append(KioskSite(sid, row["name"], fc, cap, pos))
    return sites


def _load_zones(path: Path, col: _Collector) -> list[Zone]:
    _, rows = _read_csv(path, ["id", "name"], col)
    zones: list[Zone] = []
    seen: set[str] = set()
    for n, row in enumerate(rows, start=2):
        zid = row["id"].strip()
        if zid in seen:
            col.add(DUPLICATE_ID, f"{path.name} line {n}: duplicate zone id {zid!r}")
            continue
        seen.add(zid)
        zones.append(Zone(zid, row["name"]))
    return zones


def _load_profiles(path: Path, col: _Collector) -> list[Profile]:
    cols = ["id", "descriptor", "reserve_low", "reserve_medium", "reserve_high"]
    _, rows = _read_csv(path, cols, col)
    profiles: list[Profile] = []
    seen: set[str] = set()
    for n, row in enumerate(rows, start=2):
        pid = row["id"].strip()
        if pid in seen:
            col.add(DUPLICATE_ID, f"{path.name} line {n}: duplicate profile id {pid!r}")
            continue
        seen.add(pid)
        values = {}
        ok = True
        for level in LEVELS:
            v = _parse_float(
                row[f"reserve_{level}"], f"{path.name} line {n} reserve_{level}", col
            )
            if v is None:
                ok = False
                break
            if v < 0:
                col.add(
                    NEGATIVE_VALUE,
                    f"{path.name} line {n}: reserve_{level} {v} < 0",
                )
                ok = False
            values[level] = v
        if not ok:
            continue
        ordered = [values[lvl] for lvl in LEVELS]
        if not all(a < b for a, b in zip(ordered, ordered[1:])):
            col.add(
                INVALID_VALUE,
                f"{path.name} line {n}: reservation incentives must increase "
                f"strictly low < medium < high, got {ordered}",
            )
        profiles.append(Profile(pid, row["descriptor"], values))
    return profiles


def _load_quantities(
    path: Path, zones: list[Zone], profiles: list[Profile], col: _Collector
) -> dict[tuple[str, str], float]:
    header, rows = _read_csv(path, ["zone_id", "profile_id", "pills"], col)
    zone_ids = {z.id for z in zones}
    profile_ids = {p.id for p in profiles}
    # Dense map so that a written-then-reloaded instance compares equal.
    out: dict[tuple[str, str], float] = {
        (z.id, p.id): 0.0 for z in zones for p in profiles
    }
    seen: set[tuple[str, str]] = set()
    total = 0.0
    for n, row in enumerate(rows, start=2):
        zid, pid = row["zone_id"].strip(), row["profile_id"].strip()
        if zid not in zone_ids:
            col.add(UNKNOWN_ID, f"{path.name} line {n}: unknown zone {zid!r}")
            continue
        if pid not in profile_ids:
            col.add(UNKNOWN_ID, f"{path.name} line {n}: unknown profile {pid!r}")
            continue
        if (zid, pid) in seen:
            col.add(DUPLICATE_ID, f"{path.name} line {n}: repeated pair ({zid},{pid})")
            continue
        seen.add((zid, pid))
        pills = _parse_float(row["pills"], f"{path.name} line {n} pills", col)
        if pills is None:
            continue
        if pills < 0:
            col.add(NEGATIVE_VALUE, f"{path.name} line {n}: pills {pills} < 0")
            continue
        out[(zid, pid)] = pills
        total += pills
    schema_ok = header is not None and {"zone_id", "profile_id", "pills"} <= set(header)
    if schema_ok and zones and profiles and total <= 0:
        col.add(INVALID_VALUE, f"{path.name}: total unused quantity must be > 0")
    return out


def _load_distances(
    path: Path,
    sites: list[KioskSite],
    zones: list[Zone],
    scenario: ScenarioParams,
    col: _Collector,
) -> dict[tuple[str, str], float]:
    header, rows = _read_csv(path, ["site_id", "zone_id"], col)
    out: dict[tuple[str, str], float] = {}
    if header is None:
        return out
    value_cols = [c for c in header if c not in ("site_id", "zone_id")]
    unit = value_cols[0] if value_cols else None
    if unit not in ("miles", "cost_dollars"):
        col.add(
            UNIT_MISMATCH,
            f"{path.name}: third column must declare units 'miles' or "
            f"'cost_dollars', got {unit!r}",
        )
        return out
    if unit == "cost_dollars" and scenario.mileage_rate <= 0:
        col.add(
            UNIT_MISMATCH,
            f"{path.name}: cost_dollars units need a positive mileage_rate",
        )
        return out
    site_ids = {s.id for s in sites}
    zone_ids = {z.id for z in zones}
    for n, row in enumerate(rows, start=2):
        sid, zid = row["site_id"].strip(), row["zone_id"].strip()
        if sid not in site_ids:
            col.add(UNKNOWN_ID, f"{path.name} line {n}: unknown site {sid!r}")
            continue
        if zid not in zone_ids:
            col.add(UNKNOWN_ID, f"{path.name} line {n}: unknown zone {zid!r}")
            continue
        if (sid, zid) in out:
            col.add(DUPLICATE_ID, f"{path.name} line {n}: repeated pair ({sid},{zid})")
            continue
        value = _parse_float(row[unit], f"{path.name} line {n} {unit}", col)
        if value is None:
            continue
        if value < 0:
            col.add(NEGATIVE_VALUE, f"{path.name} line {n}: distance {value} < 0")
            continue
        miles = value / scenario.mileage_rate if unit == "cost_dollars" else value
        out[(sid, zid)] = miles
    for s in sites:
        for z in zones:
            if (s.id, z.id) not in out:
                col.add(
                    MISSING_VALUE,
                    f"{path.name}: no distance for pair ({s.id},{z.id})",
                )
    return out


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def write_instance(inst: Instance, directory) -> None:
    """Write an instance to a directory in the canonical file formats.

    Distances are always written in miles, so a written instance reloads
    field-for-field equal to the original.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)

    has_pos = any(s.position is not None for s in inst.sites)
    with open(d / SITES_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["id", "name", "fixed_cost", "capacity"]
        if has_pos:
            cols += ["lat", "lon"]
        w.writerow(cols)
        for s in inst.sites:
            row = [s.id, s.name, repr(s.fixed_cost), repr(s.capacity)]
            if has_pos:
                row += (
                    [repr(s.position[0]), repr(s.position[1])] if s.position else ["", ""]
                )
            w.writerow(row)

    with open(d / ZONES_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "name"])
        for z in inst.zones:
            w.writerow([z.id, z.name])

    with open(d / PROFILES_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "descriptor", "reserve_low", "reserve_medium", "reserve_high"])
        for p in inst.profiles:
            w.writerow(
                [p.id, p.descriptor]
                + [repr(p.reservation_incentive[lvl]) for lvl in LEVELS]
            )

    with open(d / QUANTITIES_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone_id", "profile_id", "pills"])
        for z in inst.zones:
            for p in inst.profiles:
                w.writerow([z.id, p.id, repr(inst.unused_quantity[(z.id, p.id)])])

    with open(d / DISTANCES_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site_id", "zone_id", "miles"])
        for s in inst.sites:
            for z in inst.zones:
                w.writerow([s.id, z.id, repr(inst.distance[(s.id, z.id)])])

    scenario = {
        "theta": inst.scenario.theta,
        "incentive_level": inst.scenario.incentive_level,
        "penalty_per_prescription": inst.scenario.penalty_per_prescription,
        "pills_per_prescription": inst.scenario.pills_per_prescription,
        "mileage_rate": inst.scenario.mileage_rate,
        "max_distance": {
            lvl: inst.level_policy.max_distance[lvl] for lvl in inst.level_policy.levels
        },
    }
    (d / SCENARIO_FILE).write_text(json.dumps(scenario, indent=2) + "\n")


def make_instance(
    sites: Sequence[KioskSite],
    zones: Sequence[Zone],
    profiles: Sequence[Profile],
    unused_quantity: Mapping[tuple[str, str], float],
    distance: Mapping[tuple[str, str], float],
    scenario: ScenarioParams,
    level_policy: Optional[IncentiveLevelPolicy] = None,
) -> Instance:
    """Build an Instance in memory, densifying the quantity map.

    Unlike the file loader this accepts all-zero quantities, which is
    convenient for degenerate test instances.
    """
    if level_policy is None:
        level_policy = IncentiveLevelPolicy(
            LEVELS, {"low": 4.0, "medium": 8.0, "high": 20.0}
        )
    dense = {(z.id, p.id): 0.0 for z in zones for p in profiles}
    dense.update(unused_quantity)
    return Instance(
        sites=tuple(sites),
        zones=tuple(zones),
        profiles=tuple(profiles),
        unused_quantity=dense,
        distance=dict(distance),
        level_policy=level_policy,
        scenario=scenario,
    )
