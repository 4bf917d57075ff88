"""Kiosk placement and incentive planning for drug take-back campaigns.

The package decides which disposal kiosks to open and what incentive to
offer each user profile so that the total campaign cost (kiosk fixed
costs, incentive payouts and penalties for unreturned pills) is minimal.
The production solver runs a two-stage cut-generation scheme on top of
an in-repo simplex/branch-and-bound stack; an independent brute-force
reference solver cross-checks it on small instances.
"""

__version__ = "0.1.0"

from .benders import SolveReport, benders_solve  # noqa: F401
from .model import (  # noqa: F401
    DerivedParams,
    IncentiveLevelPolicy,
    Instance,
    KioskSite,
    Profile,
    ScenarioParams,
    Zone,
    derive_params,
    load_instance,
    load_instance_dir,
    make_instance,
    with_scenario,
    write_instance,
)
from .oracle import OracleResult, oracle_solve  # noqa: F401
from .synth import generate_instance  # noqa: F401
