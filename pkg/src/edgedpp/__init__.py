"""Slotted-time simulator and drift-plus-penalty solver for edge classification offloading.

Devices encode sensor patterns at a selectable compression level, push them
over a fading uplink to an edge server, and the server classifies them with a
shared CPU. The controller trades transmit + encoding energy against queue
backlogs and an average-entropy reliability constraint, one slot at a time.
"""

from edgedpp.config import (
    Scenario,
    SweepConfig,
    default_scenario,
    load_scenario,
    scenario_from_dict,
    with_penalty_weight,
)
from edgedpp.inference import default_profile, load_profile_csv
from edgedpp.model import (
    ConfigError,
    DeviceConfig,
    EncodingLevel,
    EncodingProfile,
    ProfileError,
    SystemConfig,
)
from edgedpp.simulator import (
    RunResult,
    Simulation,
    SweepPoint,
    SweepResult,
    auto_v_grid,
    run,
    sweep,
)

__all__ = [
    "ConfigError",
    "DeviceConfig",
    "EncodingLevel",
    "EncodingProfile",
    "ProfileError",
    "RunResult",
    "Scenario",
    "Simulation",
    "SweepConfig",
    "SweepPoint",
    "SweepResult",
    "SystemConfig",
    "auto_v_grid",
    "default_profile",
    "default_scenario",
    "load_profile_csv",
    "load_scenario",
    "run",
    "scenario_from_dict",
    "sweep",
    "with_penalty_weight",
]

__version__ = "0.1.0"
