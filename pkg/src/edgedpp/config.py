"""Scenario assembly: JSON loading with unit strings, and the built-in default.

Internally everything is SI. Config files may write quantities either as bare
numbers (already SI, except carrier_freq_ghz which stays in GHz) or as strings
with a unit suffix: "25 ms", "100 MHz", "20 dBm", "-174 dBm/Hz", "5 dB",
"100 m". The default scenario is six devices dropped in a 100 m cell sharing
100 MHz evenly: four with entropy thresholds 0.3/0.4/0.5/0.6 nats and two
benchmark devices pinned at the profile's extreme entropies (0.27 forces the
largest encoding, 0.88 never binds).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace

from edgedpp.inference import default_profile, load_profile_csv
from edgedpp.model import (
    ConfigError,
    DeviceConfig,
    EncodingLevel,
    EncodingProfile,
    SystemConfig,
)

DEFAULT_THRESHOLDS = (0.3, 0.4, 0.5, 0.6, 0.27, 0.88)

_QUANTITY_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([a-zA-Z/]*)\s*$")

_UNIT_TABLES = {
    "s": {"": 1.0, "s": 1.0, "ms": 1e-3, "us": 1e-6},
    "Hz": {"": 1.0, "Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "m": {"": 1.0, "m": 1.0, "km": 1e3},
    "dB": {"": 1.0, "dB": 1.0},
    "1": {"": 1.0},
}


def parse_quantity(value, target: str) -> float:
    """Convert a number or unit-suffixed string to the target SI unit.

    Power targets accept dBm, PSD targets accept dBm/Hz; both convert to
    watts. Bare numbers are taken to be in the target unit already.
    """
    if isinstance(value, bool):
        raise ConfigError(f"expected a quantity, got boolean {value}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected number or string quantity, got {value!r}")
    m = _QUANTITY_RE.match(value)
    if not m:
        raise ConfigError(f"cannot parse quantity {value!r}")
    num, unit = m.group(1), m.group(2)
    try:
        x = float(num)
    except ValueError as exc:
        raise ConfigError(f"cannot parse quantity {value!r}") from exc
    if target == "W":
        if unit == "dBm":
            return 10.0 ** ((x - 30.0) / 10.0)
        table = {"": 1.0, "W": 1.0, "mW": 1e-3, "uW": 1e-6}
    elif target == "W/Hz":
        if unit == "dBm/Hz":
            return 10.0 ** ((x - 30.0) / 10.0)
        table = {"": 1.0, "W/Hz": 1.0}
    else:
        table = _UNIT_TABLES.get(target)
        if table is None:
            raise ConfigError(f"unknown unit target {target!r}")
    if unit not in table:
        raise ConfigError(f"unit {unit!r} not valid for a quantity in {target}: {value!r}")
    return x * table[unit]


@dataclass(frozen=True)
class SweepConfig:
    """Penalty-weight sweep settings. v_grid=None derives a grid from a pilot run."""

    v_grid: tuple[float, ...] | None = None
    points: int = 12
    span_decades: float = 4.0
    common_random_numbers: bool = True

    def __post_init__(self) -> None:
        if self.v_grid is not None:
            if len(self.v_grid) == 0:
                raise ConfigError("v_grid must not be empty")
            if any(v < 0 or not math.isfinite(v) for v in self.v_grid):
                raise ConfigError(f"v_grid entries must be finite and >= 0: {self.v_grid}")
            if list(self.v_grid) != sorted(self.v_grid):
                raise ConfigError("v_grid must be sorted ascending")
        if self.points < 2:
            raise ConfigError(f"sweep needs at least 2 points, got {self.points}")
        if self.span_decades <= 0:
            raise ConfigError(f"span_decades must be positive, got {self.span_decades}")


@dataclass(frozen=True)
class Scenario:
    """One fully resolved experiment: system knobs plus every device."""

    system: SystemConfig
    devices: tuple[DeviceConfig, ...]
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self) -> None:
        if len(self.devices) != self.system.num_devices:
            raise ConfigError(
                f"system.num_devices = {self.system.num_devices} but "
                f"{len(self.devices)} devices configured"
            )
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"device ids must be unique, got {ids}")
        total_bw = sum(d.bandwidth for d in self.devices)
        if total_bw > self.system.total_bandwidth * (1.0 + 1e-9):
            raise ConfigError(
                f"device bandwidths sum to {total_bw:.6g} Hz, exceeding the "
                f"{self.system.total_bandwidth:.6g} Hz total"
            )


def default_scenario(
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
    distances: tuple[float, ...] | None = None,
    profile: EncodingProfile | None = None,
    sweep: SweepConfig | None = None,
    **system_overrides,
) -> Scenario:
    """Reference scenario; keyword overrides land on SystemConfig.

    distances=None keeps the seeded uniform-disk placement. Pass a tuple of
    distances (meters) to pin devices in place.
    """
    prof = profile if profile is not None else default_profile()
    system = SystemConfig(num_devices=len(thresholds), **system_overrides)
    bw = system.total_bandwidth / system.num_devices
    if distances is not None and len(distances) != len(thresholds):
        raise ConfigError(
            f"{len(distances)} distances given for {len(thresholds)} devices"
        )
    devices = tuple(
        DeviceConfig(
            device_id=k,
            entropy_threshold=th,
            profile=prof,
            bandwidth=bw,
            distance=None if distances is None else distances[k],
        )
        for k, th in enumerate(thresholds)
    )
    return Scenario(system=system, devices=devices, sweep=sweep or SweepConfig())


# ---------------------------------------------------------------------------
# JSON scenario files
# ---------------------------------------------------------------------------

_SYSTEM_FIELDS = {
    "slot_duration": "s",
    "encode_fraction": "1",
    "num_devices": "int",
    "total_bandwidth": "Hz",
    "noise_psd": "W/Hz",
    "noise_figure_db": "dB",
    "carrier_freq_ghz": "GHz",
    "mec_max_freq": "Hz",
    "cell_radius": "m",
    "penalty_weight": "1",
    "vq_step": "1",
    "entropy_noise_sigma": "1",
    "horizon": "int",
    "warmup_slots": "int",
    "rng_seed": "int",
    "cap_rate_to_backlog": "bool",
    "quantize_rate_to_patterns": "bool",
}

_DEVICE_FIELDS = {
    "device_id": "int",
    "entropy_threshold": "1",
    "bandwidth": "Hz",
    "distance": "m",
    "max_tx_power": "W",
    "max_local_freq": "Hz",
    "kappa": "1",
    "encode_cycles_per_bit": "1",
    "classify_cycles": "1",
    "arrival_rate": "1",
}

_SWEEP_FIELDS = {"v_grid", "points", "span_decades", "common_random_numbers"}


def _parse_field(name: str, value, kind: str):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean, got {value!r}")
        return value
    if kind == "GHz":
        # Stored in GHz; accept "3.5", 3.5, or "3500 MHz".
        if isinstance(value, str) and any(u in value for u in ("Hz",)):
            return parse_quantity(value, "Hz") / 1e9
        return parse_quantity(value, "1")
    return parse_quantity(value, kind)


def _resolve_profile(value, base_dir) -> EncodingProfile:
    if value is None or value == "default":
        return default_profile()
    if isinstance(value, str):
        path = base_dir / value if base_dir is not None else value
        return load_profile_csv(path)
    if isinstance(value, list):
        try:
            levels = tuple(
                EncodingLevel(
                    level_id=int(row["level_id"]),
                    bits=float(parse_quantity(row["bits"], "1")),
                    entropy=float(row["entropy"]),
                    accuracy=float(row["accuracy"]),
                )
                for row in value
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad inline profile row: {exc}") from exc
        return EncodingProfile(levels=levels)
    raise ConfigError(f"profile must be 'default', a CSV path, or an inline table: {value!r}")


def scenario_from_dict(data: dict, base_dir=None) -> Scenario:
    """Build a Scenario from a parsed JSON document; unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigError(f"scenario document must be an object, got {type(data).__name__}")
    unknown = set(data) - {"system", "devices", "profile", "sweep"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    sys_in = data.get("system", {})
    if not isinstance(sys_in, dict):
        raise ConfigError("'system' must be an object")
    bad = set(sys_in) - set(_SYSTEM_FIELDS)
    if bad:
        raise ConfigError(f"unknown system keys: {sorted(bad)}")
    sys_kwargs = {
        name: _parse_field(f"system.{name}", value, _SYSTEM_FIELDS[name])
        for name, value in sys_in.items()
    }

    shared_profile = _resolve_profile(data.get("profile"), base_dir)

    dev_in = data.get("devices")
    if dev_in is None:
        system = SystemConfig(**sys_kwargs)
        bw = system.total_bandwidth / system.num_devices
        if system.num_devices == len(DEFAULT_THRESHOLDS):
            thresholds = DEFAULT_THRESHOLDS
        else:
            raise ConfigError(
                "scenario without a 'devices' list needs num_devices = "
                f"{len(DEFAULT_THRESHOLDS)} (the default threshold set); "
                f"got {system.num_devices}"
            )
        devices = tuple(
            DeviceConfig(
                device_id=k, entropy_threshold=th, profile=shared_profile, bandwidth=bw
            )
            for k, th in enumerate(thresholds)
        )
    else:
        if not isinstance(dev_in, list) or not dev_in:
            raise ConfigError("'devices' must be a non-empty list")
        if "num_devices" not in sys_kwargs:
            sys_kwargs["num_devices"] = len(dev_in)
        system = SystemConfig(**sys_kwargs)
        default_bw = system.total_bandwidth / len(dev_in)
        devices = []
        for idx, entry in enumerate(dev_in):
            if not isinstance(entry, dict):
                raise ConfigError(f"device entry {idx} must be an object")
            bad = set(entry) - set(_DEVICE_FIELDS) - {"profile"}
            if bad:
                raise ConfigError(f"device entry {idx}: unknown keys {sorted(bad)}")
            kwargs = {}
            for name, value in entry.items():
                if name == "profile":
                    continue
                if name == "distance" and value is None:
                    kwargs[name] = None
                    continue
                kwargs[name] = _parse_field(
                    f"devices[{idx}].{name}", value, _DEVICE_FIELDS[name]
                )
            kwargs.setdefault("device_id", idx)
            kwargs.setdefault("bandwidth", default_bw)
            if "entropy_threshold" not in kwargs:
                raise ConfigError(f"device entry {idx} is missing entropy_threshold")
            prof = (
                _resolve_profile(entry["profile"], base_dir)
                if "profile" in entry
                else shared_profile
            )
            devices.append(DeviceConfig(profile=prof, **kwargs))
        devices = tuple(devices)

    sweep_in = data.get("sweep", {})
    if not isinstance(sweep_in, dict):
        raise ConfigError("'sweep' must be an object")
    bad = set(sweep_in) - _SWEEP_FIELDS
    if bad:
        raise ConfigError(f"unknown sweep keys: {sorted(bad)}")
    sweep_kwargs = dict(sweep_in)
    if sweep_kwargs.get("v_grid") is not None:
        sweep_kwargs["v_grid"] = tuple(float(v) for v in sweep_kwargs["v_grid"])
    sweep = SweepConfig(**sweep_kwargs)

    return Scenario(system=system, devices=devices, sweep=sweep)


def load_scenario(path) -> Scenario:
    """Read a scenario JSON file; relative profile paths resolve next to it."""
    from pathlib import Path

    p = Path(path)
    try:
        with open(p) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    return scenario_from_dict(data, base_dir=p.parent)


def with_penalty_weight(scenario: Scenario, v: float) -> Scenario:
    """Copy of a scenario with a different V knob, everything else untouched."""
    return replace(scenario, system=replace(scenario.system, penalty_weight=v))
