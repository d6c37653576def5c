"""Command line front end: run, sweep, validate-profile, and oracle.

Exit codes: 0 success, 2 configuration problem (missing or invalid config),
3 output write failure, 4 profile contract violation (validate-profile),
5 oracle failure. Outputs are CSV by default; --format json mirrors the same
tables as JSON. Floats are serialized with repr, so equal runs produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from edgedpp import oracle
from edgedpp.config import Scenario, default_scenario, load_scenario
from edgedpp.inference import load_profile_csv
from edgedpp.model import ConfigError, ProfileError
from edgedpp.simulator import RunResult, SweepResult, run, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WRITE = 3
EXIT_PROFILE = 4
EXIT_ORACLE = 5

TRACE_COLUMNS = [
    "slot", "device", "q_local", "q_remote", "vq", "level", "rate_bps",
    "tx_power_w", "local_freq_hz", "remote_freq_hz", "energy_encode_j",
    "energy_tx_j", "n_tx", "n_classified", "batch_entropy",
    "running_entropy", "running_accuracy",
]

SUMMARY_COLUMNS = [
    "device", "distance_m", "entropy_threshold", "mean_energy_j",
    "little_delay_s", "empirical_delay_s", "mean_entropy", "accuracy",
    "local_stable", "remote_stable", "z_over_t",
]

SWEEP_COLUMNS = ["v", "device", "mean_energy_j", "little_delay_s", "mean_entropy", "accuracy"]


def _fmt(value) -> str:
    """One cell of CSV. repr keeps full float precision and is stable."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value):
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        return None if math.isnan(value) else value
    return value


def _write_table(path: Path, columns: list[str], rows, fmt: str) -> None:
    if fmt == "json":
        doc = {"columns": columns, "rows": [[_jsonable(v) for v in row] for row in rows]}
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        return
    with open(path.with_suffix(".csv"), "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _trace_rows(result: RunResult):
    tr = result.trace
    horizon, k = tr.q_local.shape
    for t in range(horizon):
        for i in range(k):
            level = int(tr.level[t, i])
            yield (
                t,
                result.scenario.devices[i].device_id,
                int(tr.q_local[t, i]),
                int(tr.q_remote[t, i]),
                float(tr.vq[t, i]),
                None if level < 0 else level,
                float(tr.rate[t, i]),
                float(tr.tx_power[t, i]),
                float(tr.local_freq[t, i]),
                float(tr.remote_freq[t, i]),
                float(tr.energy_encode[t, i]),
                float(tr.energy_tx[t, i]),
                int(tr.n_tx[t, i]),
                int(tr.n_classified[t, i]),
                float(tr.batch_entropy[t, i]),
                float(tr.running_entropy[t, i]),
                float(tr.running_accuracy[t, i]),
            )


def _summary_rows(result: RunResult):
    for s in result.summaries:
        yield (
            s.device_id, s.distance, s.entropy_threshold, s.mean_energy,
            s.little_delay_s, s.empirical_delay_s, s.mean_entropy, s.accuracy,
            s.local_stable, s.remote_stable, s.z_over_t,
        )


def _sweep_rows(result: SweepResult):
    for point in result.points:
        for s in point.summaries:
            yield (
                point.v, s.device_id, s.mean_energy, s.little_delay_s,
                s.mean_entropy, s.accuracy,
            )


def _load(args) -> Scenario:
    if args.config is None:
        scenario = default_scenario()
    else:
        scenario = load_scenario(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        overrides["horizon"] = args.horizon
        if scenario.system.warmup_slots >= args.horizon:
            overrides["warmup_slots"] = args.horizon // 10
    if getattr(args, "v", None) is not None:
        overrides["penalty_weight"] = args.v
    if overrides:
        from dataclasses import replace

        scenario = replace(scenario, system=replace(scenario.system, **overrides))
    return scenario


def cmd_run(args) -> int:
    try:
        scenario = _load(args)
    except (ConfigError, ProfileError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run(scenario)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_table(out / "trace", TRACE_COLUMNS, _trace_rows(result), args.format)
        _write_table(out / "summary", SUMMARY_COLUMNS, _summary_rows(result), args.format)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_WRITE
    system = result.scenario.system
    print(
        f"run complete: {system.horizon} slots, {len(result.summaries)} devices, "
        f"V={system.penalty_weight:g}, seed={result.seed} -> {out}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        scenario = _load(args)
        v_grid = None
        if args.v_grid is not None:
            v_grid = tuple(float(x) for x in args.v_grid.split(","))
            if any(v < 0 for v in v_grid):
                raise ConfigError(f"V grid entries must be >= 0: {args.v_grid}")
    except (ConfigError, ProfileError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = sweep(scenario, v_grid=v_grid, jobs=args.jobs)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_table(out / "sweep", SWEEP_COLUMNS, _sweep_rows(result), args.format)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_WRITE
    print(
        f"sweep complete: {len(result.points)} V points x "
        f"{len(result.points[0].summaries)} devices -> {out}"
    )
    return EXIT_OK


def cmd_validate_profile(args) -> int:
    try:
        profile = load_profile_csv(args.profile)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProfileError as exc:
        print(f"profile invalid: {exc}", file=sys.stderr)
        return EXIT_PROFILE
    print(f"profile ok: {len(profile.levels)} levels, "
          f"entropy {profile.levels[-1].entropy:g}..{profile.levels[0].entropy:g} nats")
    return EXIT_OK


def cmd_oracle(args) -> int:
    checks = oracle.run_all(
        seed=args.seed if args.seed is not None else 1,
        count=args.instances,
        grid_rates=args.grid_rates,
        allocations=args.allocations,
    )
    print(oracle.format_report(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgedpp",
        description="Slotted-time simulator for energy-efficient edge classification offloading.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_v: bool):
        p.add_argument("--config", help="scenario JSON; omit for the built-in default")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, help="override the scenario RNG seed")
        p.add_argument("--horizon", type=int, help="override the number of slots")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if with_v:
            p.add_argument("--v", type=float, help="override the penalty weight V")

    p_run = sub.add_parser("run", help="simulate one scenario and write trace + summary")
    add_common(p_run, with_v=True)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a V sweep and write the trade-off table")
    add_common(p_sweep, with_v=False)
    p_sweep.add_argument("--v-grid", help="comma-separated V values (default: auto grid)")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_prof = sub.add_parser("validate-profile", help="check an encoding profile CSV")
    p_prof.add_argument("profile", help="profile CSV path")
    p_prof.set_defaults(func=cmd_validate_profile)

    p_oracle = sub.add_parser("oracle", help="brute-force checks of solver and scheduler")
    p_oracle.add_argument("--seed", type=int, default=1)
    p_oracle.add_argument("--instances", type=int, default=1000)
    p_oracle.add_argument("--grid-rates", type=int, default=10_000)
    p_oracle.add_argument("--allocations", type=int, default=100_000)
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
