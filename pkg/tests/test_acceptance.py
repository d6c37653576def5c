"""Acceptance gate: the headline behaviors this package promises.

Each test prints one [PASS]/[FAIL] line naming its criterion (run pytest with
-s to see them on success; they also appear in captured output on failure).
Expensive artifacts (the reference run, the trade-off sweep, the brute-force
solver audit) are computed once per module and shared.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from edgedpp.cli import main as cli_main
from edgedpp.config import default_scenario
from edgedpp.model import SystemConfig, encode_energy, patterns_tx, power_from_rate, rate_from_power, tx_energy
from edgedpp.oracle import run_all
from edgedpp.simulator import run, sweep

from helpers import check_trace_identities


def _verdict(num: int, desc: str, ok: bool, detail: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[{tag}] criterion {num}: {desc}{suffix}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_run():
    """Reference deployment, full horizon, wall-clock measured."""
    scenario = default_scenario()
    t0 = time.perf_counter()
    result = run(scenario)
    elapsed = time.perf_counter() - t0
    return scenario, result, elapsed


@pytest.fixture(scope="module")
def sweep_run():
    """12-point auto-grid V sweep over an equal-distance variant, timed."""
    scenario = default_scenario(distances=(100.0,) * 6, horizon=3000, warmup_slots=500)
    t0 = time.perf_counter()
    result = sweep(scenario)
    elapsed = time.perf_counter() - t0
    return scenario, result, elapsed


@pytest.fixture(scope="module")
def oracle_checks():
    """Full-size brute-force audit of both per-slot optimizers."""
    return {c.name: c for c in run_all(seed=1, count=1000, grid_rates=10_000,
                                       allocations=100_000)}


def test_1_constraint_tracking_at_full_horizon(default_run):
    scenario, result, elapsed = default_run
    problems = []
    for s in result.summaries:
        dev = scenario.devices[s.device_id]
        binding = dev.entropy_threshold < dev.profile.max_level_entropy
        if not binding:
            continue
        if s.mean_entropy > dev.entropy_threshold + 0.02:
            problems.append(
                f"dev{s.device_id}: mean entropy {s.mean_entropy:.4f} exceeds "
                f"{dev.entropy_threshold} + 0.02"
            )
        if s.z_over_t >= 1e-2:
            problems.append(f"dev{s.device_id}: Z_T/T = {s.z_over_t:.4f} >= 1e-2")
    if elapsed >= 10.0:
        problems.append(f"runtime {elapsed:.1f} s >= 10 s")
    _verdict(
        1,
        "constrained devices meet their entropy thresholds with vanishing "
        "virtual queues inside the runtime budget",
        not problems,
        "; ".join(problems) or f"runtime {elapsed:.1f} s",
    )


def test_2_energy_delay_tradeoff_sweep(sweep_run):
    scenario, result, elapsed = sweep_run
    k = len(scenario.devices)
    energy = np.array([[p.summaries[i].mean_energy for i in range(k)] for p in result.points])
    delay = np.array([[p.summaries[i].little_delay_s for i in range(k)] for p in result.points])
    problems = []
    if len(result.points) != 12:
        problems.append(f"expected 12 sweep points, got {len(result.points)}")
    # energy falls (within 5%) and delay rises (within 5%) as V grows
    for j in range(len(result.points) - 1):
        for i in range(k):
            if energy[j + 1, i] > energy[j, i] * 1.05:
                problems.append(
                    f"dev{i}: energy rose {energy[j, i]:.3e} -> {energy[j + 1, i]:.3e} "
                    f"between V points {j} and {j + 1}"
                )
            if delay[j + 1, i] < delay[j, i] * 0.95:
                problems.append(
                    f"dev{i}: delay fell {delay[j, i]:.4f} -> {delay[j + 1, i]:.4f} "
                    f"between V points {j} and {j + 1}"
                )
    # at each V, tightening the threshold cannot cut energy: the looser
    # device must sit at or below the tighter one (5% tolerance)
    thresholds = [d.entropy_threshold for d in scenario.devices]
    order = np.argsort(thresholds)  # ascending: tightest first
    for a, b in zip(order[:-1], order[1:]):
        for j in range(len(result.points)):
            if energy[j, b] > energy[j, a] * 1.05:
                problems.append(
                    f"V point {j}: threshold {thresholds[b]} device spends "
                    f"{energy[j, b]:.3e} > {energy[j, a]:.3e} of the tighter "
                    f"{thresholds[a]} device"
                )
    if elapsed >= 60.0:
        problems.append(f"runtime {elapsed:.1f} s >= 60 s")
    _verdict(
        2,
        "V sweep trades energy against delay monotonically and tighter "
        "reliability costs more energy",
        not problems,
        "; ".join(problems[:4]) or f"runtime {elapsed:.1f} s",
    )


def test_3_radio_solver_matches_brute_force(oracle_checks):
    grid = oracle_checks["radio grid optimum"]
    residual = oracle_checks["radio interior residual"]
    ok = grid.passed and residual.passed
    _verdict(
        3,
        "per-slot radio decisions match a dense grid search and sit on the "
        "stationarity root",
        ok,
        f"grid worst gap {grid.worst:.2e} over {grid.instances} instances, "
        f"interior residual worst {residual.worst:.2e} over {residual.instances}",
    )


def test_4_cpu_scheduler_is_optimal(oracle_checks):
    random_check = oracle_checks["scheduler vs random"]
    vertex = oracle_checks["scheduler vertex exact"]
    ok = random_check.passed and vertex.passed
    _verdict(
        4,
        "greedy CPU split beats random feasible allocations and equals the "
        "exact small-instance optimum",
        ok,
        f"random worst gap {random_check.worst:.2e}, vertex failures {vertex.failures}",
    )


def test_5_conservation_little_and_overload(default_run):
    scenario, result, _ = default_run
    problems = []

    # (a) exact per-slot bookkeeping on an independently seeded run
    small = default_scenario(horizon=1000, warmup_slots=100, rng_seed=123)
    check_trace_identities(run(small).trace, small)

    # (b) Little's law against the empirical delay on the stationary run
    for s in result.summaries:
        if abs(s.empirical_delay_s - s.little_delay_s) > 0.10 * s.little_delay_s:
            problems.append(
                f"dev{s.device_id}: Little {s.little_delay_s:.4f} s vs empirical "
                f"{s.empirical_delay_s:.4f} s"
            )

    # (c) a 50x arrival surge must be flagged as drifting
    surge = default_scenario(distances=(100.0,) * 6, horizon=800, warmup_slots=80)
    surge = replace(
        surge, devices=tuple(replace(d, arrival_rate=50 * d.arrival_rate)
                             for d in surge.devices)
    )
    for s in run(surge).summaries:
        if s.local_stable and s.remote_stable:
            problems.append(f"overload dev{s.device_id} not flagged as drifting")

    _verdict(
        5,
        "patterns are conserved slot by slot, Little's law holds when "
        "stationary, and overload is flagged",
        not problems,
        "; ".join(problems),
    )


def test_6_closed_form_fidelity():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    rng = np.random.default_rng(20_260_825)
    sys_ = SystemConfig()
    problems = []

    # rate <-> power round trip
    worst_rt = 0.0
    for _ in range(1000):
        bw = 10.0 ** rng.uniform(6.5, 8.0)
        rate = bw * rng.uniform(0.01, 30.0)
        gain = 10.0 ** rng.uniform(-12.0, -5.0)
        p = power_from_rate(rate, gain, bw, sys_.noise_psd_eff)
        back = rate_from_power(p, gain, bw, sys_.noise_psd_eff)
        worst_rt = max(worst_rt, abs(back - rate) / rate)
    if worst_rt > 1e-9:
        problems.append(f"round-trip error {worst_rt:.2e} > 1e-9")

    # energy formulas against 50-digit arithmetic
    worst_enc = 0.0
    worst_tx = 0.0
    for _ in range(1000):
        bw = 10.0 ** rng.uniform(6.5, 8.0)
        rate = bw * rng.uniform(0.01, 30.0)
        gain = 10.0 ** rng.uniform(-12.0, -5.0)
        bits = 10.0 ** rng.uniform(4.0, 6.0)
        kappa = 10.0 ** rng.uniform(-28.0, -26.0)
        cycles = 10.0 ** rng.uniform(5.0, 6.0)
        e = encode_energy(rate, bits, kappa, cycles, sys_.tau_encode, sys_.tau_tx)
        f_l = (mp.mpf(sys_.tau_tx) * mp.mpf(rate) * mp.mpf(cycles)
               / (mp.mpf(sys_.tau_encode) * mp.mpf(bits)))
        e_mp = mp.mpf(sys_.tau_encode) * mp.mpf(kappa) * f_l**3
        worst_enc = max(worst_enc, abs(e - float(e_mp)) / float(e_mp))

        et = tx_energy(rate, gain, bw, sys_.noise_psd_eff, sys_.tau_tx)
        p_mp = (mp.mpf(sys_.noise_psd_eff) * mp.mpf(bw) / mp.mpf(gain)) * (
            mp.power(2, mp.mpf(rate) / mp.mpf(bw)) - 1
        )
        et_mp = mp.mpf(sys_.tau_tx) * p_mp
        worst_tx = max(worst_tx, abs(et - float(et_mp)) / float(et_mp))
    if worst_enc > 1e-12:
        problems.append(f"encode energy error {worst_enc:.2e} > 1e-12")
    if worst_tx > 1e-12:
        problems.append(f"transmit energy error {worst_tx:.2e} > 1e-12")

    # floor identity against exact arithmetic, away from integer boundaries
    floor_bad = 0
    for _ in range(1000):
        bits = float(rng.integers(30_000, 400_000))
        m = int(rng.integers(1, 100))
        frac = rng.uniform(0.05, 0.95)
        rate = (m + frac) * bits / sys_.tau_tx
        n = patterns_tx(rate, bits, sys_.tau_tx)
        n_mp = int(mp.floor(mp.mpf(sys_.tau_tx) * mp.mpf(rate) / mp.mpf(bits)))
        if n != n_mp:
            floor_bad += 1
    if floor_bad:
        problems.append(f"{floor_bad} floor mismatches out of 1000")

    _verdict(
        6,
        "radio and energy closed forms agree with high-precision arithmetic",
        not problems,
        "; ".join(problems)
        or f"round-trip {worst_rt:.1e}, encode {worst_enc:.1e}, tx {worst_tx:.1e}",
    )


def test_7_benchmark_devices_hit_profile_anchors(default_run):
    scenario, result, _ = default_run
    targets = {0.27: (0.27, 0.88), 0.88: (0.88, 0.45)}
    problems = []
    seen = 0
    for s in result.summaries:
        th = scenario.devices[s.device_id].entropy_threshold
        if th not in targets:
            continue
        seen += 1
        want_h, want_acc = targets[th]
        if abs(s.mean_entropy - want_h) > 0.01:
            problems.append(
                f"dev{s.device_id}: mean entropy {s.mean_entropy:.4f} vs {want_h} +/- 0.01"
            )
        if abs(s.accuracy - want_acc) > 0.01:
            problems.append(
                f"dev{s.device_id}: accuracy {s.accuracy:.4f} vs {want_acc} +/- 0.01"
            )
    if seen != 2:
        problems.append(f"expected both benchmark devices, found {seen}")
    _verdict(
        7,
        "benchmark devices realize the profile's extreme operating points",
        not problems,
        "; ".join(problems),
    )


def test_8_byte_identical_reproducibility(tmp_path):
    problems = []

    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli_main(["run", "--out", str(out), "--horizon", "300"]) == 0
    if (a / "trace.csv").read_bytes() != (b / "trace.csv").read_bytes():
        problems.append("trace.csv differs between identical runs")
    if (a / "summary.csv").read_bytes() != (b / "summary.csv").read_bytes():
        problems.append("summary.csv differs between identical runs")

    s1, s2 = tmp_path / "s1", tmp_path / "s2"
    sweep_args = ["sweep", "--horizon", "150", "--v-grid", "1e3,1e4,1e5,1e6"]
    assert cli_main(sweep_args + ["--out", str(s1), "--jobs", "1"]) == 0
    assert cli_main(sweep_args + ["--out", str(s2), "--jobs", "2"]) == 0
    if (s1 / "sweep.csv").read_bytes() != (s2 / "sweep.csv").read_bytes():
        problems.append("sweep.csv differs between serial and parallel execution")

    _verdict(
        8,
        "equal config and seed give byte-identical outputs, independent of "
        "sweep parallelism",
        not problems,
        "; ".join(problems),
    )
