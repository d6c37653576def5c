"""Slot-by-slot simulation loop, single runs, and penalty-weight sweeps.

Per slot, in order: observe start-of-slot queues and the slot's channel
draws, solve every device's radio subproblem, floor the delivered pattern
count and charge energy, advance the local queues, split the server CPU
against start-of-slot remote backlogs, advance the remote queues, realize
classification outcomes, and push the entropy excess into the virtual queues.
All randomness is pre-drawn from named substreams, so a run is a pure
function of (scenario, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from edgedpp.config import Scenario, with_penalty_weight
from edgedpp.inference import classify_batch
from edgedpp.model import SlotDecision, check_decision, patterns_classified, patterns_tx
from edgedpp.queueing import (
    LocalQueue,
    RemoteQueue,
    RunningAverages,
    VirtualQueue,
    little_delay,
    local_update,
    remote_update,
    stability_diagnostic,
    vq_update,
)
from edgedpp.solver import RadioWorkspace, schedule_cpu
from edgedpp.stochastic import RngStreams, arrival_table, channel_table, derive_sweep_seed, place_on_disk

#: OLS backlog growth (patterns/slot) above which a queue counts as drifting.
STABILITY_SLOPE_TOL = 1e-3


@dataclass
class TraceBuffers:
    """Per-slot, per-device state and decision history for one run.

    Queue columns are start-of-slot values. level is -1 for the null action.
    batch_entropy is the mean realized entropy over patterns classified in the
    slot (nan if none); running_entropy / running_accuracy accumulate from
    slot 0 (nan until the first classification).
    """

    q_local: np.ndarray
    q_remote: np.ndarray
    vq: np.ndarray
    level: np.ndarray
    rate: np.ndarray
    tx_power: np.ndarray
    local_freq: np.ndarray
    remote_freq: np.ndarray
    energy_encode: np.ndarray
    energy_tx: np.ndarray
    n_tx: np.ndarray
    n_classified: np.ndarray
    arrivals: np.ndarray
    batch_entropy: np.ndarray
    running_entropy: np.ndarray
    running_accuracy: np.ndarray
    lyapunov: np.ndarray

    @classmethod
    def empty(cls, horizon: int, num_devices: int) -> "TraceBuffers":
        f = lambda: np.zeros((horizon, num_devices))
        i = lambda: np.zeros((horizon, num_devices), dtype=np.int64)
        return cls(
            q_local=i(), q_remote=i(), vq=f(),
            level=np.full((horizon, num_devices), -1, dtype=np.int64),
            rate=f(), tx_power=f(), local_freq=f(), remote_freq=f(),
            energy_encode=f(), energy_tx=f(),
            n_tx=i(), n_classified=i(), arrivals=i(),
            batch_entropy=np.full((horizon, num_devices), np.nan),
            running_entropy=np.full((horizon, num_devices), np.nan),
            running_accuracy=np.full((horizon, num_devices), np.nan),
            lyapunov=np.zeros(horizon),
        )


@dataclass(frozen=True)
class DeviceSummary:
    """Post-warmup averages for one device over one run."""

    device_id: int
    distance: float
    entropy_threshold: float
    mean_energy: float
    mean_energy_encode: float
    mean_energy_tx: float
    mean_q_local: float
    mean_q_remote: float
    mean_arrivals: float
    little_delay_s: float | None
    empirical_delay_s: float | None
    mean_entropy: float | None
    accuracy: float | None
    classified: int
    local_slope: float
    remote_slope: float
    local_stable: bool
    remote_stable: bool
    final_vq: float
    z_over_t: float


@dataclass
class RunResult:
    """Everything one run produced: resolved scenario, trace, and summaries."""

    scenario: Scenario
    seed: int
    distances: np.ndarray
    trace: TraceBuffers
    summaries: tuple[DeviceSummary, ...]

    @property
    def penalty_weight(self) -> float:
        return self.scenario.system.penalty_weight


@dataclass
class SweepPoint:
    v: float
    seed: int
    summaries: tuple[DeviceSummary, ...]


@dataclass
class SweepResult:
    scenario: Scenario
    v_grid: np.ndarray
    points: tuple[SweepPoint, ...]


class Simulation:
    """Mutable state of one run; step() advances a single slot.

    gains/arrivals tables may be injected for hand-built tests; by default
    they are drawn up front from the scenario's named substreams.
    """

    def __init__(
        self,
        scenario: Scenario,
        gains: np.ndarray | None = None,
        arrivals: np.ndarray | None = None,
    ):
        self.scenario = scenario
        system = scenario.system
        devices = scenario.devices
        k = len(devices)
        horizon = system.horizon
        streams = RngStreams(system.rng_seed)

        drawn = place_on_disk(k, system.cell_radius, streams.placement())
        self.distances = np.array(
            [dev.distance if dev.distance is not None else float(drawn[i])
             for i, dev in enumerate(devices)]
        )
        self.gains = gains if gains is not None else channel_table(
            devices, self.distances, system, streams, horizon
        )
        self.arrivals = arrivals if arrivals is not None else arrival_table(
            devices, streams, horizon
        )
        if self.gains.shape != (horizon, k) or self.arrivals.shape != (horizon, k):
            raise ValueError(
                f"gains/arrivals must have shape {(horizon, k)}, got "
                f"{self.gains.shape} and {self.arrivals.shape}"
            )

        self.inference_gens = [streams.inference(dev.device_id) for dev in devices]
        self.workspace = RadioWorkspace(system, devices)
        self.local = [LocalQueue() for _ in range(k)]
        self.remote = [RemoteQueue() for _ in range(k)]
        self.vqs = [VirtualQueue() for _ in range(k)]
        self.averages = [RunningAverages(warmup=system.warmup_slots) for _ in range(k)]
        self.trace = TraceBuffers.empty(horizon, k)
        self.classify_cycles = np.array([dev.classify_cycles for dev in devices])
        self._run_entropy = np.zeros(k)
        self._run_classified = np.zeros(k, dtype=np.int64)
        self._run_correct = np.zeros(k, dtype=np.int64)
        self.slot = 0

    def step(self) -> None:
        t = self.slot
        system = self.scenario.system
        devices = self.scenario.devices
        k = len(devices)
        tr = self.trace

        q_u = [q.backlog for q in self.local]
        q_r = [q.backlog for q in self.remote]
        z = [vq.value for vq in self.vqs]
        gains_row = self.gains[t]
        arrivals_row = self.arrivals[t]

        sols = self.workspace.solve(q_u, q_r, z, gains_row)

        departed = []
        for i, dev in enumerate(devices):
            sol = sols[i]
            if sol.level is None:
                n_tx = 0
                level_id = None
            else:
                n_tx = patterns_tx(sol.rate, sol.level.bits, system.tau_tx)
                level_id = sol.level.level_id
            departed.append(
                local_update(self.local[i], n_tx, int(arrivals_row[i]), t, level_id)
            )
            tr.level[t, i] = -1 if level_id is None else level_id
            tr.rate[t, i] = sol.rate
            tr.tx_power[t, i] = sol.tx_power
            tr.local_freq[t, i] = sol.local_freq
            tr.energy_encode[t, i] = sol.energy_encode
            tr.energy_tx[t, i] = sol.energy_tx
            tr.n_tx[t, i] = n_tx

        freqs = schedule_cpu(q_r, self.classify_cycles, system.mec_max_freq, system.slot_duration)
        assert freqs.sum() <= system.mec_max_freq * (1.0 + 1e-9), (
            f"slot {t}: CPU split {freqs.sum()} exceeds budget {system.mec_max_freq}"
        )

        for i, dev in enumerate(devices):
            sol = sols[i]
            check_decision(
                SlotDecision(
                    level=sol.level, rate=sol.rate, local_freq=sol.local_freq,
                    tx_power=sol.tx_power, remote_freq=float(freqs[i]),
                    energy_encode=sol.energy_encode, energy_tx=sol.energy_tx,
                ),
                dev, system,
            )
            n_cls = patterns_classified(float(freqs[i]), dev.classify_cycles, system.slot_duration)
            batch = remote_update(self.remote[i], n_cls, departed[i])
            classify_batch(
                batch, dev.profile, system.entropy_noise_sigma, self.inference_gens[i], t
            )
            entropies = [rec.entropy for rec in batch]
            self.vqs[i].value = vq_update(
                z[i], entropies, dev.entropy_threshold, system.vq_step
            )

            avg = self.averages[i]
            avg.observe_slot(
                t, q_u[i], q_r[i], int(arrivals_row[i]), sol.energy_encode, sol.energy_tx
            )
            avg.observe_classified(batch)

            self._run_classified[i] += len(batch)
            self._run_entropy[i] += sum(entropies)
            self._run_correct[i] += sum(rec.correct for rec in batch)

            tr.q_local[t, i] = q_u[i]
            tr.q_remote[t, i] = q_r[i]
            tr.vq[t, i] = z[i]
            tr.remote_freq[t, i] = freqs[i]
            tr.n_classified[t, i] = n_cls
            tr.arrivals[t, i] = arrivals_row[i]
            if batch:
                tr.batch_entropy[t, i] = sum(entropies) / len(batch)
            if self._run_classified[i]:
                tr.running_entropy[t, i] = self._run_entropy[i] / self._run_classified[i]
                tr.running_accuracy[t, i] = self._run_correct[i] / self._run_classified[i]

        # Same value lyapunov_value() gives, in plain scalar math (hot path).
        tr.lyapunov[t] = 0.5 * (
            sum(x * x for x in q_u) + sum(x * x for x in q_r) + sum(x * x for x in z)
        )
        self.slot = t + 1

    def finish(self) -> RunResult:
        system = self.scenario.system
        summaries = []
        for i, dev in enumerate(self.scenario.devices):
            avg = self.averages[i]
            local_rep = stability_diagnostic(
                self.trace.q_local[:, i], system.warmup_slots, STABILITY_SLOPE_TOL
            )
            remote_rep = stability_diagnostic(
                self.trace.q_remote[:, i], system.warmup_slots, STABILITY_SLOPE_TOL
            )
            d_little = little_delay(
                avg.mean_q_local, avg.mean_q_remote, avg.mean_arrivals, system.slot_duration
            )
            d_emp = avg.mean_delay_slots
            final_vq = self.vqs[i].value
            summaries.append(
                DeviceSummary(
                    device_id=dev.device_id,
                    distance=float(self.distances[i]),
                    entropy_threshold=dev.entropy_threshold,
                    mean_energy=avg.mean_energy,
                    mean_energy_encode=(
                        avg.energy_encode_sum / avg.slots if avg.slots else 0.0
                    ),
                    mean_energy_tx=avg.energy_tx_sum / avg.slots if avg.slots else 0.0,
                    mean_q_local=avg.mean_q_local,
                    mean_q_remote=avg.mean_q_remote,
                    mean_arrivals=avg.mean_arrivals,
                    little_delay_s=d_little,
                    empirical_delay_s=(
                        None if d_emp is None else d_emp * system.slot_duration
                    ),
                    mean_entropy=avg.mean_entropy,
                    accuracy=avg.accuracy,
                    classified=avg.classified,
                    local_slope=local_rep.slope,
                    remote_slope=remote_rep.slope,
                    local_stable=local_rep.stable,
                    remote_stable=remote_rep.stable,
                    final_vq=final_vq,
                    z_over_t=final_vq / system.horizon,
                )
            )
        return RunResult(
            scenario=self.scenario,
            seed=system.rng_seed,
            distances=self.distances,
            trace=self.trace,
            summaries=tuple(summaries),
        )

    def run(self) -> RunResult:
        while self.slot < self.scenario.system.horizon:
            self.step()
        return self.finish()


def run(scenario: Scenario, seed: int | None = None, horizon: int | None = None) -> RunResult:
    """Simulate one scenario end to end; seed/horizon override the config."""
    system = scenario.system
    overrides = {}
    if seed is not None:
        overrides["rng_seed"] = seed
    if horizon is not None:
        overrides["horizon"] = horizon
        if system.warmup_slots >= horizon:
            overrides["warmup_slots"] = horizon // 10
    if overrides:
        scenario = replace(scenario, system=replace(system, **overrides))
    return Simulation(scenario).run()


def resolve_placement(scenario: Scenario) -> Scenario:
    """Pin any randomly placed devices to their seeded draw, in the scenario itself."""
    system = scenario.system
    if all(dev.distance is not None for dev in scenario.devices):
        return scenario
    drawn = place_on_disk(
        len(scenario.devices), system.cell_radius, RngStreams(system.rng_seed).placement()
    )
    devices = tuple(
        dev if dev.distance is not None else replace(dev, distance=float(drawn[i]))
        for i, dev in enumerate(scenario.devices)
    )
    return replace(scenario, devices=devices)


def auto_v_grid(scenario: Scenario, points: int | None = None) -> np.ndarray:
    """Penalty-weight grid bracketing the drift/energy crossover.

    A short pilot run at V=0 measures, over transmitting slots, the typical
    drift term |Q_remote - Q_local| * N_u and the typical slot energy. Their
    ratio is the V at which the two terms trade roughly one for one; the grid
    spans span_decades around it, weighted toward the energy-saving side
    where the delay curve actually bends.
    """
    sw = scenario.sweep
    n_points = points if points is not None else sw.points
    system = scenario.system
    pilot_horizon = min(1500, system.horizon)
    pilot = replace(
        scenario,
        system=replace(
            system,
            penalty_weight=0.0,
            horizon=pilot_horizon,
            warmup_slots=min(system.warmup_slots, pilot_horizon // 3),
        ),
    )
    res = Simulation(pilot).run()
    tr = res.trace
    mask = tr.n_tx >= 1
    if not mask.any():
        raise RuntimeError("pilot run never transmitted; cannot scale a V grid")
    drift = np.abs(tr.q_remote[mask] - tr.q_local[mask]) * tr.n_tx[mask]
    energy = tr.energy_encode[mask] + tr.energy_tx[mask]
    drift_scale = max(float(drift.mean()), 1.0)
    energy_scale = max(float(energy.mean()), 1e-30)
    pivot = drift_scale / energy_scale
    # A quarter span below the pivot covers the energy-flat region; half a
    # span above covers the bend. Further up, service turns bursty and mean
    # energy stops falling cleanly, which is past the regime worth plotting.
    lo = pivot * 10.0 ** (-sw.span_decades / 4.0)
    hi = pivot * 10.0 ** (sw.span_decades / 2.0)
    return np.geomspace(lo, hi, n_points)


def _sweep_point_task(scn: Scenario, v: float, seed: int) -> SweepPoint:
    """Module-level so process pools can pickle it."""
    res = Simulation(scn).run()
    return SweepPoint(v=v, seed=seed, summaries=res.summaries)


def sweep(scenario: Scenario, v_grid=None, jobs: int = 1) -> SweepResult:
    """Run the scenario across a V grid and collect per-device summaries.

    Placement is resolved once so every point sees the same geometry. With
    common random numbers (the default) every point also sees the same
    channel/arrival/inference draws; otherwise each point gets a derived seed.
    jobs > 1 fans points out to worker processes; results come back in grid
    order either way, so output is identical.
    """
    scenario = resolve_placement(scenario)
    if v_grid is None:
        v_grid = scenario.sweep.v_grid
    if v_grid is None:
        v_grid = auto_v_grid(scenario)
    v_grid = np.asarray(sorted(float(v) for v in v_grid))
    base_seed = scenario.system.rng_seed
    tasks = []
    for idx, v in enumerate(v_grid):
        if scenario.sweep.common_random_numbers:
            seed = base_seed
        else:
            seed = derive_sweep_seed(base_seed, idx)
        scn = with_penalty_weight(scenario, float(v))
        if seed != base_seed:
            scn = replace(scn, system=replace(scn.system, rng_seed=seed))
        tasks.append((scn, float(v), seed))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_sweep_point_task, *zip(*tasks)))
    else:
        points = [_sweep_point_task(*task) for task in tasks]
    return SweepResult(scenario=scenario, v_grid=v_grid, points=tuple(points))
