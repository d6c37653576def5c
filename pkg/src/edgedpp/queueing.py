"""Two-hop pattern queues, the reliability virtual queue, and stability metrics.

Each device owns a local queue of raw patterns waiting to be encoded and sent,
and a remote queue of received patterns waiting for server CPU. Both evolve as
Q' = max(0, Q - served) + arrivals with integer pattern counts and FIFO order.
The virtual queue Z integrates entropy excess over the device threshold; its
time-average staying near zero is what enforces the reliability constraint.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(slots=True)
class PatternRecord:
    """Lifecycle of one sensor pattern, filled in as it moves through the system."""

    arrival_slot: int
    level_id: int | None = None
    entropy: float | None = None
    correct: bool | None = None
    classified_slot: int | None = None


class LocalQueue:
    """FIFO backlog of raw patterns at the device, waiting to be encoded and sent."""

    __slots__ = ("records",)

    def __init__(self) -> None:
        self.records: deque[PatternRecord] = deque()

    @property
    def backlog(self) -> int:
        return len(self.records)


class RemoteQueue:
    """FIFO backlog of received (encoded) patterns at the server, waiting for CPU."""

    __slots__ = ("records",)

    def __init__(self) -> None:
        self.records: deque[PatternRecord] = deque()

    @property
    def backlog(self) -> int:
        return len(self.records)


def local_update(
    queue: LocalQueue, served: int, arrivals: int, slot: int, level_id: int | None
) -> list[PatternRecord]:
    """Apply one slot at the local queue; returns the records that departed uplink.

    Pops at most `served` records in FIFO order (fewer if the backlog is
    shorter), stamps them with the encoding level used this slot, then appends
    `arrivals` fresh records. Matches Q' = max(0, Q - served) + arrivals.
    """
    if served < 0 or arrivals < 0:
        raise ValueError(f"served and arrivals must be >= 0, got {served}, {arrivals}")
    departed = []
    for _ in range(min(served, len(queue.records))):
        rec = queue.records.popleft()
        rec.level_id = level_id
        departed.append(rec)
    for _ in range(arrivals):
        queue.records.append(PatternRecord(arrival_slot=slot))
    return departed


def remote_update(
    queue: RemoteQueue, served: int, arriving: list[PatternRecord]
) -> list[PatternRecord]:
    """Apply one slot at the remote queue; returns the records handed to the classifier.

    Service draws only on the backlog as it stood at the start of the slot;
    patterns arriving this slot (`arriving`, the uplink departures) join the
    tail afterwards and are not classifiable until the next slot.
    """
    if served < 0:
        raise ValueError(f"served must be >= 0, got {served}")
    popped = []
    for _ in range(min(served, len(queue.records))):
        popped.append(queue.records.popleft())
    queue.records.extend(arriving)
    return popped


@dataclass
class VirtualQueue:
    """Scalar backlog of accumulated entropy excess for one device."""

    value: float = 0.0


def vq_update(
    value: float, entropies: list[float] | np.ndarray, threshold: float, step: float
) -> float:
    """Z' = max(0, Z + step * sum(H_i - threshold)) over this slot's classified patterns.

    An empty classification batch leaves Z unchanged.
    """
    excess = sum(entropies) - threshold * len(entropies)
    return max(0.0, value + step * excess)


def lyapunov_value(q_local, q_remote, vq) -> float:
    """Quadratic Lyapunov function: half the summed squares of all queue states."""
    q_local = np.asarray(q_local, dtype=float)
    q_remote = np.asarray(q_remote, dtype=float)
    vq = np.asarray(vq, dtype=float)
    return 0.5 * float(np.sum(q_local**2) + np.sum(q_remote**2) + np.sum(vq**2))


def little_delay(
    mean_q_local: float, mean_q_remote: float, mean_arrivals: float, slot_duration: float
) -> float | None:
    """Mean end-to-end delay in seconds via Little's law; None if no traffic."""
    if mean_arrivals <= 0:
        return None
    return slot_duration * (mean_q_local + mean_q_remote) / mean_arrivals


@dataclass(frozen=True)
class StabilityReport:
    """OLS drift check for a backlog series: slope in patterns per slot."""

    slope: float
    threshold: float

    @property
    def stable(self) -> bool:
        return self.slope <= self.threshold


def stability_diagnostic(
    series, warmup: int = 0, threshold: float = 1e-3
) -> StabilityReport:
    """Fit backlog-vs-slot by least squares on the post-warmup tail.

    A stationary bounded queue gives slope ~ 0; an unstable one grows at
    about (arrival rate - service rate) patterns per slot, far above any
    sensible threshold. Only upward drift counts against stability.
    """
    tail = np.asarray(series, dtype=float)[warmup:]
    if tail.size < 2:
        return StabilityReport(slope=0.0, threshold=threshold)
    t = np.arange(tail.size, dtype=float)
    slope = float(np.polyfit(t, tail, 1)[0])
    return StabilityReport(slope=slope, threshold=threshold)


@dataclass
class RunningAverages:
    """Post-warmup accumulators for one device's summary statistics.

    Backlogs are sampled at slot start; energies are per-slot totals. Delay is
    recorded only for patterns that arrived after warmup, so Little's law and
    the empirical mean see the same population up to edge effects.
    """

    warmup: int
    slots: int = 0
    q_local_sum: float = 0.0
    q_remote_sum: float = 0.0
    arrivals_sum: int = 0
    energy_encode_sum: float = 0.0
    energy_tx_sum: float = 0.0
    entropy_sum: float = 0.0
    classified: int = 0
    correct: int = 0
    delay_sum: int = 0
    delay_count: int = 0

    def observe_slot(
        self, slot: int, q_local: int, q_remote: int, arrivals: int,
        energy_encode: float, energy_tx: float,
    ) -> None:
        if slot < self.warmup:
            return
        self.slots += 1
        self.q_local_sum += q_local
        self.q_remote_sum += q_remote
        self.arrivals_sum += arrivals
        self.energy_encode_sum += energy_encode
        self.energy_tx_sum += energy_tx

    def observe_classified(self, records: list[PatternRecord]) -> None:
        for rec in records:
            if rec.classified_slot is None or rec.classified_slot < self.warmup:
                continue
            self.classified += 1
            self.entropy_sum += rec.entropy
            self.correct += int(rec.correct)
            if rec.arrival_slot >= self.warmup:
                self.delay_sum += rec.classified_slot - rec.arrival_slot
                self.delay_count += 1

    @property
    def mean_q_local(self) -> float:
        return self.q_local_sum / self.slots if self.slots else 0.0

    @property
    def mean_q_remote(self) -> float:
        return self.q_remote_sum / self.slots if self.slots else 0.0

    @property
    def mean_arrivals(self) -> float:
        return self.arrivals_sum / self.slots if self.slots else 0.0

    @property
    def mean_energy(self) -> float:
        """Mean total device energy per slot (encode + transmit), joules."""
        return (self.energy_encode_sum + self.energy_tx_sum) / self.slots if self.slots else 0.0

    @property
    def mean_entropy(self) -> float | None:
        return self.entropy_sum / self.classified if self.classified else None

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.classified if self.classified else None

    @property
    def mean_delay_slots(self) -> float | None:
        return self.delay_sum / self.delay_count if self.delay_count else None
