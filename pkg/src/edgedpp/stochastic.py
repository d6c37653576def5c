"""Seeded randomness: channel fading, Poisson arrivals, device placement.

Every random quantity gets its own named substream derived from the run seed
via numpy's SeedSequence spawn keys, so adding devices or reordering draws in
one stream never perturbs another. Channel gains are i.i.d. per slot
(block fading): an exponential(1) small-scale power factor times a fixed
distance-dependent path gain.
"""

from __future__ import annotations

import math

import numpy as np

from edgedpp.model import DeviceConfig, SystemConfig

# Purpose tags for substream derivation. Values are part of the reproducibility
# contract: changing them changes every sampled trajectory.
PURPOSE_CHANNEL = 0
PURPOSE_ARRIVALS = 1
PURPOSE_INFERENCE = 2
PURPOSE_PLACEMENT = 3
PURPOSE_SWEEP = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, *key); same inputs, same stream."""
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


class RngStreams:
    """Factory for the named substreams of one simulation run."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be >= 0, got {seed}")
        self.seed = seed

    def channel(self, device_id: int) -> np.random.Generator:
        return substream(self.seed, PURPOSE_CHANNEL, device_id)

    def arrivals(self, device_id: int) -> np.random.Generator:
        return substream(self.seed, PURPOSE_ARRIVALS, device_id)

    def inference(self, device_id: int) -> np.random.Generator:
        return substream(self.seed, PURPOSE_INFERENCE, device_id)

    def placement(self) -> np.random.Generator:
        return substream(self.seed, PURPOSE_PLACEMENT)


def derive_sweep_seed(seed: int, point_index: int) -> int:
    """Distinct child seed for sweep point `point_index` (independent runs mode)."""
    ss = np.random.SeedSequence([seed, PURPOSE_SWEEP, point_index])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def pathloss_db(distance_m: float, carrier_freq_ghz: float) -> float:
    """Urban micro path loss 33 + 25.5*log10(d) + 20*log10(fc) in dB (d in m, fc in GHz)."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    if carrier_freq_ghz <= 0:
        raise ValueError(f"carrier frequency must be positive, got {carrier_freq_ghz}")
    return 33.0 + 25.50 * math.log10(distance_m) + 20.0 * math.log10(carrier_freq_ghz)


def mean_channel_gain(distance_m: float, carrier_freq_ghz: float) -> float:
    """Linear mean power gain 10^(-PL/10); the fading factor has unit mean."""
    return 10.0 ** (-pathloss_db(distance_m, carrier_freq_ghz) / 10.0)


def sample_channel(
    distance_m: float,
    carrier_freq_ghz: float,
    gen: np.random.Generator,
    size: int | None = None,
):
    """Rayleigh block-fading power gains: Exp(1) small-scale factor times path gain."""
    base = mean_channel_gain(distance_m, carrier_freq_ghz)
    return base * gen.standard_exponential(size=size)

def sample_arrivals(arrival_rate: float, gen: np.random.Generator, size: int | None = None):
    """Poisson pattern arrivals per slot; arrival_rate == 0 gives all zeros."""
    if arrival_rate < 0:
        raise ValueError(f"arrival_rate must be >= 0, got {arrival_rate}")
    return gen.poisson(arrival_rate, size=size)


def place_on_disk(num: int, radius: float, gen: np.random.Generator) -> np.ndarray:
    """Distances of `num` points dropped uniformly over a disk of given radius.

    Inverse-CDF sampling: r = radius * sqrt(U) makes the area density uniform.
    """
    if num < 0:
        raise ValueError(f"num must be >= 0, got {num}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return radius * np.sqrt(gen.random(num))


def channel_table(
    devices: tuple[DeviceConfig, ...] | list[DeviceConfig],
    distances: np.ndarray,
    system: SystemConfig,
    streams: RngStreams,
    horizon: int,
) -> np.ndarray:
    """(horizon, num_devices) matrix of per-slot channel power gains."""
    out = np.empty((horizon, len(devices)))
    for k, dev in enumerate(devices):
        gen = streams.channel(dev.device_id)
        out[:, k] = sample_channel(float(distances[k]), system.carrier_freq_ghz, gen, size=horizon)
    return out


def arrival_table(
    devices: tuple[DeviceConfig, ...] | list[DeviceConfig],
    streams: RngStreams,
    horizon: int,
) -> np.ndarray:
    """(horizon, num_devices) matrix of integer pattern arrivals."""
    out = np.empty((horizon, len(devices)), dtype=np.int64)
    for k, dev in enumerate(devices):
        gen = streams.arrivals(dev.device_id)
        out[:, k] = sample_arrivals(dev.arrival_rate, gen, size=horizon)
    return out
