"""Core types and single-slot physics for the offloading model.

All quantities are SI internally: seconds, Hz, bit/s, watts, joules, W/Hz.
Entropy is measured in nats. Config loaders accept friendlier units (ms, MHz,
dBm, ...) and convert on the way in; see edgedpp.config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LN2 = math.log(2.0)

#: Upper bound on classifier output entropy for a 10-class head, ln(10) nats.
MAX_ENTROPY_10 = math.log(10.0)


class ConfigError(ValueError):
    """Raised when a system or device configuration is inconsistent."""


class ProfileError(ValueError):
    """Raised when an encoding profile violates the monotonicity contract."""


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodingLevel:
    """One row of an encoding profile.

    bits is the encoded pattern size n, entropy is the surrogate mean output
    entropy phi(n) in nats, accuracy the expected top-1 accuracy in [0, 1].
    """

    level_id: int
    bits: float
    entropy: float
    accuracy: float


@dataclass(frozen=True)
class EncodingProfile:
    """Monotone table mapping encoding level -> (bits, entropy, accuracy).

    The contract: more bits never hurt. Entropy must strictly decrease and
    accuracy strictly increase with bits. The null action (transmit nothing)
    is not a level; it is represented by SlotDecision.level = None.
    """

    levels: tuple[EncodingLevel, ...]
    max_entropy: float = MAX_ENTROPY_10

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.levels:
            raise ProfileError("profile has no levels")
        if not math.isfinite(self.max_entropy) or self.max_entropy <= 0:
            raise ProfileError(f"max_entropy must be positive, got {self.max_entropy}")
        seen: set[int] = set()
        prev: EncodingLevel | None = None
        for lv in self.levels:
            if lv.level_id in seen:
                raise ProfileError(f"duplicate level id {lv.level_id}")
            seen.add(lv.level_id)
            if not (lv.bits > 0) or not math.isfinite(lv.bits):
                raise ProfileError(f"level {lv.level_id}: bits must be positive, got {lv.bits}")
            if not (0.0 < lv.entropy <= self.max_entropy):
                raise ProfileError(
                    f"level {lv.level_id}: entropy {lv.entropy} outside (0, {self.max_entropy:.6g}]"
                )
            if not (0.0 <= lv.accuracy <= 1.0):
                raise ProfileError(f"level {lv.level_id}: accuracy {lv.accuracy} outside [0, 1]")
            if prev is not None:
                if lv.bits <= prev.bits:
                    raise ProfileError(
                        f"levels must be sorted by strictly increasing bits "
                        f"({prev.bits} then {lv.bits})"
                    )
                if lv.entropy >= prev.entropy:
                    raise ProfileError(
                        f"entropy must strictly decrease with bits "
                        f"(level {prev.level_id}: {prev.entropy}, level {lv.level_id}: {lv.entropy})"
                    )
                if lv.accuracy <= prev.accuracy:
                    raise ProfileError(
                        f"accuracy must strictly increase with bits "
                        f"(level {prev.level_id}: {prev.accuracy}, level {lv.level_id}: {lv.accuracy})"
                    )
            prev = lv

    def by_id(self, level_id: int) -> EncodingLevel:
        for lv in self.levels:
            if lv.level_id == level_id:
                return lv
        raise ProfileError(f"unknown level id {level_id}")

    @property
    def min_entropy(self) -> float:
        return self.levels[-1].entropy

    @property
    def max_level_entropy(self) -> float:
        return self.levels[0].entropy


@dataclass(frozen=True)
class SystemConfig:
    """Slot structure, shared radio/server resources, and controller knobs.

    Defaults describe the reference deployment: 25 ms slots split evenly
    between encoding and transmission, 100 MHz total uplink bandwidth,
    -174 dBm/Hz thermal noise with a 5 dB receiver noise figure, a 10 GHz
    edge CPU, and a 3.5 GHz carrier. penalty_weight is the V knob: larger
    values buy lower energy at the price of longer queues.
    """

    slot_duration: float = 0.025
    encode_fraction: float = 0.5
    num_devices: int = 6
    total_bandwidth: float = 1.0e8
    noise_psd: float = 10.0 ** (-20.4)  # -174 dBm/Hz
    noise_figure_db: float = 5.0
    carrier_freq_ghz: float = 3.5
    mec_max_freq: float = 1.0e10
    cell_radius: float = 100.0
    penalty_weight: float = 2.0e4
    vq_step: float = 2.0
    entropy_noise_sigma: float = 0.0
    horizon: int = 10_000
    warmup_slots: int = 1_000
    rng_seed: int = 20_260_825
    cap_rate_to_backlog: bool = True
    quantize_rate_to_patterns: bool = False

    def __post_init__(self) -> None:
        if not (self.slot_duration > 0 and math.isfinite(self.slot_duration)):
            raise ConfigError(f"slot_duration must be positive, got {self.slot_duration}")
        if not (0.0 < self.encode_fraction < 1.0):
            raise ConfigError(f"encode_fraction must lie in (0, 1), got {self.encode_fraction}")
        if self.num_devices < 1:
            raise ConfigError(f"num_devices must be >= 1, got {self.num_devices}")
        if not (self.total_bandwidth > 0):
            raise ConfigError(f"total_bandwidth must be positive, got {self.total_bandwidth}")
        if not (self.noise_psd > 0):
            raise ConfigError(f"noise_psd must be positive, got {self.noise_psd}")
        if not math.isfinite(self.noise_figure_db):
            raise ConfigError(f"noise_figure_db must be finite, got {self.noise_figure_db}")
        if not (self.carrier_freq_ghz > 0):
            raise ConfigError(f"carrier_freq_ghz must be positive, got {self.carrier_freq_ghz}")
        if not (self.mec_max_freq > 0):
            raise ConfigError(f"mec_max_freq must be positive, got {self.mec_max_freq}")
        if not (self.cell_radius > 0):
            raise ConfigError(f"cell_radius must be positive, got {self.cell_radius}")
        if self.penalty_weight < 0 or not math.isfinite(self.penalty_weight):
            raise ConfigError(f"penalty_weight must be >= 0, got {self.penalty_weight}")
        if self.vq_step <= 0 or not math.isfinite(self.vq_step):
            raise ConfigError(f"vq_step must be positive, got {self.vq_step}")
        if self.entropy_noise_sigma < 0:
            raise ConfigError(f"entropy_noise_sigma must be >= 0, got {self.entropy_noise_sigma}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not (0 <= self.warmup_slots < self.horizon):
            raise ConfigError(
                f"warmup_slots must lie in [0, horizon), got {self.warmup_slots} with horizon {self.horizon}"
            )
        if self.rng_seed < 0:
            raise ConfigError(f"rng_seed must be >= 0, got {self.rng_seed}")

    @property
    def tau_encode(self) -> float:
        """Encoding sub-slot length tau_e (s)."""
        return self.slot_duration * self.encode_fraction

    @property
    def tau_tx(self) -> float:
        """Transmission sub-slot length tau_u (s)."""
        return self.slot_duration - self.tau_encode

    @property
    def noise_psd_eff(self) -> float:
        """Noise PSD including receiver noise figure (W/Hz)."""
        return self.noise_psd * 10.0 ** (self.noise_figure_db / 10.0)


@dataclass(frozen=True)
class DeviceConfig:
    """Per-device radio, compute, traffic, and reliability parameters.

    distance=None means the device is placed uniformly at random in the cell
    disk when the simulation starts (seeded, so still reproducible).
    """

    device_id: int
    entropy_threshold: float
    profile: EncodingProfile
    bandwidth: float
    distance: float | None = None
    max_tx_power: float = 0.1
    max_local_freq: float = 1.0e9
    kappa: float = 1.0e-27
    encode_cycles_per_bit: float = 5.0e5
    classify_cycles: float = 1.0e7
    arrival_rate: float = 2.0

    def __post_init__(self) -> None:
        if self.device_id < 0:
            raise ConfigError(f"device_id must be >= 0, got {self.device_id}")
        if not (self.entropy_threshold > 0):
            raise ConfigError(
                f"device {self.device_id}: entropy_threshold must be positive, "
                f"got {self.entropy_threshold}"
            )
        if self.entropy_threshold > self.profile.max_entropy:
            raise ConfigError(
                f"device {self.device_id}: entropy_threshold {self.entropy_threshold} "
                f"exceeds profile max_entropy {self.profile.max_entropy:.6g}"
            )
        if not (self.bandwidth > 0):
            raise ConfigError(f"device {self.device_id}: bandwidth must be positive")
        if self.distance is not None and not (self.distance > 0):
            raise ConfigError(f"device {self.device_id}: distance must be positive or None")
        if not (self.max_tx_power > 0):
            raise ConfigError(f"device {self.device_id}: max_tx_power must be positive")
        if not (self.max_local_freq > 0):
            raise ConfigError(f"device {self.device_id}: max_local_freq must be positive")
        if not (self.kappa > 0):
            raise ConfigError(f"device {self.device_id}: kappa must be positive")
        if not (self.encode_cycles_per_bit > 0):
            raise ConfigError(f"device {self.device_id}: encode_cycles_per_bit must be positive")
        if not (self.classify_cycles > 0):
            raise ConfigError(f"device {self.device_id}: classify_cycles must be positive")
        if self.arrival_rate < 0:
            raise ConfigError(f"device {self.device_id}: arrival_rate must be >= 0")


@dataclass(frozen=True)
class SlotDecision:
    """Resolved per-device control for one slot.

    level=None is the null action: nothing encoded or sent, all radio fields
    zero. remote_freq is filled in by the CPU scheduler after the radio
    decision and may be positive even under the null action (the server can
    drain previously received patterns).
    """

    level: EncodingLevel | None
    rate: float = 0.0
    local_freq: float = 0.0
    tx_power: float = 0.0
    remote_freq: float = 0.0
    energy_encode: float = 0.0
    energy_tx: float = 0.0


# ---------------------------------------------------------------------------
# single-slot physics
# ---------------------------------------------------------------------------


def _check_radio_args(gain: float, bandwidth: float, noise_psd_eff: float) -> None:
    if not (math.isfinite(gain) and gain > 0):
        raise ValueError(f"channel gain must be positive and finite, got {gain}")
    if not (math.isfinite(bandwidth) and bandwidth > 0):
        raise ValueError(f"bandwidth must be positive and finite, got {bandwidth}")
    if not (math.isfinite(noise_psd_eff) and noise_psd_eff > 0):
        raise ValueError(f"noise_psd_eff must be positive and finite, got {noise_psd_eff}")


def rate_from_power(power: float, gain: float, bandwidth: float, noise_psd_eff: float) -> float:
    """Shannon uplink rate B*log2(1 + h*p / (N0_eff*B)) in bit/s."""
    _check_radio_args(gain, bandwidth, noise_psd_eff)
    if not (math.isfinite(power) and power >= 0):
        raise ValueError(f"power must be >= 0 and finite, got {power}")
    snr = gain * power / (noise_psd_eff * bandwidth)
    return bandwidth * math.log2(1.0 + snr)


def power_from_rate(rate: float, gain: float, bandwidth: float, noise_psd_eff: float) -> float:
    """Transmit power (W) needed to sustain `rate`; exact inverse of rate_from_power."""
    _check_radio_args(gain, bandwidth, noise_psd_eff)
    if not (math.isfinite(rate) and rate >= 0):
        raise ValueError(f"rate must be >= 0 and finite, got {rate}")
    return (noise_psd_eff * bandwidth / gain) * (2.0 ** (rate / bandwidth) - 1.0)


def local_freq_from_rate(
    rate: float, bits: float, encode_cycles_per_bit: float, tau_encode: float, tau_tx: float
) -> float:
    """CPU frequency that finishes encoding exactly as many patterns as fit on the uplink.

    The encoder must produce tau_tx*rate/bits patterns of encode work
    (bits*encode_cycles_per_bit cycles each) within tau_encode seconds, so
    f_l = tau_tx * rate * encode_cycles_per_bit / (tau_encode * bits).
    """
    if bits <= 0:
        raise ValueError(f"bits must be positive, got {bits}")
    return tau_tx * rate * encode_cycles_per_bit / (tau_encode * bits)


def patterns_tx(rate: float, bits: float, tau_tx: float) -> int:
    """Whole patterns deliverable in one transmit sub-slot: floor(tau_tx*rate/bits)."""
    if bits <= 0:
        raise ValueError(f"bits must be positive, got {bits}")
    return int(math.floor(tau_tx * rate / bits))


def patterns_classified(freq: float, classify_cycles: float, slot_duration: float) -> int:
    """Whole patterns the server can classify in a slot: floor(slot*freq/cycles)."""
    if classify_cycles <= 0:
        raise ValueError(f"classify_cycles must be positive, got {classify_cycles}")
    return int(math.floor(slot_duration * freq / classify_cycles))


def encode_energy(
    rate: float, bits: float, kappa: float, encode_cycles_per_bit: float,
    tau_encode: float, tau_tx: float,
) -> float:
    """Encoding energy tau_e * kappa * f_l^3 for the frequency implied by `rate` (J)."""
    f_l = local_freq_from_rate(rate, bits, encode_cycles_per_bit, tau_encode, tau_tx)
    return tau_encode * kappa * f_l ** 3


def tx_energy(
    rate: float, gain: float, bandwidth: float, noise_psd_eff: float, tau_tx: float
) -> float:
    """Radiated uplink energy tau_u * p(R) over one transmit sub-slot (J)."""
    return tau_tx * power_from_rate(rate, gain, bandwidth, noise_psd_eff)


def rate_bounds(
    bits: float, gain: float, device: DeviceConfig, system: SystemConfig
) -> tuple[float, float]:
    """Feasible uplink rate interval [R_min, R_max] for one encoding level.

    R_min delivers at least one whole pattern per slot. R_max is the tighter
    of the local-CPU ceiling (encoder cannot run faster than max_local_freq)
    and the power ceiling (transmitter cannot exceed max_tx_power). The
    interval may be empty (R_min > R_max), in which case the level is
    infeasible for this slot's channel.
    """
    if bits <= 0:
        raise ValueError(f"bits must be positive, got {bits}")
    tau_e, tau_u = system.tau_encode, system.tau_tx
    r_min = bits / tau_u
    r_cpu = tau_e * bits * device.max_local_freq / (tau_u * device.encode_cycles_per_bit)
    r_pow = rate_from_power(device.max_tx_power, gain, device.bandwidth, system.noise_psd_eff)
    return r_min, min(r_cpu, r_pow)


def check_decision(
    decision: SlotDecision, device: DeviceConfig, system: SystemConfig,
    rel_tol: float = 1e-9,
) -> None:
    """Assert a resolved decision respects the per-device caps; raises AssertionError.

    The power and local-frequency caps are checked on the derived quantities
    directly; together with the one-pattern rate floor this is equivalent to
    the rate staying inside rate_bounds, without recomputing the log.
    """
    slack = 1.0 + rel_tol
    if decision.level is None:
        assert decision.rate == 0.0 and decision.tx_power == 0.0 and decision.local_freq == 0.0, (
            f"device {device.device_id}: null decision carries nonzero radio fields: {decision}"
        )
        return
    r_min = decision.level.bits / system.tau_tx
    assert decision.rate * slack >= r_min, (
        f"device {device.device_id}: rate {decision.rate} below one-pattern floor {r_min}"
    )
    assert decision.tx_power <= device.max_tx_power * slack, (
        f"device {device.device_id}: tx power {decision.tx_power} exceeds cap {device.max_tx_power}"
    )
    assert decision.local_freq <= device.max_local_freq * slack, (
        f"device {device.device_id}: local freq {decision.local_freq} exceeds cap "
        f"{device.max_local_freq}"
    )
