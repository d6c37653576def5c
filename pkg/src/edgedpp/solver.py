"""Per-slot control: the radio subproblem and the server CPU scheduler.

Each slot decouples into (a) one radio subproblem per device, choosing an
encoding level and uplink rate to minimize

    V*(E_encode + E_tx) + (Q_remote - Q_local)*N_u + eps_z*Z*(phi - H_th)*N_u

with N_u relaxed to tau_u*R/n, and (b) a server CPU split maximizing drained
remote backlog, solved exactly by a greedy waterfill. For fixed level the
radio objective is strictly convex in R when V > 0, so its stationarity
residual is strictly increasing and bisection finds the minimizer.

Scalar functions here are the readable reference; RadioWorkspace batches all
devices and levels through the same math in numpy and is what the simulator
uses per slot. Both paths agree to bisection tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from edgedpp.model import (
    DeviceConfig,
    EncodingLevel,
    SystemConfig,
    encode_energy,
    local_freq_from_rate,
    power_from_rate,
    rate_bounds,
    tx_energy,
)

#: Relative bracket width at which bisection stops.
BISECT_REL_TOL = 1e-9
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class RadioSubproblemInput:
    """State a single device's radio decision depends on, for one slot."""

    device: DeviceConfig
    system: SystemConfig
    gain: float
    q_local: float
    q_remote: float
    vq: float


@dataclass(frozen=True)
class RadioSolution:
    """Winning (level, rate) with its objective and derived physical quantities."""

    level: EncodingLevel | None
    rate: float = 0.0
    objective: float = 0.0
    energy_encode: float = 0.0
    energy_tx: float = 0.0
    local_freq: float = 0.0
    tx_power: float = 0.0


NULL_SOLUTION = RadioSolution(level=None)

# Sort key of the null action; a level must beat this strictly to be chosen.
_NULL_KEY = (0.0, 0.0, 0.0)


def _drift_weight(level: EncodingLevel, inp: RadioSubproblemInput) -> float:
    """Per-pattern weight (Q_r - Q_u) + eps_z*Z*(phi - H_th) multiplying N_u."""
    return (
        inp.q_remote
        - inp.q_local
        + inp.system.vq_step * inp.vq * (level.entropy - inp.device.entropy_threshold)
    )


def radio_objective(level: EncodingLevel, rate: float, inp: RadioSubproblemInput) -> float:
    """Drift-plus-penalty objective at a given level and rate (continuous N_u)."""
    dev, sys_ = inp.device, inp.system
    e_enc = encode_energy(
        rate, level.bits, dev.kappa, dev.encode_cycles_per_bit, sys_.tau_encode, sys_.tau_tx
    )
    e_tx = tx_energy(rate, inp.gain, dev.bandwidth, sys_.noise_psd_eff, sys_.tau_tx)
    n_u = sys_.tau_tx * rate / level.bits
    return sys_.penalty_weight * (e_enc + e_tx) + _drift_weight(level, inp) * n_u


def stationarity_residual(rate: float, level: EncodingLevel, inp: RadioSubproblemInput) -> float:
    """d(objective)/dR; strictly increasing in R for V > 0.

    Terms: cubic encode energy gives 3*V*tau_e*kappa*(c*R)^2*c with
    c = tau_u*J_e/(tau_e*n); exponential transmit power gives
    V*tau_u*N0_eff*ln2/h * 2^(R/B); the drift weight contributes a constant
    tau_u/n multiple.
    """
    dev, sys_ = inp.device, inp.system
    n = level.bits
    c = sys_.tau_tx * dev.encode_cycles_per_bit / (sys_.tau_encode * n)
    v = sys_.penalty_weight
    quad = 3.0 * v * sys_.tau_encode * dev.kappa * c**3 * rate**2
    lin = v * sys_.tau_tx * sys_.noise_psd_eff * np.log(2.0) / inp.gain
    expo = lin * 2.0 ** (rate / dev.bandwidth)
    return quad + expo + _drift_weight(level, inp) * sys_.tau_tx / n


def effective_rate_bounds(
    level: EncodingLevel, inp: RadioSubproblemInput
) -> tuple[float, float]:
    """Physical rate bounds, optionally tightened so N_u cannot exceed the backlog.

    The lower bound is nudged up one ulp: n/tau_u alone can round so that
    floor(tau_u*R/n) = 0 and the slot ships nothing despite paying for it.
    The backlog cap gets the same nudge, so a backlog of exactly one pattern
    keeps a non-empty interval and the floor at the cap recovers exactly
    q_local patterns (one ulp of rate is ~1e-16 of a pattern, far too small
    to overshoot into q_local + 1).
    """
    r_lo, r_hi = rate_bounds(level.bits, inp.gain, inp.device, inp.system)
    r_lo = math.nextafter(r_lo, math.inf)
    if inp.system.cap_rate_to_backlog:
        cap = math.nextafter(inp.q_local * level.bits / inp.system.tau_tx, math.inf)
        r_hi = min(r_hi, cap)
    return r_lo, r_hi


def solve_rate_for_level(level: EncodingLevel, inp: RadioSubproblemInput) -> float | None:
    """Optimal rate for a fixed level, or None if the level is infeasible now.

    Boundary rules: residual >= 0 at R_min picks R_min, <= 0 at R_max picks
    R_max; otherwise bisect the sign change down to BISECT_REL_TOL relative
    bracket width and return the midpoint.
    """
    r_lo, r_hi = effective_rate_bounds(level, inp)
    if r_lo > r_hi:
        return None
    if stationarity_residual(r_lo, level, inp) >= 0.0:
        return r_lo
    if stationarity_residual(r_hi, level, inp) <= 0.0:
        return r_hi
    lo, hi = r_lo, r_hi
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_REL_TOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if stationarity_residual(mid, level, inp) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _quantize_rate(rate: float, bits: float, tau_tx: float) -> float:
    """Snap a rate down to the largest whole-pattern multiple (at least one).

    Nudged one ulp up so the executed floor recovers exactly m patterns.
    """
    m = max(1.0, np.floor(tau_tx * rate / bits))
    return math.nextafter(m * bits / tau_tx, math.inf)


def _solution_for(level: EncodingLevel, rate: float, inp: RadioSubproblemInput) -> RadioSolution:
    dev, sys_ = inp.device, inp.system
    e_enc = encode_energy(
        rate, level.bits, dev.kappa, dev.encode_cycles_per_bit, sys_.tau_encode, sys_.tau_tx
    )
    e_tx = tx_energy(rate, inp.gain, dev.bandwidth, sys_.noise_psd_eff, sys_.tau_tx)
    return RadioSolution(
        level=level,
        rate=rate,
        objective=radio_objective(level, rate, inp),
        energy_encode=e_enc,
        energy_tx=e_tx,
        local_freq=local_freq_from_rate(
            rate, level.bits, dev.encode_cycles_per_bit, sys_.tau_encode, sys_.tau_tx
        ),
        tx_power=power_from_rate(rate, inp.gain, dev.bandwidth, sys_.noise_psd_eff),
    )


def solve_radio(inp: RadioSubproblemInput) -> RadioSolution:
    """Best action for one device and slot: argmin over levels, against the null action.

    An empty local queue short-circuits to null. Ties are broken by lower
    total energy, then by more bits per pattern; an exact three-way tie keeps
    the null action.
    """
    if inp.q_local < 1:
        return NULL_SOLUTION
    best_key = _NULL_KEY
    best = NULL_SOLUTION
    for level in inp.device.profile.levels:
        rate = solve_rate_for_level(level, inp)
        if rate is None:
            continue
        if inp.system.quantize_rate_to_patterns:
            rate = _quantize_rate(rate, level.bits, inp.system.tau_tx)
        sol = _solution_for(level, rate, inp)
        key = (sol.objective, sol.energy_encode + sol.energy_tx, -level.bits)
        if key < best_key:
            best_key = key
            best = sol
    return best


# ---------------------------------------------------------------------------
# batched per-slot solve
# ---------------------------------------------------------------------------


class RadioWorkspace:
    """Vectorized radio solve across all devices and levels for one system config.

    Precomputes every per-(device, level) constant once; solve() then runs a
    shared bisection over a (num_devices, max_levels) grid per slot. Profiles
    of different lengths are padded and masked.
    """

    def __init__(self, system: SystemConfig, devices: tuple[DeviceConfig, ...]):
        self.system = system
        self.devices = tuple(devices)
        k = len(self.devices)
        lmax = max(len(d.profile.levels) for d in self.devices)
        self.valid = np.zeros((k, lmax), dtype=bool)
        self.bits = np.full((k, lmax), np.nan)
        self.phi = np.zeros((k, lmax))
        tau_e, tau_u = system.tau_encode, system.tau_tx
        v = system.penalty_weight
        r_cpu = np.zeros((k, lmax))
        for i, dev in enumerate(self.devices):
            for j, lv in enumerate(dev.profile.levels):
                self.valid[i, j] = True
                self.bits[i, j] = lv.bits
                self.phi[i, j] = lv.entropy
                r_cpu[i, j] = tau_e * lv.bits * dev.max_local_freq / (
                    tau_u * dev.encode_cycles_per_bit
                )
        self.bits[~self.valid] = 1.0  # harmless filler, masked out at selection
        with np.errstate(invalid="ignore"):
            c = tau_u * np.array([d.encode_cycles_per_bit for d in self.devices])[:, None] / (
                tau_e * self.bits
            )
        kappa = np.array([d.kappa for d in self.devices])[:, None]
        self.cub = tau_e * kappa * c**3  # E_enc = cub * R^3
        self.a3 = 3.0 * v * self.cub  # quadratic residual coefficient
        # One ulp up, same reasoning as effective_rate_bounds.
        self.r_min = np.nextafter(self.bits / tau_u, np.inf)
        self.r_cpu = r_cpu
        self.bw = np.array([d.bandwidth for d in self.devices])[:, None]
        self.inv_bw = 1.0 / self.bw
        self.noise_pow = system.noise_psd_eff * self.bw  # N0_eff * B per device
        self.p_max = np.array([d.max_tx_power for d in self.devices])[:, None]
        self.h_th = np.array([d.entropy_threshold for d in self.devices])[:, None]
        self.lin_base = v * tau_u * system.noise_psd_eff * math.log(2.0)
        # ln2/B per device, for scalar exp() inside the bisection loop.
        self.alpha = (math.log(2.0) * self.inv_bw)[:, 0]
        self.tau_u = tau_u
        self.v = v

    @staticmethod
    def _bisect_cell(a3: float, lin: float, alpha: float, wn: float, lo: float, hi: float) -> float:
        """Scalar bisection of g(R) = a3*R^2 + lin*exp(alpha*R) + wn on [lo, hi].

        Python scalars on purpose: per slot only a handful of (device, level)
        cells have an interior root, and at that size numpy call overhead
        costs more than the arithmetic.
        """
        exp = math.exp
        for _ in range(BISECT_MAX_ITER):
            if hi - lo <= BISECT_REL_TOL * hi:
                break
            mid = 0.5 * (lo + hi)
            x = alpha * mid
            g = a3 * mid * mid + (lin * exp(x) if x < 700.0 else math.inf) + wn
            if g < 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def solve(self, q_local, q_remote, vq, gains) -> list[RadioSolution]:
        """Radio solutions for every device given start-of-slot state and gains."""
        sys_ = self.system
        q_u = np.asarray(q_local, dtype=float)[:, None]
        q_r = np.asarray(q_remote, dtype=float)[:, None]
        z = np.asarray(vq, dtype=float)[:, None]
        h = np.asarray(gains, dtype=float)[:, None]

        with np.errstate(over="ignore", invalid="ignore"):
            snr_max = h * self.p_max / self.noise_pow
            r_pow = self.bw * np.log2(1.0 + snr_max)
            r_hi = np.minimum(self.r_cpu, r_pow)
            if sys_.cap_rate_to_backlog:
                # Same one-ulp nudge as effective_rate_bounds: keeps a
                # one-pattern backlog feasible against the nudged r_min.
                r_hi = np.minimum(r_hi, np.nextafter(q_u * self.bits / self.tau_u, np.inf))
            r_lo = self.r_min
            feasible = self.valid & (r_lo <= r_hi) & (q_u >= 1.0)

            w = (q_r - q_u) + sys_.vq_step * z * (self.phi - self.h_th)
            wn = w * self.tau_u / self.bits
            lin = self.lin_base / h  # (k, 1)

            g_lo = self.a3 * r_lo * r_lo + lin * np.exp2(r_lo * self.inv_bw) + wn
            g_hi = self.a3 * r_hi * r_hi + lin * np.exp2(r_hi * self.inv_bw) + wn
            at_lo = g_lo >= 0.0
            rate = np.where(at_lo, r_lo, r_hi)
            interior = feasible & ~at_lo & ~(g_hi <= 0.0)
            for i, j in np.argwhere(interior):
                rate[i, j] = self._bisect_cell(
                    self.a3[i, j], lin[i, 0], self.alpha[i], wn[i, j],
                    r_lo[i, j], r_hi[i, j],
                )
            if sys_.quantize_rate_to_patterns:
                m = np.maximum(1.0, np.floor(self.tau_u * rate / self.bits))
                rate = np.nextafter(m * self.bits / self.tau_u, np.inf)

            e_enc = self.cub * rate**3
            e_tx = self.tau_u * (self.noise_pow / h) * (np.exp2(rate * self.inv_bw) - 1.0)
            obj = self.v * (e_enc + e_tx) + w * (self.tau_u * rate / self.bits)

        out: list[RadioSolution] = []
        for i, dev in enumerate(self.devices):
            best = NULL_SOLUTION
            best_key = _NULL_KEY
            row = feasible[i]
            for j in np.flatnonzero(row):
                key = (obj[i, j], e_enc[i, j] + e_tx[i, j], -self.bits[i, j])
                if key < best_key:
                    best_key = key
                    level = dev.profile.levels[j]
                    best = RadioSolution(
                        level=level,
                        rate=float(rate[i, j]),
                        objective=float(obj[i, j]),
                        energy_encode=float(e_enc[i, j]),
                        energy_tx=float(e_tx[i, j]),
                        local_freq=float(
                            self.tau_u * rate[i, j] * dev.encode_cycles_per_bit
                            / (sys_.tau_encode * level.bits)
                        ),
                        tx_power=float(
                            (self.noise_pow[i, 0] / h[i, 0])
                            * (np.exp2(rate[i, j] * self.inv_bw[i, 0]) - 1.0)
                        ),
                    )
            out.append(best)
        return out


def schedule_cpu(
    q_remote, classify_cycles, max_freq: float, slot_duration: float
) -> np.ndarray:
    """Split the server CPU budget greedily by backlog-per-cycle-cost.

    Devices are served in decreasing Q_remote / J_classify order (ties to the
    lower index) and each gets exactly the frequency that drains its backlog,
    until the budget runs out. This greedy is an exact optimum of the slot's
    CPU linear program.
    """
    q = np.asarray(q_remote, dtype=float)
    j_c = np.asarray(classify_cycles, dtype=float)
    if max_freq < 0:
        raise ValueError(f"max_freq must be >= 0, got {max_freq}")
    order = sorted(range(q.size), key=lambda i: (-q[i] / j_c[i], i))
    freqs = np.zeros(q.size)
    remaining = float(max_freq)
    for i in order:
        if remaining <= 0.0 or q[i] <= 0.0:
            continue
        need = q[i] * j_c[i] / slot_duration
        freqs[i] = min(need, remaining)
        remaining -= freqs[i]
    return freqs
