"""Independent brute-force checks of the per-slot optimizers.

The radio check re-derives the objective arithmetic from scratch (no calls
into the solver's precomputed constants), evaluates it on a dense
level-by-rate grid, and demands the solver's reported action be at least as
good. The scheduler checks pit the greedy CPU split against random feasible
allocations and, for small instances, against exact vertex enumeration of the
slot LP in rational arithmetic. These run in CI and behind the `oracle` CLI
subcommand; a tampered solver fails them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

import edgedpp.solver as solver
from edgedpp.inference import default_profile
from edgedpp.model import DeviceConfig, SystemConfig
from edgedpp.solver import RadioSubproblemInput, effective_rate_bounds

RADIO_REL_TOL = 1e-6
RESIDUAL_TOL = 1e-6
#: Absolute slack for float comparisons against random allocations.
SCHED_FLOAT_SLACK = 1e-9


@dataclass
class OracleCheck:
    name: str
    instances: int
    failures: int
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.name:<28} instances={self.instances:<6} "
            f"failures={self.failures:<4} worst={self.worst:.3e} tol={self.tolerance:.1e}"
        )


def random_radio_instances(seed: int, count: int):
    """Log-uniform queue/channel/V instances around the default deployment."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 100]))
    profile = default_profile()
    base_system = SystemConfig()
    for _ in range(count):
        v = 0.0 if rng.random() < 0.1 else 10.0 ** rng.uniform(2.0, 8.0)
        system = SystemConfig(
            penalty_weight=v,
            cap_rate_to_backlog=bool(rng.random() < 0.7),
            num_devices=1,
            total_bandwidth=base_system.total_bandwidth,
        )
        device = DeviceConfig(
            device_id=0,
            entropy_threshold=float(rng.uniform(0.27, 0.88)),
            profile=profile,
            bandwidth=base_system.total_bandwidth / 6.0,
        )
        yield RadioSubproblemInput(
            device=device,
            system=system,
            gain=10.0 ** rng.uniform(-12.0, -4.0),
            q_local=float(np.floor(10.0 ** rng.uniform(0.0, 2.5))),
            q_remote=0.0 if rng.random() < 0.2 else float(np.floor(10.0 ** rng.uniform(0.0, 2.5))),
            vq=0.0 if rng.random() < 0.2 else 10.0 ** rng.uniform(-2.0, 3.0),
        )


def _grid_objective(level, rates: np.ndarray, inp: RadioSubproblemInput) -> np.ndarray:
    """Objective on a rate grid, written out from the formulas independently."""
    dev, sys_ = inp.device, inp.system
    tau_e, tau_u = sys_.tau_encode, sys_.tau_tx
    f_l = tau_u * rates * dev.encode_cycles_per_bit / (tau_e * level.bits)
    e_enc = tau_e * dev.kappa * f_l**3
    p = (sys_.noise_psd_eff * dev.bandwidth / inp.gain) * (
        np.exp2(rates / dev.bandwidth) - 1.0
    )
    e_tx = tau_u * p
    n_u = tau_u * rates / level.bits
    weight = (
        inp.q_remote
        - inp.q_local
        + sys_.vq_step * inp.vq * (level.entropy - dev.entropy_threshold)
    )
    return sys_.penalty_weight * (e_enc + e_tx) + weight * n_u


def _scaled_residual(level, rate: float, inp: RadioSubproblemInput) -> float:
    """|g(R)| over the sum of its term magnitudes, dimensionless."""
    dev, sys_ = inp.device, inp.system
    c = sys_.tau_tx * dev.encode_cycles_per_bit / (sys_.tau_encode * level.bits)
    quad = 3.0 * sys_.penalty_weight * sys_.tau_encode * dev.kappa * c**3 * rate**2
    expo = (
        sys_.penalty_weight * sys_.tau_tx * sys_.noise_psd_eff * math.log(2.0) / inp.gain
    ) * 2.0 ** (rate / dev.bandwidth)
    weight = (
        inp.q_remote
        - inp.q_local
        + sys_.vq_step * inp.vq * (level.entropy - dev.entropy_threshold)
    )
    drift = weight * sys_.tau_tx / level.bits
    scale = quad + expo + abs(drift)
    if scale == 0.0:
        return 0.0
    return abs(quad + expo + drift) / scale


def radio_grid_check(
    seed: int = 1, count: int = 1000, grid_rates: int = 10_000, solve_fn=None
) -> OracleCheck:
    """solve_radio's action must match the dense-grid optimum to RADIO_REL_TOL.

    The solver's reported objective is not trusted: the oracle re-evaluates
    the returned (level, rate) with its own arithmetic before comparing.
    """
    if solve_fn is None:
        solve_fn = solver.solve_radio
    failures = 0
    worst = 0.0
    n = 0
    for inp in random_radio_instances(seed, count):
        n += 1
        sol = solve_fn(inp)
        best_grid = 0.0  # the null action is always available
        for level in inp.device.profile.levels:
            r_lo, r_hi = effective_rate_bounds(level, inp)
            if r_lo > r_hi:
                continue
            rates = np.linspace(r_lo, r_hi, grid_rates)
            best_grid = min(best_grid, float(_grid_objective(level, rates, inp).min()))
        if sol.level is None:
            achieved = 0.0
        else:
            r_lo, r_hi = effective_rate_bounds(sol.level, inp)
            if not (r_lo * (1.0 - 1e-9) <= sol.rate <= r_hi * (1.0 + 1e-9)):
                failures += 1
                worst = math.inf
                continue
            achieved = float(
                _grid_objective(sol.level, np.array([sol.rate]), inp)[0]
            )
        gap = (achieved - best_grid) / max(abs(best_grid), 1e-12)
        worst = max(worst, gap)
        if gap > RADIO_REL_TOL:
            failures += 1
    return OracleCheck("radio grid optimum", n, failures, worst, RADIO_REL_TOL)


def radio_residual_check(seed: int = 1, count: int = 1000, solve_fn=None) -> OracleCheck:
    """Interior solutions must sit on the stationarity root (scaled residual)."""
    if solve_fn is None:
        solve_fn = solver.solve_radio
    failures = 0
    worst = 0.0
    n = 0
    for inp in random_radio_instances(seed + 1, count):
        if inp.system.penalty_weight == 0.0:
            continue  # residual is constant in R; no interior root to check
        sol = solve_fn(inp)
        if sol.level is None:
            continue
        r_lo, r_hi = effective_rate_bounds(sol.level, inp)
        margin = 1e-6 * (r_hi - r_lo)
        if not (r_lo + margin < sol.rate < r_hi - margin):
            continue  # boundary solution
        n += 1
        res = _scaled_residual(sol.level, sol.rate, inp)
        worst = max(worst, res)
        if res > RESIDUAL_TOL:
            failures += 1
    return OracleCheck("radio interior residual", n, failures, worst, RESIDUAL_TOL)


def random_scheduler_instances(seed: int, count: int, max_devices: int = 6):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 200]))
    for _ in range(count):
        k = int(rng.integers(1, max_devices + 1))
        q = rng.integers(0, 200, size=k).astype(float)
        if rng.random() < 0.3:
            q[rng.integers(0, k)] = 0.0
        j_c = 10.0 ** rng.uniform(6.0, 8.0, size=k)
        f_max = 10.0 ** rng.uniform(9.0, 11.0)
        tau = 10.0 ** rng.uniform(-2.3, -1.0)
        yield q, j_c, f_max, tau, rng


def _sched_objective(freqs: np.ndarray, q, j_c, tau: float) -> float:
    return float(np.dot(freqs, tau * q / j_c))


def scheduler_random_check(
    seed: int = 1, count: int = 1000, allocations: int = 100_000
) -> OracleCheck:
    """Greedy CPU split must beat every random feasible allocation."""
    failures = 0
    worst = 0.0
    n = 0
    for q, j_c, f_max, tau, rng in random_scheduler_instances(seed, count):
        n += 1
        greedy = solver.schedule_cpu(q, j_c, f_max, tau)
        greedy_obj = _sched_objective(greedy, q, j_c, tau)
        caps = q * j_c / tau
        trial = rng.random((allocations, q.size)) * caps
        total = trial.sum(axis=1)
        over = total > f_max
        if over.any():
            trial[over] *= (f_max / total[over])[:, None]
        rand_best = float((trial @ (tau * q / j_c)).max())
        gap = rand_best - greedy_obj
        worst = max(worst, gap / max(greedy_obj, 1e-12))
        if gap > SCHED_FLOAT_SLACK * max(1.0, greedy_obj):
            failures += 1
    return OracleCheck("scheduler vs random", n, failures, worst, SCHED_FLOAT_SLACK)


def _greedy_exact(q, j_c, f_max, tau) -> list[Fraction]:
    """The greedy algorithm replayed in exact rational arithmetic."""
    k = len(q)
    fq = [Fraction(x) for x in q]
    fj = [Fraction(x) for x in j_c]
    ftau = Fraction(tau)
    order = sorted(range(k), key=lambda i: (-(fq[i] / fj[i]), i))
    remaining = Fraction(f_max)
    out = [Fraction(0)] * k
    for i in order:
        if remaining <= 0 or fq[i] <= 0:
            continue
        need = fq[i] * fj[i] / ftau
        out[i] = min(need, remaining)
        remaining -= out[i]
    return out


def _vertices_exact(caps: list[Fraction], f_max: Fraction):
    """All vertices of {0 <= f <= cap, sum f <= F}, exact."""
    k = len(caps)
    for mask in range(3**k):
        # ternary digit per coordinate: 0 -> 0, 1 -> cap, 2 -> slack coordinate
        digits = []
        m = mask
        for _ in range(k):
            digits.append(m % 3)
            m //= 3
        if digits.count(2) > 1:
            continue
        f = [Fraction(0)] * k
        slack_idx = None
        for i, d in enumerate(digits):
            if d == 1:
                f[i] = caps[i]
            elif d == 2:
                slack_idx = i
        fixed = sum(f)
        if slack_idx is not None:
            rest = f_max - fixed
            if rest < 0 or rest > caps[slack_idx]:
                continue
            f[slack_idx] = rest
        elif fixed > f_max:
            continue
        yield f


def scheduler_vertex_check(seed: int = 1, count: int = 1000) -> OracleCheck:
    """For K <= 3 the greedy value must equal the exact LP vertex optimum."""
    failures = 0
    worst = 0.0
    n = 0
    for q, j_c, f_max, tau, _ in random_scheduler_instances(seed + 1, count, max_devices=3):
        n += 1
        fq = [Fraction(x) for x in q]
        fj = [Fraction(x) for x in j_c]
        ftau = Fraction(tau)
        ff = Fraction(f_max)
        weights = [ftau * fq[i] / fj[i] for i in range(len(q))]
        caps = [fq[i] * fj[i] / ftau for i in range(len(q))]
        best = max(
            (sum(w * f for w, f in zip(weights, fv)) for fv in _vertices_exact(caps, ff)),
            default=Fraction(0),
        )
        greedy = _greedy_exact(q, j_c, f_max, tau)
        greedy_obj = sum(w * f for w, f in zip(weights, greedy))
        if greedy_obj != best:
            failures += 1
            worst = max(worst, abs(float(best - greedy_obj)))
        # and the float implementation must track the exact algorithm
        flt = solver.schedule_cpu(q, j_c, f_max, tau)
        for a, b in zip(flt, greedy):
            fb = float(b)
            if abs(a - fb) > 1e-12 * max(1.0, abs(fb)):
                failures += 1
                worst = max(worst, abs(a - fb))
                break
    return OracleCheck("scheduler vertex exact", n, failures, worst, 0.0)


def run_all(
    seed: int = 1,
    count: int = 1000,
    grid_rates: int = 10_000,
    allocations: int = 100_000,
    solve_fn=None,
) -> list[OracleCheck]:
    return [
        radio_grid_check(seed, count, grid_rates, solve_fn),
        radio_residual_check(seed, count, solve_fn),
        scheduler_random_check(seed, count, allocations),
        scheduler_vertex_check(seed, count),
    ]


def format_report(checks: list[OracleCheck]) -> str:
    lines = [check.row() for check in checks]
    verdict = "ALL PASS" if all(c.passed for c in checks) else "FAILURES PRESENT"
    lines.append(verdict)
    return "\n".join(lines)
