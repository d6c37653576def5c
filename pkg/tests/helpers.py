"""Shared checks used by more than one test module."""

import numpy as np
import pytest


def check_trace_identities(trace, scenario):
    """Recursions every run must satisfy slot by slot, from the trace alone.

    Queue columns hold start-of-slot backlogs, so the slot-t decision columns
    must map state t to state t+1 exactly: integer pattern counts leave no
    room for drift. Conservation then follows cumulatively: every arrival is
    still queued or has been classified.
    """
    system = scenario.system
    thresholds = np.array([d.entropy_threshold for d in scenario.devices])
    horizon = trace.q_local.shape[0]
    delivered = np.minimum(trace.n_tx, trace.q_local)
    drained = np.minimum(trace.n_classified, trace.q_remote)
    for t in range(horizon - 1):
        expect_local = np.maximum(0, trace.q_local[t] - trace.n_tx[t]) + trace.arrivals[t]
        assert (trace.q_local[t + 1] == expect_local).all(), f"local queue recursion at slot {t}"
        expect_remote = trace.q_remote[t] - drained[t] + delivered[t]
        assert (trace.q_remote[t + 1] == expect_remote).all(), f"remote queue recursion at slot {t}"
        # virtual queue: mean batch entropy times count recovers the sum
        count = drained[t]
        batch_sum = np.where(count > 0, np.nan_to_num(trace.batch_entropy[t]) * count, 0.0)
        expect_vq = np.maximum(
            0.0, trace.vq[t] + system.vq_step * (batch_sum - count * thresholds)
        )
        assert trace.vq[t + 1] == pytest.approx(expect_vq, rel=1e-9, abs=1e-12), f"slot {t}"
    # conservation: all arrivals are in a queue or classified, every slot
    cum_arr = trace.arrivals.cumsum(axis=0)
    cum_cls = drained.cumsum(axis=0)
    for t in range(horizon - 1):
        total = trace.q_local[t + 1] + trace.q_remote[t + 1] + cum_cls[t]
        assert (cum_arr[t] == total).all(), f"pattern conservation at slot {t}"
    # energy only flows when a level is chosen
    null = trace.level == -1
    assert (trace.rate[null] == 0).all()
    assert (trace.energy_encode[null] == 0).all()
    assert (trace.energy_tx[null] == 0).all()
    assert (trace.n_tx[null] == 0).all()
    # scalar drift function agrees with its definition
    ly = 0.5 * (
        (trace.q_local.astype(float) ** 2).sum(axis=1)
        + (trace.q_remote.astype(float) ** 2).sum(axis=1)
        + (trace.vq**2).sum(axis=1)
    )
    assert trace.lyapunov == pytest.approx(ly, rel=1e-12)
