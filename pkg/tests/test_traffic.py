import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relroute.config import eval_rate
from relroute.traffic import (
    Flow,
    Packet,
    TrafficConfig,
    TrafficSource,
    generate_packets,
    initial_flows,
    step_flows,
)


def test_initial_flow_count_is_rounded_mean():
    cfg = TrafficConfig(0.002, 5000, 0.05)
    flows = initial_flows(cfg, 25, np.random.default_rng(0))
    assert len(flows) == 10
    assert all(f.start_time == 0 and f.end_time >= 0 for f in flows)


@given(st.integers(2, 100), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_flow_endpoints_distinct_and_valid(n, seed):
    flows = initial_flows(TrafficConfig(0.01, 1000, 0.1), n, np.random.default_rng(seed))
    for f in flows:
        assert f.src != f.dst
        assert 0 <= f.src < n and 0 <= f.dst < n
        assert f.end_time >= f.start_time


def test_endpoints_uniform_over_ordered_pairs():
    n = 4
    rng = np.random.default_rng(3)
    flows = initial_flows(TrafficConfig(1.0, 24000, 0.0), n, rng)
    hist = np.zeros((n, n))
    for f in flows:
        hist[f.src, f.dst] += 1
    off = hist[~np.eye(n, dtype=bool)]
    assert off.sum() == 24000
    # 12 ordered pairs, expected 2000 each; 5 sigma band
    assert np.abs(off - 2000).max() < 5 * np.sqrt(2000)


def test_flow_arrivals_and_durations_match_rates():
    cfg = TrafficConfig(0.3, 50.0, 0.0)
    rng = np.random.default_rng(5)
    ids = itertools.count()
    flows = []
    started = []
    for t in range(1, 20001):
        before = {f.id for f in flows}
        flows = step_flows(flows, cfg, t, 10, rng, ids)
        started.extend(f for f in flows if f.id not in before)
    rate = len(started) / 20000
    assert rate == pytest.approx(0.3, rel=0.03)
    durations = np.array([f.end_time - f.start_time for f in started])
    # ceil of an exponential with mean 50 has mean 50 + ~0.5
    assert durations.mean() == pytest.approx(50.5, rel=0.03)


def test_expired_flows_removed():
    cfg = TrafficConfig(0.0, 10, 0.1)
    flows = [Flow(0, 0, 1, 0, 5, 0.1), Flow(1, 1, 0, 0, 6, 0.1)]
    assert [f.id for f in step_flows(flows, cfg, 5, 2, np.random.default_rng(0))] == [0, 1]
    assert [f.id for f in step_flows(flows, cfg, 6, 2, np.random.default_rng(0))] == [1]
    assert step_flows(flows, cfg, 7, 2, np.random.default_rng(0)) == []


def test_zero_flow_rate_never_adds_flows():
    cfg = TrafficConfig(0.0, 10, 0.1)
    rng = np.random.default_rng(0)
    flows = []
    for t in range(1, 1000):
        flows = step_flows(flows, cfg, t, 5, rng)
    assert flows == []


def test_packet_rate_per_flow():
    flows = [Flow(i, 0, 1, 0, 10**6, 0.2) for i in range(5)]
    rng = np.random.default_rng(9)
    ids = itertools.count()
    total = sum(len(generate_packets(flows, t, 200, rng, ids)) for t in range(20000))
    assert total / (5 * 20000) == pytest.approx(0.2, rel=0.02)


def test_packets_carry_flow_fields():
    flows = [Flow(0, 3, 7, 0, 100, 5.0)]
    pkts = generate_packets(flows, 42, 200, np.random.default_rng(1))
    assert pkts
    for p in pkts:
        assert (p.src, p.dst, p.ttl, p.created_at) == (3, 7, 200, 42)
        assert p.arrived_at == 42 and p.eligible_at == 43
    assert len({p.id for p in pkts}) == len(pkts)


def test_no_flows_no_packets():
    assert generate_packets([], 0, 200, np.random.default_rng(0)) == []


def test_source_is_deterministic():
    def trace(seed):
        src = TrafficSource(TrafficConfig(0.01, 500, 0.2), 16, np.random.default_rng(seed))
        return [(p.id, p.src, p.dst, p.created_at) for t in range(500) for p in src.step(t, 200)]

    assert trace(4) == trace(4)
    assert trace(4) != trace(5)


def test_rate_expression_scales_with_n():
    assert eval_rate("0.002*N/25", 25) == pytest.approx(0.002)
    assert eval_rate("0.002*N/25", 100) == pytest.approx(0.008)
    with pytest.raises(ValueError):
        eval_rate("__import__('os')", 25)


def test_rejects_negative_rates_and_tiny_networks():
    with pytest.raises(ValueError):
        TrafficConfig(-0.1, 10, 0.1)
    with pytest.raises(ValueError):
        initial_flows(TrafficConfig(0.1, 10, 0.1), 1, np.random.default_rng(0))


def test_packet_repr():
    assert "0->1" in repr(Packet(7, 0, 1, 200, 3))
