import pytest

import sdnmap.controller
import sdnmap.embedder
from sdnmap.simulator import ConfigError, SimConfig, Simulation, Strategy, run
from sdnmap.substrate import TopologySpec
from sdnmap.workload import ARRIVAL, EXPIRY, WorkloadEvent, WorkloadSpec, WorkloadStream

from conftest import make_net, make_request


def small(strategy="proposed", n=10, count=300, seed=1, **kw):
    return SimConfig(workload=WorkloadSpec(count=count), strategy=Strategy(strategy, n), seed=seed, **kw)


def stream_of(*reqs):
    events = []
    for r in reqs:
        events += [WorkloadEvent(r.arrival_time, ARRIVAL, r), WorkloadEvent(r.expiry_time, EXPIRY, r)]
    return WorkloadStream(events)


def test_default_run_has_fifteen_checkpoints():
    summary = run(SimConfig(strategy=Strategy("proposed", 10)))
    lines = summary.csv().splitlines()
    assert len(lines) == 16
    assert summary.arrived == 1500


def test_empty_workload():
    summary = run(small(count=0))
    assert summary.series == [] and summary.acceptance_rate == 1.0 and summary.cost == 0


def test_proposed_n1_equals_sdnvn():
    a = run(small("proposed", 1, seed=3))
    b = run(small("sdnvn", seed=3))
    assert [s.acceptance_rate for s in a.series] == [s.acceptance_rate for s in b.series]
    assert a.write_transactions == b.write_transactions


def test_baseline_batch_size_forced_to_one():
    assert Strategy("sdnvn", 10).n == 1
    with pytest.raises(ConfigError):
        Strategy("bogus")
    with pytest.raises(ConfigError):
        Strategy("proposed", 0)


def test_expiry_processed_before_same_tick_arrival():
    net = make_net([(0, 1, 50)])
    first = make_request(0, 2, [(0, 1, 50)], arrival=0, lifetime=5)
    second = make_request(1, 2, [(0, 1, 50)], arrival=5, lifetime=5)
    sim = Simulation(small("sdnvn"), net=net, stream=stream_of(first, second))
    summary = sim.run()
    assert (summary.arrived, summary.accepted) == (2, 2)


def test_arrival_held_without_transactions():
    net = make_net([(0, 1, 250)])
    sim = Simulation(small("proposed", 2), net=net,
                     stream=stream_of(make_request(0, 2, [(0, 1, 10)], arrival=0, lifetime=9)))
    assert sim.step()
    assert sim.metrics.accepted == 1
    assert sim.metrics.write_transactions == 0
    assert len(sim.controller.queue) == 1


def test_pending_reservations_block_later_arrivals():
    net = make_net([(0, 1, 50)])
    a = make_request(0, 2, [(0, 1, 30)], arrival=0, lifetime=50)
    b = make_request(1, 2, [(0, 1, 30)], arrival=1, lifetime=50)
    summary = Simulation(small("proposed", 10), net=net, stream=stream_of(a, b)).run()
    assert (summary.arrived, summary.accepted) == (2, 1)


def test_steps_are_deterministic():
    a, b = Simulation(small(seed=5)), Simulation(small(seed=5))
    for _ in range(200):
        assert a.step() == b.step()
        assert a.net.snapshot() == b.net.snapshot()
        assert a.metrics.__dict__.keys() == b.metrics.__dict__.keys()
        assert (a.metrics.accepted, a.metrics.write_transactions) == (b.metrics.accepted, b.metrics.write_transactions)


@pytest.mark.parametrize("strategy", ["proposed", "sdnvn", "sspsm"])
def test_replay_identical_csv(strategy):
    assert run(small(strategy, seed=2)).csv() == run(small(strategy, seed=2)).csv()


@pytest.mark.parametrize("strategy", ["proposed", "sdnvn", "sspsm"])
def test_invariants_hold_every_step(strategy):
    summary = run(small(strategy, count=400, seed=4, check_invariants=True))
    assert 0 < summary.accepted <= summary.arrived


def test_sspsm_never_ranks(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("weight ranking used by sspsm")
    monkeypatch.setattr(sdnmap.controller, "rank_mapped_links", boom)
    run(small("sspsm", count=200))


@pytest.mark.parametrize("strategy", ["proposed", "sdnvn"])
def test_weight_strategies_never_split(monkeypatch, strategy):
    def boom(*a, **k):
        raise AssertionError("split paths used")
    monkeypatch.setattr(sdnmap.embedder, "find_split_paths", boom)
    monkeypatch.setattr(sdnmap.controller, "find_split_paths", boom)
    run(small(strategy, count=200))


def test_batch_timeout_bounds_waits():
    sim = Simulation(small("proposed", 10, count=300, batch_timeout=20))
    sim.run()
    waits = [w for _, f in sim.flush_log for w in f.waits.values()]
    assert waits and max(waits) <= 20


def test_without_timeout_tail_batch_stays_unflushed():
    sim = Simulation(small("proposed", 7, count=30, seed=2))
    sim.run()
    # only flushed requests carry a latency sample
    assert sim.metrics.latency_samples == sum(len(f.waits) for _, f in sim.flush_log)
    assert sim.metrics.latency_samples < sim.metrics.accepted


def test_sspsm_drops_requests_expiring_in_window():
    net = make_net([(0, 1, 250)])
    short = make_request(0, 2, [(0, 1, 10)], arrival=0, lifetime=10)
    long = make_request(1, 2, [(0, 1, 10)], arrival=1, lifetime=200)
    summary = Simulation(small("sspsm"), net=net, stream=stream_of(short, long)).run()
    assert (summary.arrived, summary.accepted) == (2, 1)


def test_invalid_config():
    with pytest.raises(ConfigError):
        Simulation(small(t_write=-1))
    with pytest.raises(ConfigError):
        Simulation(SimConfig(topology=TopologySpec(nodes=1)))


def test_trace_and_weights_dump():
    summary = run(small(count=100, trace=True, weights_dump=True))
    assert any(line.split()[1] == "accept" for line in summary.trace)
    assert summary.weights and len(summary.weights[0].split(",")) == 6
