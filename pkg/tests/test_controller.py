from collections import Counter

import pytest

from sdnmap.controller import (
    BatchQueue,
    Controller,
    RuleStore,
    WriteTransaction,
    ControllerError,
    FlowRule,
    flush_batch,
    rules_for_embedding,
)
from sdnmap.embedder import Rejected, embed_request
from sdnmap.substrate import TopologySpec, build_topology
from sdnmap.workload import WorkloadSpec, generate_requests

from conftest import make_net, make_request, place


def star():
    # hub 0 with leaves 1..4
    return make_net([(0, i, 250) for i in range(1, 5)])


def star_requests(net, paths, demand=10):
    return [place(net, make_request(i, 2, [(0, 1, demand)]), {0: p[0], 1: p[-1]}, [p])
            for i, p in enumerate(paths)]


def test_rules_one_per_path_switch(line3):
    emb = place(line3, make_request(0, 2, [(0, 1, 10)]), {0: 0, 1: 2}, [(0, 1, 2)])
    rules = rules_for_embedding(emb)
    assert len(rules) == 3
    assert {r.switch_id for r in rules} == {0, 1, 2}
    assert all(r.cost == 1 for r in rules)


def test_rules_two_links_share_switch(line3):
    req = make_request(0, 3, [(0, 1, 10), (1, 2, 10)])
    emb = place(line3, req, {0: 0, 1: 1, 2: 2}, [(0, 1), (1, 2)])
    per_switch = Counter(r.switch_id for r in rules_for_embedding(emb))
    assert per_switch[1] == 2


def test_batch_held_until_threshold():
    net = star()
    a, b, c = star_requests(net, [(1, 0, 2), (2, 0, 3), (3, 0, 1)])
    ctl = Controller(net, batch_size=3)
    assert ctl.enqueue_success(a, 0) is None
    assert ctl.enqueue_success(b, 1) is None
    assert ctl.store.installed_count() == 0
    res = ctl.enqueue_success(c, 2)
    assert res is not None and len(res.embeddings) == 3
    assert ctl.store.installed_count() == 9
    assert res.waits == {0: 2, 1: 1, 2: 0}


def test_batch_of_one_flushes_immediately(line3):
    emb = place(line3, make_request(0, 2, [(0, 1, 10)]), {0: 0, 1: 2}, [(0, 1, 2)])
    res = Controller(line3, batch_size=1).enqueue_success(emb, 5)
    assert len(res.transactions) == 3


def test_flush_coalesces_per_switch():
    net = star()
    batch = star_requests(net, [(1, 0, 2), (2, 0, 3), (3, 0, 1)])
    txns = flush_batch(RuleStore(), batch, now=0)
    hub = [t for t in txns if t.switch_id == 0]
    assert len(hub) == 1 and len(hub[0].additions) == 3
    assert len(txns) == 4


def test_flush_five_switches():
    net = make_net([(i, i + 1, 250) for i in range(4)])
    emb = place(net, make_request(0, 2, [(0, 1, 10)]), {0: 0, 1: 4}, [(0, 1, 2, 3, 4)])
    store = RuleStore()
    assert len(flush_batch(store, [emb], 0)) == 5
    assert flush_batch(store, [emb], 1) == []


def test_flush_empty_batch_rejected():
    with pytest.raises(ValueError):
        flush_batch(RuleStore(), [], 0)


def test_transaction_cannot_add_and_delete_same_rule():
    r = FlowRule("x", 0, 0, 0)
    with pytest.raises(ControllerError):
        WriteTransaction(0, frozenset({r}), frozenset({"x"}), 0)


def test_expiry_of_flushed_embedding(line3):
    initial = line3.snapshot()
    emb = place(line3, make_request(0, 2, [(0, 1, 10)]), {0: 0, 1: 2}, [(0, 1, 2)])
    ctl = Controller(line3, batch_size=1)
    ctl.enqueue_success(emb, 0)
    txns = ctl.on_expiry(emb, 10)
    assert len(txns) == 3
    assert all(len(t.deletions) == 1 and not t.additions for t in txns)
    assert line3.snapshot() == initial
    assert ctl.store.installed_count() == 0


def test_expiry_of_pending_embedding(line3):
    initial = line3.snapshot()
    emb = place(line3, make_request(0, 2, [(0, 1, 10)]), {0: 0, 1: 2}, [(0, 1, 2)])
    ctl = Controller(line3, batch_size=3)
    ctl.enqueue_success(emb, 0)
    assert ctl.on_expiry(emb, 4) == []
    assert len(ctl.queue) == 0
    assert line3.snapshot() == initial


def test_batch_queue_threshold_validation():
    with pytest.raises(ValueError):
        BatchQueue(0)


def detour_fixture():
    # long route 0-1-2-3 and short route 0-4-3; (0,4) is only 50 wide
    net = make_net([(0, 1, 100), (1, 2, 100), (2, 3, 100), (0, 4, 50), (4, 3, 100)])
    blocker = place(net, make_request(0, 2, [(0, 1, 50)]), {0: 0, 1: 4}, [(0, 4)])
    d = 20
    victim = place(net, make_request(1, 2, [(0, 1, d)]), {0: 0, 1: 3}, [(0, 1, 2, 3)])
    ctl = Controller(net, batch_size=1)
    ctl.enqueue_success(blocker, 0)
    ctl.enqueue_success(victim, 1)
    return net, ctl, blocker, victim, d


def test_remap_onto_freed_shorter_path():
    net, ctl, blocker, victim, d = detour_fixture()
    ctl.on_expiry(blocker, 5)
    res = ctl.remap_pass(5)
    assert len(res.remaps) == 1
    rec = res.remaps[0]
    assert (rec.R_old, rec.R_new) == (3 * d + 4, 2 * d + 3)
    assert victim.link_map[0][0].path == (0, 4, 3)
    # switches 0 and 3 keep their rule; only 1, 2 (deletions) and 4 (addition) change
    assert sorted(t.switch_id for t in res.transactions) == [1, 2, 4]
    assert res.R_after < res.R_before
    net.check_conservation()
    ctl.check()


def test_remap_budget_zero():
    net, ctl, blocker, victim, _ = detour_fixture()
    ctl.on_expiry(blocker, 5)
    res = ctl.remap_pass(5, budget=0)
    assert res.remaps == [] and res.transactions == []
    assert victim.link_map[0][0].path == (0, 1, 2, 3)


def test_remap_without_improvement():
    net, ctl, blocker, victim, _ = detour_fixture()
    before = net.snapshot()
    res = ctl.remap_pass(5)  # short route still blocked
    assert res.remaps == [] and res.transactions == []
    assert net.snapshot() == before


def run_controller(n, seed=4, budget=None, count=120):
    net = build_topology(TopologySpec(), seed=seed)
    ctl = Controller(net, batch_size=n, remap_budget=budget)
    reqs = generate_requests(WorkloadSpec(count=count), seed=seed)
    events = sorted([(r.arrival_time, 1, r.id) for r in reqs] + [(r.expiry_time, 0, r.id) for r in reqs])
    by_id = {r.id: r for r in reqs}
    embs = {}
    txns = 0
    remaps = []
    for t, kind, rid in events:
        if kind == 1:
            try:
                emb = embed_request(net, by_id[rid], now=t)
            except Rejected:
                continue
            embs[rid] = emb
            res = ctl.enqueue_success(emb, t)
            if res is not None:
                txns += len(res.transactions)
                rr = ctl.remap_pass(t)
                txns += len(rr.transactions)
                remaps.append(rr)
        elif rid in embs:
            txns += len(ctl.on_expiry(embs.pop(rid), t))
            rr = ctl.remap_pass(t)
            txns += len(rr.transactions)
            remaps.append(rr)
        ctl.check()
        net.check_conservation()
        assert ctl.pending_rules_installed() == 0
    return ctl, txns, remaps


def test_write_count_dominance():
    _, one, _ = run_controller(1, budget=0)
    for n in (2, 5, 10):
        _, many, _ = run_controller(n, budget=0)
        assert many < one


def test_installed_matches_live_rule_projection():
    ctl, _, _ = run_controller(5)
    expected = Counter()
    for emb in ctl.active.values():
        for shares in emb.link_map.values():
            for ps in shares:
                expected.update(ps.path)
    got = Counter({s: len(t) for s, t in ctl.store.installed.items() if t})
    assert got == expected


def test_remaps_are_monotone():
    _, _, remaps = run_controller(3, budget=10, count=200)
    for rr in remaps:
        assert all(rec.R_new < rec.R_old for rec in rr.remaps)
        if rr.remaps:
            assert rr.R_after <= rr.R_before


def test_failed_reallocation_restores_old_path(monkeypatch):
    import sdnmap.controller as controller
    from sdnmap.substrate import Allocation, InsufficientResources

    net, ctl, blocker, victim, _ = detour_fixture()
    ctl.on_expiry(blocker, 5)
    net.allocate(Allocation(9, link_debits=(((0, 4), 40),)))
    # a candidate that ignores the 10 units left on (0,4)
    monkeypatch.setattr(controller, "find_unsplittable_path", lambda *a, **k: (0, 4, 3))
    snap = net.snapshot()
    with pytest.raises(InsufficientResources):
        ctl.remap_pass(6)
    assert net.snapshot() == snap
    assert victim.link_map[0][0].path == (0, 1, 2, 3)
    ctl.check()
