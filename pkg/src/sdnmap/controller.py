"""Controller-side resource management.

Successful initial mappings reserve their substrate resources immediately,
but their flow rules are held in a batch until ``n`` of them have
accumulated.  The batch is then written in one go, one transaction per
touched switch, and only the difference between the controller's rule
database and each switch table is ever sent.  Any change in substrate state
(a flush or an expiry) triggers a remapping pass over the heaviest links.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .embedder import (
    NoFeasiblePath,
    PathShare,
    Rejected,
    Reservation,
    Embedding,
    find_split_paths,
    find_unsplittable_path,
    link_allocation,
    tear_down,
)
from .link_weights import LinkWeightRecord, compute_R, rank_mapped_links
from .substrate import InsufficientResources, SubstrateNetwork

log = logging.getLogger(__name__)

RULE_COST = 1


class ControllerError(AssertionError):
    pass


@dataclass(frozen=True)
class FlowRule:
    rule_id: str
    switch_id: int
    request_id: int
    link_id: int
    cost: int = RULE_COST


def _rule_id(request_id: int, link_id: int, switch_id: int, path_index: int = 0) -> str:
    rid = f"r{request_id}.l{link_id}.s{switch_id}"
    return rid if path_index == 0 else f"{rid}.p{path_index}"


def rules_for_link(emb: Embedding, link_id: int) -> set[FlowRule]:
    return {
        FlowRule(_rule_id(emb.request_id, link_id, s, k), s, emb.request_id, link_id)
        for k, ps in enumerate(emb.link_map[link_id])
        for s in ps.path
    }


def rules_for_embedding(emb: Embedding) -> set[FlowRule]:
    """One rule per (virtual link, path switch); split paths get one per member path."""
    rules: set[FlowRule] = set()
    for lid in emb.link_map:
        rules |= rules_for_link(emb, lid)
    return rules


@dataclass(frozen=True)
class WriteTransaction:
    switch_id: int
    additions: frozenset[FlowRule]
    deletions: frozenset[str]
    issue_time: int

    def __post_init__(self):
        if {r.rule_id for r in self.additions} & self.deletions:
            raise ControllerError("a rule cannot be added and deleted in one transaction")

    def touches_request(self, request_id: int) -> bool:
        return any(r.request_id == request_id for r in self.additions)


class RuleStore:
    """The controller's intended rule database and the tables switches hold."""

    def __init__(self):
        self.intended: dict[str, FlowRule] = {}
        self.installed: dict[int, set[str]] = defaultdict(set)

    def add(self, rules: Iterable[FlowRule]) -> None:
        for r in rules:
            self.intended[r.rule_id] = r

    def remove(self, rules: Iterable[FlowRule]) -> None:
        for r in rules:
            self.intended.pop(r.rule_id, None)

    def intended_on(self, switch_id: int) -> dict[str, FlowRule]:
        return {rid: r for rid, r in self.intended.items() if r.switch_id == switch_id}

    def sync(self, switches: Iterable[int], now: int) -> list[WriteTransaction]:
        """Write the per-switch delta for ``switches``; unchanged switches get nothing."""
        by_switch: dict[int, dict[str, FlowRule]] = defaultdict(dict)
        wanted = set(switches)
        for rid, r in self.intended.items():
            if r.switch_id in wanted:
                by_switch[r.switch_id][rid] = r
        txns = []
        for s in sorted(wanted):
            target = by_switch.get(s, {})
            table = self.installed[s]
            additions = frozenset(r for rid, r in target.items() if rid not in table)
            deletions = frozenset(rid for rid in table if rid not in target)
            if additions or deletions:
                table.difference_update(deletions)
                table.update(r.rule_id for r in additions)
                txns.append(WriteTransaction(s, additions, deletions, now))
        return txns

    def consistent(self) -> bool:
        projected: dict[int, set[str]] = defaultdict(set)
        for rid, r in self.intended.items():
            projected[r.switch_id].add(rid)
        switches = set(projected) | {s for s, t in self.installed.items() if t}
        return all(projected.get(s, set()) == self.installed.get(s, set()) for s in switches)

    def installed_count(self) -> int:
        return sum(len(t) for t in self.installed.values())


class BatchQueue:
    def __init__(self, threshold: int, timeout: int | None = None):
        if threshold < 1:
            raise ValueError("batch threshold must be >= 1")
        self.threshold = threshold
        self.timeout = timeout
        self.pending: list[tuple[Embedding, int]] = []
        self.epoch = 0

    def __len__(self):
        return len(self.pending)

    def __contains__(self, emb: Embedding) -> bool:
        return any(e is emb for e, _ in self.pending)

    def enqueue(self, emb: Embedding, now: int) -> list[tuple[Embedding, int]] | None:
        """Hold ``emb``; return the drained batch once it reaches the threshold."""
        self.pending.append((emb, now))
        if len(self.pending) >= self.threshold:
            return self.drain()
        return None

    def drain(self) -> list[tuple[Embedding, int]]:
        batch, self.pending = self.pending, []
        self.epoch += 1
        return batch

    def remove(self, emb: Embedding) -> bool:
        for i, (e, _) in enumerate(self.pending):
            if e is emb:
                del self.pending[i]
                if not self.pending:
                    self.epoch += 1
                return True
        return False


def flush_batch(store: RuleStore, batch: Iterable[Embedding], now: int) -> list[WriteTransaction]:
    batch = list(batch)
    if not batch:
        raise ValueError("cannot flush an empty batch")
    touched: set[int] = set()
    for emb in batch:
        rules = rules_for_embedding(emb)
        store.add(rules)
        touched.update(r.switch_id for r in rules)
    return store.sync(touched, now)


@dataclass
class FlushResult:
    embeddings: list[Embedding]
    transactions: list[WriteTransaction]
    waits: dict[int, int]


@dataclass
class RemapRecord:
    request_id: int
    link_id: int
    old: tuple[PathShare, ...]
    new: tuple[PathShare, ...]
    R_old: int
    R_new: int


@dataclass
class RemapResult:
    remaps: list[RemapRecord] = field(default_factory=list)
    transactions: list[WriteTransaction] = field(default_factory=list)
    R_before: int = 0
    R_after: int = 0


class Controller:
    """Sequential state machine fed by the simulator's event loop."""

    def __init__(self, net: SubstrateNetwork, batch_size: int = 10, remap_budget: int | None = None,
                 batch_timeout: int | None = None, k_max: int = 2, record_weights: bool = False):
        self.net = net
        self.store = RuleStore()
        self.queue = BatchQueue(batch_size, batch_timeout)
        self.remap_budget = batch_size if remap_budget is None else remap_budget
        self.k_max = k_max
        self.active: dict[int, Embedding] = {}
        self.record_weights = record_weights
        self.weight_log: list[tuple[int, LinkWeightRecord]] = []

    # -- arrivals -----------------------------------------------------------

    def enqueue_success(self, emb: Embedding, now: int) -> FlushResult | None:
        batch = self.queue.enqueue(emb, now)
        return None if batch is None else self._flush(batch, now)

    def flush_pending(self, now: int) -> FlushResult | None:
        if not self.queue.pending:
            return None
        return self._flush(self.queue.drain(), now)

    def _flush(self, batch: list[tuple[Embedding, int]], now: int) -> FlushResult:
        embs = [e for e, _ in batch]
        txns = flush_batch(self.store, embs, now)
        for e in embs:
            self.active[e.request_id] = e
        log.debug("t=%d flush of %d embeddings, %d transactions", now, len(embs), len(txns))
        return FlushResult(embs, txns, {e.request_id: now - t for e, t in batch})

    # -- expiries -----------------------------------------------------------

    def on_expiry(self, emb: Embedding, now: int) -> list[WriteTransaction]:
        if self.queue.remove(emb):
            tear_down(self.net, emb)
            return []
        if self.active.pop(emb.request_id, None) is not emb:
            raise ControllerError(f"request {emb.request_id} is neither pending nor active")
        rules = rules_for_embedding(emb)
        self.store.remove(rules)
        txns = self.store.sync({r.switch_id for r in rules}, now)
        tear_down(self.net, emb)
        return txns

    # -- remapping ----------------------------------------------------------

    def live(self) -> list[Embedding]:
        """Flushed and still-pending embeddings, by request id."""
        embs = list(self.active.values()) + [e for e, _ in self.queue.pending]
        return sorted(embs, key=lambda e: e.request_id)

    def total_R(self) -> int:
        return sum(compute_R(self.net, shares)
                   for emb in self.live() for shares in emb.link_map.values())

    def _swap(self, emb: Embedding, link_id: int, old_alloc, new_shares, now) -> list[WriteTransaction]:
        """Install ``new_shares`` for a link whose old allocation is already released."""
        new_alloc = link_allocation(emb.request_id, new_shares)
        try:
            self.net.allocate(new_alloc)
        except InsufficientResources:
            self.net.allocate(old_alloc)
            raise
        old_rules = rules_for_link(emb, link_id)
        emb.link_allocations[link_id] = new_alloc
        emb.link_map[link_id] = new_shares
        if self.active.get(emb.request_id) is not emb:
            # still batched: nothing written yet, the flush picks up the new path
            return []
        new_rules = rules_for_link(emb, link_id)
        self.store.remove(old_rules)
        self.store.add(new_rules)
        return self.store.sync({r.switch_id for r in old_rules | new_rules}, now)

    def remap_pass(self, now: int, budget: int | None = None) -> RemapResult:
        """Try to move the ``budget`` heaviest links onto strictly cheaper paths."""
        budget = self.remap_budget if budget is None else budget
        result = RemapResult()
        live = {e.request_id: e for e in self.live()}
        if budget <= 0 or not live:
            return result
        ranking = rank_mapped_links(self.net, live.values())
        if self.record_weights:
            self.weight_log.extend((now, rec) for rec in ranking)
        result.R_before = sum(rec.R for rec in ranking)
        for rec in ranking[:budget]:
            emb = live[rec.request_id]
            src, dst = emb.endpoints(rec.link_id)
            demand = emb.demand(rec.link_id)
            old_shares = emb.link_map[rec.link_id]
            old_alloc = emb.link_allocations[rec.link_id]
            self.net.release(old_alloc)
            try:
                path = find_unsplittable_path(self.net, src, dst, demand, Reservation(self.net))
            except NoFeasiblePath:
                path = None
            new_shares = (PathShare(path, demand),) if path else None
            if new_shares is None or compute_R(self.net, new_shares) >= rec.R:
                self.net.allocate(old_alloc)
                continue
            result.transactions += self._swap(emb, rec.link_id, old_alloc, new_shares, now)
            result.remaps.append(RemapRecord(rec.request_id, rec.link_id, old_shares, new_shares,
                                             rec.R, compute_R(self.net, new_shares)))
        result.R_after = self.total_R()
        return result

    def transfer_pass(self, now: int) -> RemapResult:
        """Path migration for split mappings: re-split the largest live link.

        The new split is adopted only if it lowers the hop-weighted bandwidth
        (sum of share x hops).  Weight ranking is not used here.
        """
        result = RemapResult()
        candidates = [(emb.demand(lid), emb.request_id, lid)
                      for emb in self.active.values() for lid in emb.link_map]
        if not candidates:
            return result
        _, rid, lid = min(candidates, key=lambda c: (-c[0], c[1], c[2]))
        emb = self.active[rid]
        src, dst = emb.endpoints(lid)
        old_shares = emb.link_map[lid]
        old_alloc = emb.link_allocations[lid]
        result.R_before = self.total_R()
        self.net.release(old_alloc)
        try:
            new_shares = find_split_paths(self.net, src, dst, emb.demand(lid), self.k_max,
                                          Reservation(self.net))
        except Rejected:
            new_shares = None

        def weight(shares):
            return sum(ps.share * ps.hops for ps in shares)

        if new_shares is None or weight(new_shares) >= weight(old_shares):
            self.net.allocate(old_alloc)
        else:
            result.transactions += self._swap(emb, lid, old_alloc, new_shares, now)
            result.remaps.append(RemapRecord(rid, lid, old_shares, new_shares,
                                             compute_R(self.net, old_shares),
                                             compute_R(self.net, new_shares)))
        result.R_after = self.total_R()
        return result

    # -- checks -------------------------------------------------------------

    def pending_rules_installed(self) -> int:
        """Number of installed rules that belong to embeddings still in the batch."""
        count = 0
        for emb, _ in self.queue.pending:
            for r in rules_for_embedding(emb):
                count += r.rule_id in self.store.installed.get(r.switch_id, ())
        return count

    def check(self) -> None:
        if not self.store.consistent():
            raise ControllerError("installed tables differ from the intended rule database")
        if self.pending_rules_installed():
            raise ControllerError("rules of a pending embedding were written early")
