"""Discrete-event loop tying workload, embedder, controller and metrics together.

A run is a pure function of its :class:`SimConfig`.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .controller import Controller, ControllerError, FlushResult, RemapResult
from .embedder import SPLITTABLE, UNSPLITTABLE, Embedding, Rejected, embed_request
from .link_weights import compute_R
from .metrics import MetricsRecorder, RunSummary, finalize_summary
from .substrate import SubstrateNetwork, TopologySpec, build_topology
from .workload import (
    ARRIVAL,
    EXPIRY,
    WorkloadSpec,
    WorkloadStream,
    generate_workload,
    load_workload,
)

PROPOSED, SDNVN, SSPSM = "proposed", "sdnvn", "sspsm"
STRATEGIES = (PROPOSED, SDNVN, SSPSM)

# pop order at equal time: expiries free resources before same-tick arrivals
_PRIORITY = {EXPIRY: 0, ARRIVAL: 1, "batch-timeout": 2, "window-close": 2}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    name: str = PROPOSED
    n: int = 10

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.name!r}; expected one of {STRATEGIES}")
        if self.n < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.n}")
        if self.name != PROPOSED:
            object.__setattr__(self, "n", 1)

    @property
    def batch_size(self) -> int:
        return self.n if self.name == PROPOSED else 1

    @property
    def variant(self) -> str:
        return SPLITTABLE if self.name == SSPSM else UNSPLITTABLE


@dataclass
class SimConfig:
    topology: TopologySpec = field(default_factory=TopologySpec)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    strategy: Strategy = field(default_factory=Strategy)
    seed: int = 1
    remap_budget: int | None = None  # None: one attempt per batch slot
    batch_timeout: int | None = None
    t_write: float = 1.0
    checkpoint_every: int = 100
    k_max: int = 2
    sspsm_window: int = 50
    sspsm_migration: bool = True
    check_invariants: bool = False
    trace: bool = False
    weights_dump: bool = False
    workload_file: str | None = None

    def validate(self) -> None:
        try:
            self.topology.validate()
            self.workload.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.remap_budget is not None and self.remap_budget < 0:
            raise ConfigError("remap_budget must be >= 0")
        if self.batch_timeout is not None and self.batch_timeout < 1:
            raise ConfigError("batch_timeout must be >= 1 when set")
        if self.t_write < 0:
            raise ConfigError("t_write must be >= 0")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        if self.k_max < 2:
            raise ConfigError("k_max must be >= 2")
        if self.sspsm_window < 1:
            raise ConfigError("sspsm_window must be >= 1")


class Simulation:
    def __init__(self, config: SimConfig, net: SubstrateNetwork | None = None,
                 stream: WorkloadStream | None = None):
        config.validate()
        self.config = config
        self.strategy = config.strategy
        self.net = net if net is not None else build_topology(config.topology, config.seed)
        if stream is None:
            stream = (load_workload(config.workload_file) if config.workload_file
                      else generate_workload(config.workload, config.seed))
        self.stream = stream
        self.controller = Controller(
            self.net,
            batch_size=self.strategy.batch_size,
            remap_budget=config.remap_budget,
            batch_timeout=config.batch_timeout,
            k_max=config.k_max,
            record_weights=config.weights_dump,
        )
        self.metrics = MetricsRecorder()
        self.embeddings: dict[int, Embedding] = {}
        self.window: list = []
        self.remap_violations: list[str] = []
        self.remap_log: list[tuple[int, RemapResult]] = []
        self.flush_log: list[tuple[int, FlushResult]] = []
        self.trace: list[str] = []
        self.now = 0
        self._events: list = []
        self._seq = itertools.count()
        for ev in self.stream:
            self._push(ev.time, ev.kind, ev.request.id, ev.request)

    def _push(self, time, kind, ident, payload=None):
        heapq.heappush(self._events, (time, _PRIORITY[kind], ident, next(self._seq), kind, payload))

    def _log(self, msg: str) -> None:
        if self.config.trace:
            self.trace.append(f"{self.now} {msg}")

    @property
    def uses_weights(self) -> bool:
        return self.strategy.name != SSPSM

    # -- event handlers -----------------------------------------------------

    def _record_flush(self, flush: FlushResult | None) -> None:
        if flush is None:
            return
        self.flush_log.append((self.now, flush))
        self.metrics.record_transactions(flush.transactions)
        self.metrics.record_flush(flush.transactions, flush.waits, self.config.t_write)
        self._log(f"flush requests={[e.request_id for e in flush.embeddings]} "
                  f"txns={len(flush.transactions)}")
        for t in flush.transactions:
            self._log(f"write switch={t.switch_id} add={len(t.additions)} del={len(t.deletions)}")

    def _record_remap(self, result: RemapResult) -> None:
        self.remap_log.append((self.now, result))
        self.metrics.record_transactions(result.transactions)
        for rec in result.remaps:
            if self.uses_weights and not rec.R_new < rec.R_old:
                self.remap_violations.append(
                    f"t={self.now} request {rec.request_id} link {rec.link_id}: R {rec.R_old}->{rec.R_new}")
            self.metrics.record_mapping(rec.R_new)
            self.metrics.remap_count += 1
            self._log(f"remap request={rec.request_id} link={rec.link_id} "
                      f"{[ps.path for ps in rec.old]}->{[ps.path for ps in rec.new]} R {rec.R_old}->{rec.R_new}")
        if self.uses_weights and result.R_after > result.R_before:
            self.remap_violations.append(
                f"t={self.now} pass raised total R {result.R_before}->{result.R_after}")
        if self.remap_violations and self.config.check_invariants:
            raise ControllerError(self.remap_violations[-1])

    def _after_state_change(self) -> None:
        if self.strategy.name == SSPSM:
            if self.config.sspsm_migration:
                self._record_remap(self.controller.transfer_pass(self.now))
        else:
            self._record_remap(self.controller.remap_pass(self.now))

    def _admit(self, request) -> None:
        try:
            emb = embed_request(self.net, request, self.strategy.variant, self.config.k_max, self.now)
        except Rejected as exc:
            self._log(f"reject request={request.id} reason={exc.reason}")
            return
        self.metrics.accepted += 1
        self.embeddings[request.id] = emb
        for shares in emb.link_map.values():
            self.metrics.record_mapping(compute_R(self.net, shares))
        self._log(f"accept request={request.id} nodes={emb.node_map}")
        was_empty = len(self.controller.queue) == 0
        flush = self.controller.enqueue_success(emb, self.now)
        if flush is None:
            if was_empty and self.config.batch_timeout is not None:
                self._push(self.now + self.config.batch_timeout, "batch-timeout",
                           self.controller.queue.epoch)
            return
        self._record_flush(flush)
        if self.strategy.name != SSPSM:
            self._after_state_change()

    def _on_arrival(self, request) -> None:
        self.metrics.arrived += 1
        self._log(f"arrival request={request.id}")
        if self.strategy.name == SSPSM:
            if not self.window:
                self._push(self.now + self.config.sspsm_window, "window-close", request.id)
            self.window.append(request)
        else:
            self._admit(request)
        if self.metrics.arrived % self.config.checkpoint_every == 0:
            self.metrics.snapshot(self.now, self.net)

    def _on_expiry(self, request) -> None:
        if request in self.window:
            # left before its window closed: never served
            self.window.remove(request)
            self._log(f"drop request={request.id} expired-in-window")
            return
        emb = self.embeddings.pop(request.id, None)
        if emb is None:
            return
        txns = self.controller.on_expiry(emb, self.now)
        self.metrics.record_transactions(txns)
        self._log(f"expiry request={request.id} txns={len(txns)}")
        self._after_state_change()

    def _on_window_close(self) -> None:
        collected, self.window = self.window, []
        for request in collected:
            self._admit(request)

    def _on_batch_timeout(self, epoch: int) -> None:
        if epoch != self.controller.queue.epoch:
            return
        flush = self.controller.flush_pending(self.now)
        if flush is not None:
            self._log("batch-timeout")
            self._record_flush(flush)
            self._after_state_change()

    # -- driving ------------------------------------------------------------

    def step(self) -> bool:
        """Process one event; returns False once the queue is exhausted."""
        if not self._events:
            return False
        time, _, ident, _, kind, payload = heapq.heappop(self._events)
        self.now = time
        if kind == ARRIVAL:
            self._on_arrival(payload)
        elif kind == EXPIRY:
            self._on_expiry(payload)
        elif kind == "window-close":
            self._on_window_close()
        else:
            self._on_batch_timeout(ident)
        if self.config.check_invariants:
            self.check()
        return True

    def check(self) -> None:
        self.net.check_conservation()
        self.controller.check()

    def run(self) -> RunSummary:
        while self.step():
            pass
        return self.summary()

    def summary(self) -> RunSummary:
        s = finalize_summary(self.metrics, self.strategy.name, self.strategy.n, self.config.seed)
        s.trace = list(self.trace)
        if self.config.weights_dump:
            s.weights = [f"{t},{r.request_id},{r.link_id},{r.R},{r.A},{r.W}"
                         for t, r in self.controller.weight_log]
        return s


def run(config: SimConfig) -> RunSummary:
    return Simulation(config).run()
