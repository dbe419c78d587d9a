"""Reproducible virtual-network request streams.

Arrivals are Poisson, lifetimes exponential; both are drawn as reals and
rounded up to whole ticks (at least one) so replay is exact.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

ARRIVAL = "arrival"
EXPIRY = "expiry"


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class VirtualNode:
    id: int
    rule_demand: int = 1


@dataclass(frozen=True)
class VirtualLink:
    id: int
    u: int
    v: int
    bandwidth_demand: int


@dataclass(frozen=True)
class VirtualNetworkRequest:
    id: int
    nodes: tuple[VirtualNode, ...]
    links: tuple[VirtualLink, ...]
    arrival_time: int
    lifetime: int

    @property
    def expiry_time(self) -> int:
        return self.arrival_time + self.lifetime

    def node(self, node_id: int) -> VirtualNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        adj: dict[int, set[int]] = {n.id: set() for n in self.nodes}
        for l in self.links:
            adj[l.u].add(l.v)
            adj[l.v].add(l.u)
        start = self.nodes[0].id
        seen, stack = {start}, [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.nodes)


@dataclass(frozen=True)
class WorkloadEvent:
    time: int
    kind: str
    request: VirtualNetworkRequest

    @property
    def request_id(self) -> int:
        return self.request.id

    def sort_key(self) -> tuple[int, int, int]:
        # arrival before expiry at equal time, then request id
        return (self.time, 0 if self.kind == ARRIVAL else 1, self.request.id)


@dataclass
class WorkloadSpec:
    count: int = 1500
    arrival_rate: float = 0.05
    mean_lifetime: float = 500.0
    min_nodes: int = 2
    max_nodes: int = 5
    link_probability: float = 0.5
    bandwidth_min: int = 10
    bandwidth_max: int = 50
    rule_demand_min: int = 1
    rule_demand_max: int = 1

    def validate(self) -> None:
        if self.count < 0:
            raise WorkloadError("count must be >= 0")
        if self.arrival_rate <= 0 or self.mean_lifetime <= 0:
            raise WorkloadError("arrival_rate and mean_lifetime must be positive")
        if not 2 <= self.min_nodes <= self.max_nodes:
            raise WorkloadError(f"node range [{self.min_nodes}, {self.max_nodes}] is infeasible")
        if not 0.0 <= self.link_probability <= 1.0:
            raise WorkloadError("link_probability must lie in [0, 1]")
        if not 1 <= self.bandwidth_min <= self.bandwidth_max:
            raise WorkloadError("bandwidth demand range is empty or non-positive")
        if not 1 <= self.rule_demand_min <= self.rule_demand_max:
            raise WorkloadError("rule demand range is empty or non-positive")


def _ticks(x: float) -> int:
    return max(1, math.ceil(x))


def _random_topology(spec: WorkloadSpec, rng: random.Random) -> tuple[list, list]:
    n = rng.randint(spec.min_nodes, spec.max_nodes)
    nodes = [VirtualNode(i, rng.randint(spec.rule_demand_min, spec.rule_demand_max))
             for i in range(n)]
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)
             if rng.random() < spec.link_probability]

    # join components until connected: link a random member of the growing
    # component to a random member of the next one
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in pairs:
        parent[find(u)] = find(v)
    components: dict[int, list[int]] = {}
    for x in range(n):
        components.setdefault(find(x), []).append(x)
    groups = sorted(components.values())
    for prev, nxt in zip(groups, groups[1:]):
        a, b = rng.choice(prev), rng.choice(nxt)
        pairs.append((min(a, b), max(a, b)))
        nxt.extend(prev)

    links = [VirtualLink(i, u, v, rng.randint(spec.bandwidth_min, spec.bandwidth_max))
             for i, (u, v) in enumerate(sorted(pairs))]
    return nodes, links


def generate_requests(spec: WorkloadSpec, seed: int) -> list[VirtualNetworkRequest]:
    spec.validate()
    rng = random.Random(f"workload:{seed}")
    requests = []
    t = 0
    for rid in range(spec.count):
        t += _ticks(rng.expovariate(spec.arrival_rate))
        lifetime = _ticks(rng.expovariate(1.0 / spec.mean_lifetime))
        nodes, links = _random_topology(spec, rng)
        requests.append(VirtualNetworkRequest(rid, tuple(nodes), tuple(links), t, lifetime))
    return requests


def events_for(requests) -> list[WorkloadEvent]:
    events = []
    for r in requests:
        events.append(WorkloadEvent(r.arrival_time, ARRIVAL, r))
        events.append(WorkloadEvent(r.expiry_time, EXPIRY, r))
    events.sort(key=WorkloadEvent.sort_key)
    return events


class WorkloadStream:
    """Immutable, time-ordered event list with cursor-style access."""

    def __init__(self, events: list[WorkloadEvent]):
        self.events = tuple(sorted(events, key=WorkloadEvent.sort_key))

    def __len__(self):
        return len(self.events)

    def __iter__(self) -> Iterator[WorkloadEvent]:
        return iter(self.events)

    @property
    def requests(self) -> list[VirtualNetworkRequest]:
        return [e.request for e in self.events if e.kind == ARRIVAL]

    def cursor(self) -> "Cursor":
        return Cursor(self)


class Cursor:
    def __init__(self, stream: WorkloadStream):
        self.stream = stream
        self.position = 0

    def next_event(self) -> WorkloadEvent | None:
        """Next event, or ``None`` at end of stream."""
        if self.position >= len(self.stream.events):
            return None
        event = self.stream.events[self.position]
        self.position += 1
        return event


def generate_workload(spec: WorkloadSpec, seed: int) -> WorkloadStream:
    return WorkloadStream(events_for(generate_requests(spec, seed)))


# -- dump / load --------------------------------------------------------------
#
#   arrival <time> <request> <lifetime> nodes=<id>:<rules>,... links=<id>:<u>-<v>:<bw>,...
#   expiry <time> <request>


def dumps_workload(stream: WorkloadStream) -> str:
    lines = []
    for e in stream:
        r = e.request
        if e.kind == ARRIVAL:
            nodes = ",".join(f"{n.id}:{n.rule_demand}" for n in r.nodes)
            links = ",".join(f"{l.id}:{l.u}-{l.v}:{l.bandwidth_demand}" for l in r.links)
            lines.append(f"arrival {e.time} {r.id} {r.lifetime} nodes={nodes} links={links}")
        else:
            lines.append(f"expiry {e.time} {r.id}")
    return "\n".join(lines) + ("\n" if lines else "")


def loads_workload(text: str) -> WorkloadStream:
    requests: dict[int, VirtualNetworkRequest] = {}
    expiries: list[tuple[int, int]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == ARRIVAL:
                t, rid, lifetime = int(parts[1]), int(parts[2]), int(parts[3])
                fields = dict(p.split("=", 1) for p in parts[4:])
                nodes = tuple(VirtualNode(int(i), int(d)) for i, d in
                              (tok.split(":") for tok in fields["nodes"].split(",") if tok))
                links = []
                for tok in filter(None, fields.get("links", "").split(",")):
                    lid, ends, bw = tok.split(":")
                    u, v = ends.split("-")
                    links.append(VirtualLink(int(lid), int(u), int(v), int(bw)))
                requests[rid] = VirtualNetworkRequest(rid, nodes, tuple(links), t, lifetime)
            elif parts[0] == EXPIRY:
                expiries.append((int(parts[1]), int(parts[2])))
            else:
                raise WorkloadError(f"line {lineno}: unknown event kind {parts[0]!r}")
        except (IndexError, KeyError, ValueError) as exc:
            if isinstance(exc, WorkloadError):
                raise
            raise WorkloadError(f"line {lineno}: malformed event {line!r}") from exc
    for t, rid in expiries:
        if rid not in requests or requests[rid].expiry_time != t:
            raise WorkloadError(f"expiry of request {rid} at {t} has no matching arrival")
    if len(expiries) != len(requests):
        raise WorkloadError("every arrival needs exactly one expiry")
    return WorkloadStream(events_for(requests.values()))


def save_workload(stream: WorkloadStream, path: str | Path) -> None:
    Path(path).write_text(dumps_workload(stream))


def load_workload(path: str | Path) -> WorkloadStream:
    return loads_workload(Path(path).read_text())
