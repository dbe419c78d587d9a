"""Substrate network: switches with flow-table memory, links with bandwidth.

All capacities are integer units. Resources are only ever debited through
:class:`Allocation` objects so that the live usage can be recomputed from
scratch at any time and compared with the incremental counters.
"""

from __future__ import annotations

import itertools
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import networkx as nx

LinkKey = tuple[int, int]


def link_key(u: int, v: int) -> LinkKey:
    return (u, v) if u < v else (v, u)


class SubstrateError(Exception):
    pass


class TopologyError(SubstrateError, ValueError):
    pass


class UnknownElement(SubstrateError, KeyError):
    pass


class AllocationError(SubstrateError):
    """Release of an allocation that is unknown or already released."""


class InsufficientResources(SubstrateError):
    def __init__(self, element, requested: int, residual: int):
        self.element = element
        self.requested = requested
        self.residual = residual
        super().__init__(f"{element}: requested {requested}, residual {residual}")


class InsufficientBandwidth(InsufficientResources):
    pass


class InsufficientMemory(InsufficientResources):
    pass


class ConservationError(SubstrateError, AssertionError):
    pass


@dataclass
class SubstrateSwitch:
    id: int
    memory_capacity: int
    memory_used: int = 0

    @property
    def residual(self) -> int:
        return self.memory_capacity - self.memory_used


@dataclass
class SubstrateLink:
    u: int
    v: int
    bandwidth_capacity: int
    bandwidth_allocated: int = 0

    @property
    def key(self) -> LinkKey:
        return link_key(self.u, self.v)

    @property
    def residual(self) -> int:
        return self.bandwidth_capacity - self.bandwidth_allocated


_alloc_ids = itertools.count(1)


@dataclass(eq=False)
class Allocation:
    """A bundle of debits that is applied and released as one unit.

    ``link_debits`` and ``switch_debits`` may mention the same element more
    than once; amounts are summed before capacity checks.
    """

    request_id: int
    link_debits: tuple[tuple[LinkKey, int], ...] = ()
    switch_debits: tuple[tuple[int, int], ...] = ()
    id: int = field(default_factory=lambda: next(_alloc_ids))

    def __post_init__(self):
        self.link_debits = tuple((link_key(*k), int(a)) for k, a in self.link_debits)
        self.switch_debits = tuple((int(s), int(a)) for s, a in self.switch_debits)
        for element, amount in self.link_debits + self.switch_debits:
            if amount <= 0:
                raise ValueError(f"debit on {element} must be positive, got {amount}")

    def link_totals(self) -> dict[LinkKey, int]:
        totals: dict[LinkKey, int] = defaultdict(int)
        for k, a in self.link_debits:
            totals[k] += a
        return dict(totals)

    def switch_totals(self) -> dict[int, int]:
        totals: dict[int, int] = defaultdict(int)
        for s, a in self.switch_debits:
            totals[s] += a
        return dict(totals)


class SubstrateNetwork:
    def __init__(self, switches: Iterable[SubstrateSwitch], links: Iterable[SubstrateLink]):
        self.switches: dict[int, SubstrateSwitch] = {}
        for sw in switches:
            if sw.id in self.switches:
                raise TopologyError(f"duplicate switch {sw.id}")
            self.switches[sw.id] = sw
        self.links: dict[LinkKey, SubstrateLink] = {}
        adjacency: dict[int, set[int]] = {s: set() for s in self.switches}
        for link in links:
            if link.u == link.v:
                raise TopologyError(f"self-loop on switch {link.u}")
            if link.u not in self.switches or link.v not in self.switches:
                raise TopologyError(f"link {link.key} references an unknown switch")
            if link.key in self.links:
                raise TopologyError(f"parallel link {link.key}")
            self.links[link.key] = link
            adjacency[link.u].add(link.v)
            adjacency[link.v].add(link.u)
        self.adjacency: dict[int, tuple[int, ...]] = {
            s: tuple(sorted(n)) for s, n in adjacency.items()
        }
        self.live: dict[int, Allocation] = {}

    def __repr__(self):
        return f"SubstrateNetwork({len(self.switches)} switches, {len(self.links)} links)"

    def is_connected(self) -> bool:
        if not self.switches:
            return False
        start = min(self.switches)
        seen = {start}
        stack = [start]
        while stack:
            for nb in self.adjacency[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.switches)

    # -- residual queries -------------------------------------------------

    def link(self, u: int, v: int) -> SubstrateLink:
        try:
            return self.links[link_key(u, v)]
        except KeyError:
            raise UnknownElement(f"no link {link_key(u, v)}") from None

    def switch(self, s: int) -> SubstrateSwitch:
        try:
            return self.switches[s]
        except KeyError:
            raise UnknownElement(f"no switch {s}") from None

    def residual_link(self, u: int, v: int) -> int:
        return self.link(u, v).residual

    def residual_switch(self, s: int) -> int:
        return self.switch(s).residual

    def residual_of(self, element) -> int:
        """Residual capacity of a switch id or a ``(u, v)`` link pair."""
        if isinstance(element, tuple):
            return self.residual_link(*element)
        return self.residual_switch(element)

    # -- allocation -------------------------------------------------------

    def _check(self, link_totals: dict[LinkKey, int], switch_totals: dict[int, int]) -> None:
        for k, amount in link_totals.items():
            if k not in self.links:
                raise UnknownElement(f"no link {k}")
            residual = self.links[k].residual
            if amount > residual:
                raise InsufficientBandwidth(k, amount, residual)
        for s, amount in switch_totals.items():
            if s not in self.switches:
                raise UnknownElement(f"no switch {s}")
            residual = self.switches[s].residual
            if amount > residual:
                raise InsufficientMemory(s, amount, residual)

    def allocate(self, *allocs: Allocation) -> None:
        """Apply every debit of ``allocs`` or none of them.

        Raises :class:`InsufficientBandwidth` / :class:`InsufficientMemory`
        naming the first violated element; the network is left untouched.
        """
        link_totals: dict[LinkKey, int] = defaultdict(int)
        switch_totals: dict[int, int] = defaultdict(int)
        for alloc in allocs:
            if alloc.id in self.live:
                raise AllocationError(f"allocation {alloc.id} already applied")
            for k, a in alloc.link_debits:
                link_totals[k] += a
            for s, a in alloc.switch_debits:
                switch_totals[s] += a
        self._check(link_totals, switch_totals)
        for k, a in link_totals.items():
            self.links[k].bandwidth_allocated += a
        for s, a in switch_totals.items():
            self.switches[s].memory_used += a
        for alloc in allocs:
            self.live[alloc.id] = alloc

    def release(self, *allocs: Allocation) -> None:
        for alloc in allocs:
            if self.live.get(alloc.id) is not alloc:
                raise AllocationError(f"allocation {alloc.id} is not live")
        for alloc in allocs:
            for k, a in alloc.link_debits:
                self.links[k].bandwidth_allocated -= a
            for s, a in alloc.switch_debits:
                self.switches[s].memory_used -= a
            del self.live[alloc.id]

    # -- bookkeeping ------------------------------------------------------

    def snapshot(self) -> tuple[dict[LinkKey, int], dict[int, int]]:
        return (
            {k: l.bandwidth_allocated for k, l in self.links.items()},
            {s: sw.memory_used for s, sw in self.switches.items()},
        )

    def recompute_usage(self) -> tuple[dict[LinkKey, int], dict[int, int]]:
        links = {k: 0 for k in self.links}
        switches = {s: 0 for s in self.switches}
        for alloc in self.live.values():
            for k, a in alloc.link_debits:
                links[k] += a
            for s, a in alloc.switch_debits:
                switches[s] += a
        return links, switches

    def check_conservation(self) -> None:
        """Raise :class:`ConservationError` if counters drift from live allocations."""
        if self.snapshot() != self.recompute_usage():
            raise ConservationError("incremental usage differs from recomputation")
        for k, link in self.links.items():
            if not 0 <= link.bandwidth_allocated <= link.bandwidth_capacity:
                raise ConservationError(f"link {k} out of bounds")
        for s, sw in self.switches.items():
            if not 0 <= sw.memory_used <= sw.memory_capacity:
                raise ConservationError(f"switch {s} out of bounds")


# -- topology construction --------------------------------------------------


@dataclass
class TopologySpec:
    generator: str = "waxman"
    nodes: int = 14
    capacity_min: int = 100
    capacity_max: int = 250
    waxman_alpha: float = 0.5
    waxman_beta: float = 0.5
    # explicit generator: (u, v, bandwidth) triples and optional per-switch memory
    edges: list[tuple[int, int, int]] | None = None
    memory: dict[int, int] | None = None

    def validate(self) -> None:
        if self.generator not in GENERATORS:
            raise TopologyError(f"unknown generator {self.generator!r}")
        if self.generator != "explicit" and self.nodes < 2:
            raise TopologyError(f"need at least 2 switches, got {self.nodes}")
        if not 1 <= self.capacity_min <= self.capacity_max:
            raise TopologyError("capacity range must satisfy 1 <= min <= max")


def _waxman_edges(spec: TopologySpec, rng: random.Random) -> list[tuple[int, int]]:
    # waxman_alpha scales the distance decay, waxman_beta the edge density
    for _ in range(10_000):
        g = nx.waxman_graph(spec.nodes, beta=spec.waxman_beta, alpha=spec.waxman_alpha, seed=rng)
        if nx.is_connected(g):
            return sorted(link_key(u, v) for u, v in g.edges())
    raise TopologyError("could not sample a connected Waxman graph")


def _dumbbell_edges(spec: TopologySpec, rng: random.Random) -> list[tuple[int, int]]:
    # two stars whose hubs are joined by a single bottleneck link
    n = spec.nodes
    left_hub, right_hub = 0, n // 2
    edges = [(left_hub, right_hub)]
    edges += [(left_hub, s) for s in range(1, n // 2)]
    edges += [(right_hub, s) for s in range(n // 2 + 1, n)]
    return sorted(link_key(u, v) for u, v in edges)


GENERATORS = {"waxman": _waxman_edges, "dumbbell": _dumbbell_edges, "explicit": None}


def build_topology(spec: TopologySpec, seed: int) -> SubstrateNetwork:
    """Build a connected substrate; identical ``(spec, seed)`` gives an identical graph."""
    spec.validate()
    rng = random.Random(f"topology:{seed}")
    lo, hi = spec.capacity_min, spec.capacity_max

    if spec.generator == "explicit":
        if not spec.edges:
            raise TopologyError("explicit topology needs a non-empty edge list")
        ids = sorted({u for u, _, _ in spec.edges} | {v for _, v, _ in spec.edges}
                     | set(spec.memory or ()))
        if len(ids) < 2:
            raise TopologyError("need at least 2 switches")
        memory = dict(spec.memory or {})
        switches = [SubstrateSwitch(s, memory[s] if s in memory else rng.randint(lo, hi))
                    for s in ids]
        links = [SubstrateLink(u, v, int(cap)) for u, v, cap in spec.edges]
    else:
        edges = GENERATORS[spec.generator](spec, rng)
        switches = [SubstrateSwitch(s, rng.randint(lo, hi)) for s in range(spec.nodes)]
        links = [SubstrateLink(u, v, rng.randint(lo, hi)) for u, v in edges]

    net = SubstrateNetwork(switches, links)
    if not net.is_connected():
        raise TopologyError("substrate graph is disconnected")
    return net


# -- import / export ----------------------------------------------------------


def dumps_topology(net: SubstrateNetwork) -> str:
    """Switch table (``u memory_capacity``) followed by the edge list (``u v capacity``)."""
    lines = ["# switches: id memory_capacity"]
    lines += [f"{s} {sw.memory_capacity}" for s, sw in sorted(net.switches.items())]
    lines.append("# links: u v bandwidth_capacity")
    lines += [f"{k[0]} {k[1]} {l.bandwidth_capacity}" for k, l in sorted(net.links.items())]
    return "\n".join(lines) + "\n"


def loads_topology(text: str) -> SubstrateNetwork:
    switches, links = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise TopologyError(f"line {lineno}: non-integer field in {raw!r}") from None
        if len(nums) == 2:
            switches.append(SubstrateSwitch(nums[0], nums[1]))
        elif len(nums) == 3:
            links.append(SubstrateLink(*nums))
        else:
            raise TopologyError(f"line {lineno}: expected 2 or 3 fields, got {len(nums)}")
    net = SubstrateNetwork(switches, links)
    if not net.is_connected():
        raise TopologyError("substrate graph is disconnected")
    return net


def save_topology(net: SubstrateNetwork, path: str | Path) -> None:
    Path(path).write_text(dumps_topology(net))


def load_topology(path: str | Path) -> SubstrateNetwork:
    return loads_topology(Path(path).read_text())


def to_dot(net: SubstrateNetwork) -> str:
    lines = ["graph substrate {"]
    for s, sw in sorted(net.switches.items()):
        lines.append(f'  {s} [label="{s}\\nmem {sw.memory_used}/{sw.memory_capacity}"];')
    for (u, v), l in sorted(net.links.items()):
        lines.append(f'  {u} -- {v} [label="{l.bandwidth_allocated}/{l.bandwidth_capacity}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
