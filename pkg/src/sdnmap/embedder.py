"""Initial embedding of virtual-network requests.

Node mapping is greedy; link mapping is sequential shortest-feasible-path
routing, either unsplittable or split over at most ``k_max`` paths.  Every
tie is broken by a total order, so results are reproducible.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

from .substrate import (
    Allocation,
    InsufficientResources,
    SubstrateNetwork,
    link_key,
)
from .workload import VirtualNetworkRequest

UNSPLITTABLE = "unsplittable"
SPLITTABLE = "splittable"

# rule-units consumed by one virtual link on each switch of its path
RULES_PER_SWITCH = 1

Path = tuple[int, ...]


class Rejected(Exception):
    reason = "rejected"


class NodeUnmappable(Rejected):
    reason = "node-unmappable"

    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"virtual node {node_id} has no feasible switch")


class LinkUnmappable(Rejected):
    reason = "link-unmappable"

    def __init__(self, link_id: int | None, detail: str = "no feasible path"):
        self.link_id = link_id
        super().__init__(f"virtual link {link_id}: {detail}")


class NoFeasiblePath(Rejected):
    reason = "no-feasible-path"


class InsufficientAggregateBandwidth(Rejected):
    reason = "insufficient-aggregate-bandwidth"


class EmbeddingStateError(Exception):
    pass


@dataclass(frozen=True)
class PathShare:
    path: Path
    share: int

    @property
    def hops(self) -> int:
        return len(self.path) - 1

    def links(self) -> list[tuple[int, int]]:
        return [link_key(a, b) for a, b in zip(self.path, self.path[1:])]


def link_allocation(request_id: int, shares: tuple[PathShare, ...]) -> Allocation:
    """Bandwidth on every path link plus rule memory on every path switch."""
    return Allocation(
        request_id,
        link_debits=tuple((k, ps.share) for ps in shares for k in ps.links()),
        switch_debits=tuple((s, RULES_PER_SWITCH) for ps in shares for s in ps.path),
    )


@dataclass(eq=False)
class Embedding:
    request: VirtualNetworkRequest
    node_map: dict[int, int]
    link_map: dict[int, tuple[PathShare, ...]]
    node_allocation: Allocation
    link_allocations: dict[int, Allocation]
    variant: str = UNSPLITTABLE
    live: bool = True
    mapped_at: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def request_id(self) -> int:
        return self.request.id

    def allocations(self) -> list[Allocation]:
        return [self.node_allocation, *(self.link_allocations[l] for l in sorted(self.link_allocations))]

    def endpoints(self, link_id: int) -> tuple[int, int]:
        vl = next(l for l in self.request.links if l.id == link_id)
        return self.node_map[vl.u], self.node_map[vl.v]

    def demand(self, link_id: int) -> int:
        return next(l.bandwidth_demand for l in self.request.links if l.id == link_id)


class Reservation:
    """Tentative debits of a request under construction, layered over the net."""

    def __init__(self, net: SubstrateNetwork):
        self.net = net
        self.bw: dict[tuple[int, int], int] = defaultdict(int)
        self.mem: dict[int, int] = defaultdict(int)

    def link_residual(self, k) -> int:
        return self.net.links[k].residual - self.bw.get(k, 0)

    def switch_residual(self, s) -> int:
        return self.net.switches[s].residual - self.mem.get(s, 0)

    def add(self, shares) -> None:
        for ps in shares:
            for k in ps.links():
                self.bw[k] += ps.share
            for s in ps.path:
                self.mem[s] += RULES_PER_SWITCH


def node_rank(net: SubstrateNetwork, s: int) -> int:
    sw = net.switches[s]
    return sw.residual * sum(net.links[link_key(s, nb)].residual for nb in net.adjacency[s])


def greedy_node_map(net: SubstrateNetwork, req: VirtualNetworkRequest) -> dict[int, int]:
    """Map virtual nodes one by one onto the highest-ranked free switch.

    Nodes go in descending rule demand (ascending id on ties); the rank of a
    switch is residual memory times the residual bandwidth of its links.
    Raises :class:`NodeUnmappable` for the first node that fits nowhere.
    """
    ranked = sorted(net.switches, key=lambda s: (-node_rank(net, s), s))
    used: set[int] = set()
    mapping: dict[int, int] = {}
    for vn in sorted(req.nodes, key=lambda n: (-n.rule_demand, n.id)):
        for s in ranked:
            if s not in used and net.switches[s].residual >= vn.rule_demand:
                mapping[vn.id] = s
                used.add(s)
                break
        else:
            raise NodeUnmappable(vn.id)
    return mapping


def _hop_distances(net, target, link_ok) -> dict[int, int]:
    dist = {target: 0}
    queue = deque([target])
    while queue:
        x = queue.popleft()
        for nb in net.adjacency[x]:
            if nb not in dist and link_ok(link_key(x, nb)):
                dist[nb] = dist[x] + 1
                queue.append(nb)
    return dist


def _shortest_path(net, src, dst, link_ok, switch_ok=None) -> Path | None:
    """Min-hop path over admissible elements, lexicographically smallest on ties."""
    if switch_ok is not None:
        if not (switch_ok(src) and switch_ok(dst)):
            return None
        base = link_ok

        def link_ok(k):
            return base(k) and switch_ok(k[0]) and switch_ok(k[1])

    dist = _hop_distances(net, dst, link_ok)
    if src not in dist:
        return None
    path = [src]
    x = src
    while x != dst:
        # neighbours are sorted, so the first one on a shortest path is the smallest
        x = next(nb for nb in net.adjacency[x]
                 if dist.get(nb) == dist[x] - 1 and link_ok(link_key(x, nb)))
        path.append(x)
    return tuple(path)


def find_unsplittable_path(net: SubstrateNetwork, src: int, dst: int, demand: int,
                           reserved: Reservation | None = None) -> Path:
    """Fewest-hop path whose every link has residual bandwidth >= ``demand``.

    With ``reserved`` the tentative debits of a request under construction are
    honoured and each path switch must also have room for one more rule.
    Raises :class:`NoFeasiblePath`.
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    if demand < 1:
        raise ValueError("demand must be >= 1")
    if reserved is None:
        path = _shortest_path(net, src, dst, lambda k: net.links[k].residual >= demand)
    else:
        path = _shortest_path(net, src, dst,
                              lambda k: reserved.link_residual(k) >= demand,
                              lambda s: reserved.switch_residual(s) >= RULES_PER_SWITCH)
    if path is None:
        raise NoFeasiblePath(f"no path {src}->{dst} with {demand} units free")
    return path


def _widest_bottleneck(net, src, dst, link_residual, switch_ok) -> int:
    levels = sorted({link_residual(k) for k in net.links if link_residual(k) > 0}, reverse=True)
    for level in levels:
        if _shortest_path(net, src, dst, lambda k: link_residual(k) >= level, switch_ok):
            return level
    return 0


def find_split_paths(net: SubstrateNetwork, src: int, dst: int, demand: int, k_max: int = 2,
                     reserved: Reservation | None = None) -> tuple[PathShare, ...]:
    """Greedy decomposition of ``demand`` over at most ``k_max`` paths.

    Each round picks the path that can take the largest share of what is
    left (fewest hops, then smallest id sequence, among equals) and routes
    that share over it.  Raises :class:`InsufficientAggregateBandwidth`.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if src == dst or demand < 1:
        raise ValueError("need src != dst and demand >= 1")
    local = Reservation(net)
    if reserved is not None:
        local.bw.update(reserved.bw)
        local.mem.update(reserved.mem)
        switch_ok = lambda s: local.switch_residual(s) >= RULES_PER_SWITCH  # noqa: E731
    else:
        switch_ok = None
    shares: list[PathShare] = []
    remaining = demand
    while remaining > 0 and len(shares) < k_max:
        width = _widest_bottleneck(net, src, dst, local.link_residual, switch_ok)
        if width == 0:
            break
        amount = min(remaining, width)
        path = _shortest_path(net, src, dst, lambda k: local.link_residual(k) >= amount, switch_ok)
        share = PathShare(path, amount)
        shares.append(share)
        local.add([share])
        remaining -= amount
    if remaining > 0:
        raise InsufficientAggregateBandwidth(
            f"{demand} units {src}->{dst} do not fit on {k_max} paths")
    return tuple(shares)


def embed_request(net: SubstrateNetwork, req: VirtualNetworkRequest, variant: str = UNSPLITTABLE,
                  k_max: int = 2, now: int = 0) -> Embedding:
    """Map ``req`` and reserve all of its resources in one atomic step.

    Raises a :class:`Rejected` subclass and leaves ``net`` untouched when
    the request does not fit.
    """
    node_map = greedy_node_map(net, req)
    reserved = Reservation(net)
    for vn in req.nodes:
        reserved.mem[node_map[vn.id]] += vn.rule_demand

    link_map: dict[int, tuple[PathShare, ...]] = {}
    for vl in sorted(req.links, key=lambda l: (-l.bandwidth_demand, l.id)):
        src, dst = node_map[vl.u], node_map[vl.v]
        try:
            if variant == SPLITTABLE:
                shares = find_split_paths(net, src, dst, vl.bandwidth_demand, k_max, reserved)
            else:
                shares = (PathShare(find_unsplittable_path(net, src, dst, vl.bandwidth_demand,
                                                           reserved), vl.bandwidth_demand),)
        except Rejected as exc:
            raise LinkUnmappable(vl.id, str(exc)) from exc
        reserved.add(shares)
        link_map[vl.id] = shares

    node_alloc = Allocation(req.id, switch_debits=tuple(
        (node_map[vn.id], vn.rule_demand) for vn in req.nodes))
    link_allocs = {lid: link_allocation(req.id, shares) for lid, shares in link_map.items()}
    try:
        net.allocate(node_alloc, *link_allocs.values())
    except InsufficientResources as exc:
        raise LinkUnmappable(None, f"allocation failed: {exc}") from exc
    return Embedding(req, node_map, link_map, node_alloc, link_allocs, variant, mapped_at=now)


def tear_down(net: SubstrateNetwork, emb: Embedding) -> None:
    if not emb.live:
        raise EmbeddingStateError(f"embedding of request {emb.request_id} already torn down")
    net.release(*emb.allocations())
    emb.live = False


def reroute_link(net: SubstrateNetwork, emb: Embedding, link_id: int,
                 new_shares: tuple[PathShare, ...]) -> Allocation:
    """Swap one virtual link onto ``new_shares``; the old path is restored on failure."""
    old = emb.link_allocations[link_id]
    new = link_allocation(emb.request_id, new_shares)
    net.release(old)
    try:
        net.allocate(new)
    except InsufficientResources:
        net.allocate(old)
        raise
    emb.link_allocations[link_id] = new
    emb.link_map[link_id] = new_shares
    return new
