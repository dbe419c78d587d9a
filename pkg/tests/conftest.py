import pytest

from sdnmap.embedder import Embedding, PathShare, link_allocation
from sdnmap.substrate import Allocation, SubstrateLink, SubstrateNetwork, SubstrateSwitch
from sdnmap.workload import VirtualLink, VirtualNetworkRequest, VirtualNode

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def make_net(edges, memory=200):
    """edges: [(u, v, bandwidth)]; memory: int or {switch: capacity}."""
    ids = sorted({u for u, _, _ in edges} | {v for _, v, _ in edges})
    mem = memory if isinstance(memory, dict) else {s: memory for s in ids}
    return SubstrateNetwork([SubstrateSwitch(s, mem[s]) for s in ids],
                            [SubstrateLink(u, v, c) for u, v, c in edges])


def make_request(rid, n_nodes, links, arrival=0, lifetime=100, rule_demand=1):
    """links: [(u, v, bandwidth)] over virtual nodes 0..n_nodes-1."""
    return VirtualNetworkRequest(
        rid,
        tuple(VirtualNode(i, rule_demand) for i in range(n_nodes)),
        tuple(VirtualLink(i, u, v, bw) for i, (u, v, bw) in enumerate(links)),
        arrival,
        lifetime,
    )


def place(net, req, node_map, paths, allocate=True):
    """Hand-built embedding: ``paths[i]`` carries virtual link i unsplit."""
    link_map = {vl.id: (PathShare(tuple(paths[vl.id]), vl.bandwidth_demand),) for vl in req.links}
    node_alloc = Allocation(req.id, switch_debits=tuple(
        (node_map[n.id], n.rule_demand) for n in req.nodes))
    link_allocs = {lid: link_allocation(req.id, shares) for lid, shares in link_map.items()}
    if allocate:
        net.allocate(node_alloc, *link_allocs.values())
    return Embedding(req, dict(node_map), link_map, node_alloc, link_allocs)


@pytest.fixture
def line3():
    # 0 - 1 - 2
    return make_net([(0, 1, 250), (1, 2, 250)])


@pytest.fixture
def square():
    # two disjoint 2-hop routes 0-1-3 (100 units) and 0-2-3 (50 units)
    return make_net([(0, 1, 100), (1, 3, 100), (0, 2, 50), (2, 3, 50)])
