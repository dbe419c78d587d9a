"""Per-virtual-link resource weights used to order remapping candidates.

For a virtual link routed over one or more substrate paths:

    used (R)        bandwidth routed on each path link + rules held on each path switch
    unallocated (A) residual bandwidth of each path link + residual memory of each path switch
    weight (W)      R - A

Split mappings sum over every member path.  All values are integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .embedder import RULES_PER_SWITCH, Embedding, PathShare
from .substrate import SubstrateNetwork, link_key


class UnmappedLinkError(LookupError):
    pass


@dataclass(frozen=True)
class LinkWeightRecord:
    request_id: int
    link_id: int
    R: int
    A: int
    W: int


def _shares(fragment) -> tuple[PathShare, ...]:
    if not fragment:
        raise UnmappedLinkError("virtual link is not mapped")
    return tuple(fragment)


def compute_R(net: SubstrateNetwork, fragment: Iterable[PathShare]) -> int:
    total = 0
    for ps in _shares(fragment):
        total += ps.share * ps.hops + RULES_PER_SWITCH * len(ps.path)
    return total


def compute_A(net: SubstrateNetwork, fragment: Iterable[PathShare]) -> int:
    total = 0
    links, switches = net.links, net.switches
    for ps in _shares(fragment):
        p = ps.path
        for a, b in zip(p, p[1:]):
            total += links[link_key(a, b)].residual
        for s in p:
            total += switches[s].residual
    return total


def compute_W(R: int, A: int) -> int:
    return R - A


def link_record(net: SubstrateNetwork, emb: Embedding, link_id: int) -> LinkWeightRecord:
    try:
        fragment = emb.link_map[link_id]
    except KeyError:
        raise UnmappedLinkError(f"link {link_id} of request {emb.request_id}") from None
    R = compute_R(net, fragment)
    A = compute_A(net, fragment)
    return LinkWeightRecord(emb.request_id, link_id, R, A, compute_W(R, A))


def rank_mapped_links(net: SubstrateNetwork, embeddings: Iterable[Embedding]) -> list[LinkWeightRecord]:
    """One record per live virtual link, heaviest first.

    Ties go to the lower request id, then the lower link id.
    """
    records = [link_record(net, emb, lid)
               for emb in embeddings if emb.live
               for lid in emb.link_map]
    records.sort(key=lambda r: (-r.W, r.request_id, r.link_id))
    return records
