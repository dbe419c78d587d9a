"""Run metrics: acceptance, utilization, cost, provisioning latency."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .controller import WriteTransaction
from .substrate import SubstrateNetwork

CSV_COLUMNS = ("strategy", "n", "seed", "arrived", "accepted", "acceptance_rate",
               "link_util", "switch_util", "cost", "latency", "write_txns")


def acceptance_rate(accepted: int, arrived: int) -> float:
    if accepted < 0 or accepted > arrived:
        raise ValueError(f"need 0 <= accepted <= arrived, got {accepted}/{arrived}")
    return 1.0 if arrived == 0 else accepted / arrived


def snapshot_utilization(net: SubstrateNetwork) -> tuple[float, float]:
    links = net.links.values()
    switches = net.switches.values()
    link_frac = sum(l.bandwidth_allocated / l.bandwidth_capacity for l in links) / len(links) if links else 0.0
    switch_frac = sum(s.memory_used / s.memory_capacity for s in switches) / len(switches) if switches else 0.0
    return link_frac, switch_frac


def compute_cost(cumulative_R: int, mapping_count: int) -> float:
    """Average used resources per mapping event; remaps count as mappings."""
    return 0.0 if mapping_count == 0 else cumulative_R / mapping_count


def per_request_latency(transactions: Iterable[WriteTransaction], waits: Mapping[int, int],
                        t_write: float = 1.0) -> dict[int, float]:
    """Batch wait plus ``t_write`` for each flushed transaction carrying the request's rules."""
    txns = list(transactions)
    return {rid: wait + t_write * sum(1 for t in txns if t.touches_request(rid))
            for rid, wait in waits.items()}


def compute_latency(transactions: Iterable[WriteTransaction], waits: Mapping[int, int],
                    t_write: float = 1.0) -> float:
    values = per_request_latency(transactions, waits, t_write)
    return sum(values.values()) / len(values) if values else 0.0


@dataclass(frozen=True)
class MetricsSnapshot:
    time: int
    arrived_count: int
    accepted_count: int
    avg_link_utilization: float
    avg_switch_utilization: float
    cumulative_R: int
    mapping_count: int
    write_transaction_count: int
    latency_accumulator: float
    latency_samples: int

    @property
    def acceptance_rate(self) -> float:
        return acceptance_rate(self.accepted_count, self.arrived_count)

    @property
    def cost(self) -> float:
        return compute_cost(self.cumulative_R, self.mapping_count)

    @property
    def mean_latency(self) -> float:
        return self.latency_accumulator / self.latency_samples if self.latency_samples else 0.0


@dataclass
class RunSummary:
    strategy: str
    n: int
    seed: int
    series: list[MetricsSnapshot]
    acceptance_rate: float
    cost: float
    mean_latency: float
    write_transactions: int
    remap_count: int
    arrived: int
    accepted: int
    trace: list[str] = field(default_factory=list)
    weights: list[str] = field(default_factory=list)

    def csv(self) -> str:
        return summary_csv(self)


class MetricsRecorder:
    def __init__(self):
        self.arrived = 0
        self.accepted = 0
        self.cumulative_R = 0
        self.mapping_count = 0
        self.write_transactions = 0
        self.latency_accumulator = 0.0
        self.latency_samples = 0
        self.remap_count = 0
        self.series: list[MetricsSnapshot] = []

    def record_mapping(self, R: int) -> None:
        self.cumulative_R += R
        self.mapping_count += 1

    def record_transactions(self, txns: list[WriteTransaction]) -> None:
        self.write_transactions += len(txns)

    def record_flush(self, txns: list[WriteTransaction], waits: Mapping[int, int], t_write: float) -> None:
        for value in per_request_latency(txns, waits, t_write).values():
            self.latency_accumulator += value
            self.latency_samples += 1

    def snapshot(self, time: int, net: SubstrateNetwork) -> MetricsSnapshot:
        link_frac, switch_frac = snapshot_utilization(net)
        snap = MetricsSnapshot(time, self.arrived, self.accepted, link_frac, switch_frac,
                               self.cumulative_R, self.mapping_count, self.write_transactions,
                               self.latency_accumulator, self.latency_samples)
        if self.series and self.series[-1].time >= time:
            raise ValueError("checkpoint times must be strictly increasing")
        self.series.append(snap)
        return snap


def finalize_summary(recorder: MetricsRecorder, strategy: str, n: int, seed: int) -> RunSummary:
    return RunSummary(
        strategy=strategy,
        n=n,
        seed=seed,
        series=list(recorder.series),
        acceptance_rate=acceptance_rate(recorder.accepted, recorder.arrived),
        cost=compute_cost(recorder.cumulative_R, recorder.mapping_count),
        mean_latency=(recorder.latency_accumulator / recorder.latency_samples
                      if recorder.latency_samples else 0.0),
        write_transactions=recorder.write_transactions,
        remap_count=recorder.remap_count,
        arrived=recorder.arrived,
        accepted=recorder.accepted,
    )


def _row(summary: RunSummary, s: MetricsSnapshot) -> list[str]:
    return [summary.strategy, str(summary.n), str(summary.seed), str(s.arrived_count),
            str(s.accepted_count), f"{s.acceptance_rate:.6f}", f"{s.avg_link_utilization:.6f}",
            f"{s.avg_switch_utilization:.6f}", f"{s.cost:.6f}", f"{s.mean_latency:.6f}",
            str(s.write_transaction_count)]


def summary_csv(summary: RunSummary) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(_row(summary, snap) for snap in summary.series)
    return out.getvalue()
