"""Experiment driver: single runs and cross-product sweeps, written as CSV."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import os
import statistics
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import canonical_key, read_config, set_key, to_sim_config
from .metrics import CSV_COLUMNS, RunSummary
from .simulator import ConfigError, Simulation

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

METRIC_COLUMNS = CSV_COLUMNS[3:]
AGGREGATE_COLUMNS = ("point", "strategy", "n", "checkpoint", "seed_count") + tuple(
    c for m in METRIC_COLUMNS for c in (m, f"{m}_stddev"))


@dataclass
class SweepSpec:
    base: Path | None
    axes: list[tuple[str, list[str]]] = field(default_factory=list)
    out: Path | None = None

    def points(self) -> list[dict[str, str]]:
        keys = [k for k, _ in self.axes]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in self.axes))]


def load_sweep(path: str | Path) -> SweepSpec:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    here = Path(path).parent
    base = cp.get("sweep", "base", fallback="").strip()
    out = cp.get("sweep", "out", fallback="").strip()
    axes = []
    if cp.has_section("axes"):
        for key, raw in cp.items("axes"):
            values = [v.strip() for v in raw.split(",") if v.strip()]
            if not values:
                raise ConfigError(f"axis {key!r} has no values")
            axes.append((key, values))
    return SweepSpec(here / base if base else None, axes, here / out if out else None)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(summary: RunSummary, path: str | Path) -> None:
    write_atomic(Path(path), summary.csv())


def _run_point(task):
    cp_text, stem = task
    cp = configparser.ConfigParser()
    cp.read_string(cp_text)
    sim = Simulation(to_sim_config(cp))
    return stem, sim.run()


def _stem(point: dict[str, str]) -> str:
    if not point:
        return "run"
    parts = [f"{k}={v}" for k, v in point.items()]
    return "__".join(parts).replace("/", "_").replace(" ", "_")


def _parse_rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def aggregate(runs: list[tuple[dict[str, str], RunSummary]]) -> str:
    """Mean and population stddev over seeds, per non-seed point and checkpoint."""
    groups: dict[str, list[RunSummary]] = {}
    for point, summary in runs:
        label = ";".join(f"{k}={v}" for k, v in point.items() if canonical_key(k) != "run.seed")
        groups.setdefault(label, []).append(summary)

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for label, summaries in groups.items():
        per_run = [_parse_rows(s.csv()) for s in summaries]
        for i in range(min(len(rows) for rows in per_run)):
            first = per_run[0][i]
            row = [label, first["strategy"], first["n"], i + 1, len(per_run)]
            for m in METRIC_COLUMNS:
                values = [float(rows[i][m]) for rows in per_run]
                row += [f"{statistics.fmean(values):.6f}", f"{statistics.pstdev(values):.6f}"]
            writer.writerow(row)
    return out.getvalue()


def run_experiment_sweep(sweep: SweepSpec, overrides: dict[str, str], out_dir: Path,
                         jobs: int = 1, stream=None) -> list[tuple[dict, RunSummary]]:
    base = read_config(sweep.base)
    for key, value in overrides.items():
        set_key(base, key, value)
    points = sweep.points()
    tasks = []
    for point in points:
        cp = configparser.ConfigParser()
        cp.read_dict(base)
        for key, value in point.items():
            set_key(cp, key, value)
        to_sim_config(cp)  # validate every point before anything runs
        text = io.StringIO()
        cp.write(text)
        tasks.append((text.getvalue(), _stem(point)))
    print(f"sweep: {len(tasks)} run(s) -> {out_dir}", file=sys.stderr)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]

    runs = []
    for point, (stem, summary) in zip(points, results):
        _write_run(out_dir, stem, summary)
        runs.append((point, summary))
    if sweep.axes:
        write_atomic(out_dir / "aggregate.csv", aggregate(runs))
    print_table(runs, stream)
    return runs


def _write_run(out_dir: Path, stem: str, summary: RunSummary) -> None:
    emit_csv(summary, out_dir / f"{stem}.csv")
    if summary.trace:
        write_atomic(out_dir / f"{stem}.trace.log", "\n".join(summary.trace) + "\n")
    if summary.weights:
        write_atomic(out_dir / f"{stem}.weights.csv",
                     "time,request,link,R,A,W\n" + "\n".join(summary.weights) + "\n")


def print_table(runs, stream=None) -> None:
    stream = stream or sys.stdout
    header = f"{'run':<48} {'accept':>8} {'cost':>9} {'latency':>9} {'writes':>8} {'remaps':>7}"
    print(header, file=stream)
    for point, s in runs:
        name = _stem(point) if point else f"{s.strategy}_n{s.n}_seed{s.seed}"
        print(f"{name:<48} {s.acceptance_rate:>8.4f} {s.cost:>9.3f} {s.mean_latency:>9.3f} "
              f"{s.write_transactions:>8d} {s.remap_count:>7d}", file=stream)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdnmap", description=__doc__)
    p.add_argument("--config", type=Path, help="INI config (defaults are used for missing keys)")
    p.add_argument("--sweep", type=Path, help="INI sweep spec with [sweep] and [axes] sections")
    p.add_argument("--out", type=Path, help="output directory (default: results)")
    p.add_argument("--seed", type=int)
    p.add_argument("--strategy", choices=("proposed", "sdnvn", "sspsm"))
    p.add_argument("--requests", type=int, help="number of virtual network requests")
    p.add_argument("--batch-n", type=int, help="batch size n for the proposed strategy")
    p.add_argument("--trace", action="store_true", help="write an event trace per run")
    p.add_argument("--weights-dump", action="store_true", help="write link weight tables per run")
    p.add_argument("--check", action="store_true", help="verify invariants after every event")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs in a sweep")
    p.add_argument("--print-default-config", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.print_default_config:
        from .config import default_config_text
        sys.stdout.write(default_config_text())
        return EXIT_OK

    overrides = {}
    for key, value in (("run.seed", args.seed), ("strategy.name", args.strategy),
                       ("workload.count", args.requests), ("strategy.n", args.batch_n)):
        if value is not None:
            overrides[key] = str(value)
    if args.trace:
        overrides["run.trace"] = "true"
    if args.weights_dump:
        overrides["run.weights_dump"] = "true"
    if args.check:
        overrides["run.check_invariants"] = "true"

    try:
        if args.sweep:
            sweep = load_sweep(args.sweep)
            if args.config:
                sweep.base = args.config
            out = args.out or sweep.out or Path("results")
            run_experiment_sweep(sweep, overrides, out, args.jobs)
        else:
            cp = read_config(args.config)
            for key, value in overrides.items():
                set_key(cp, key, value)
            summary = Simulation(to_sim_config(cp)).run()
            stem = f"{summary.strategy}_n{summary.n}_seed{summary.seed}"
            _write_run(args.out or Path("results"), stem, summary)
            print_table([({}, summary)])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
