"""INI configuration files: load, override, and convert to :class:`SimConfig`."""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

from .simulator import ConfigError, SimConfig, Strategy
from .substrate import TopologySpec, load_topology
from .workload import WorkloadSpec

ALIASES = {
    "strategy": "strategy.name",
    "n": "strategy.n",
    "batch_n": "strategy.n",
    "count": "workload.count",
    "requests": "workload.count",
    "seed": "run.seed",
    "nodes": "topology.nodes",
    "switches": "topology.nodes",
}


def default_config_text() -> str:
    return resources.files("sdnmap").joinpath("default.ini").read_text()


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=None)
    cp.read_string(default_config_text())
    return cp


def read_config(path: str | Path | None = None) -> configparser.ConfigParser:
    """Defaults overlaid with ``path``; unknown sections or keys are errors."""
    cp = _parser()
    if path is None:
        return cp
    user = configparser.ConfigParser()
    try:
        with open(path) as fh:
            user.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base_dir = Path(path).parent
    for section in user.sections():
        for key, value in user.items(section, raw=True):
            if key == "file" and value.strip():
                value = str((base_dir / value.strip()).resolve())
            set_key(cp, f"{section}.{key}", value)
    return cp


def canonical_key(key: str) -> str:
    key = ALIASES.get(key, key)
    if "." not in key:
        raise ConfigError(f"config key {key!r} must look like section.key")
    return key


def set_key(cp: configparser.ConfigParser, key: str, value) -> None:
    section, name = canonical_key(key).split(".", 1)
    if not cp.has_section(section) or not cp.has_option(section, name):
        raise ConfigError(f"unknown config key {section}.{name}")
    cp.set(section, name, str(value))


def _opt_int(raw: str) -> int | None:
    raw = raw.strip().lower()
    return None if raw in ("", "none", "auto", "off") else int(raw)


def _parse_edges(raw: str) -> list[tuple[int, int, int]]:
    edges = []
    for chunk in filter(None, (c.strip() for c in raw.split(";"))):
        u, v, cap = (int(x) for x in chunk.split())
        edges.append((u, v, cap))
    return edges


def _parse_memory(raw: str) -> dict[int, int]:
    memory = {}
    for chunk in filter(None, (c.strip() for c in raw.split(";"))):
        s, m = chunk.split(":")
        memory[int(s)] = int(m)
    return memory


def to_sim_config(cp: configparser.ConfigParser) -> SimConfig:
    try:
        t, w, s, r = cp["topology"], cp["workload"], cp["strategy"], cp["run"]
        if t.get("file", "").strip():
            net = load_topology(t["file"].strip())
            topology = TopologySpec(
                generator="explicit",
                edges=[(k[0], k[1], l.bandwidth_capacity) for k, l in sorted(net.links.items())],
                memory={sid: sw.memory_capacity for sid, sw in net.switches.items()},
            )
        else:
            topology = TopologySpec(
                generator=t["generator"].strip(),
                nodes=t.getint("nodes"),
                capacity_min=t.getint("capacity_min"),
                capacity_max=t.getint("capacity_max"),
                waxman_alpha=t.getfloat("waxman_alpha"),
                waxman_beta=t.getfloat("waxman_beta"),
                edges=_parse_edges(t.get("edges", "")) or None,
                memory=_parse_memory(t.get("memory", "")) or None,
            )
        workload = WorkloadSpec(
            count=w.getint("count"),
            arrival_rate=w.getfloat("arrival_rate"),
            mean_lifetime=w.getfloat("mean_lifetime"),
            min_nodes=w.getint("min_nodes"),
            max_nodes=w.getint("max_nodes"),
            link_probability=w.getfloat("link_probability"),
            bandwidth_min=w.getint("bandwidth_min"),
            bandwidth_max=w.getint("bandwidth_max"),
            rule_demand_min=w.getint("rule_demand_min"),
            rule_demand_max=w.getint("rule_demand_max"),
        )
        config = SimConfig(
            topology=topology,
            workload=workload,
            strategy=Strategy(s["name"].strip(), s.getint("n")),
            seed=r.getint("seed"),
            remap_budget=_opt_int(s["remap_budget"]),
            batch_timeout=_opt_int(s["batch_timeout"]),
            t_write=r.getfloat("t_write"),
            checkpoint_every=r.getint("checkpoint_every"),
            k_max=s.getint("k_max"),
            sspsm_window=s.getint("sspsm_window"),
            sspsm_migration=s.getboolean("sspsm_migration"),
            check_invariants=r.getboolean("check_invariants"),
            trace=r.getboolean("trace"),
            weights_dump=r.getboolean("weights_dump"),
            workload_file=w.get("file", "").strip() or None,
        )
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    config.validate()
    return config


def load_config(path: str | Path | None = None, **overrides) -> SimConfig:
    cp = read_config(path)
    for key, value in overrides.items():
        set_key(cp, key, value)
    return to_sim_config(cp)
