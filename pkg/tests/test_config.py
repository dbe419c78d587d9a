import pytest

from sdnmap.config import load_config, read_config, set_key, to_sim_config
from sdnmap.simulator import ConfigError, SimConfig, Simulation
from sdnmap.substrate import TopologySpec, build_topology, save_topology


def test_defaults_match_dataclass_defaults():
    assert load_config() == SimConfig()


def test_aliases_and_overrides():
    cfg = load_config(strategy="sdnvn", count=42, seed=9)
    assert (cfg.strategy.name, cfg.workload.count, cfg.seed) == ("sdnvn", 42, 9)


def test_auto_and_none_values(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[strategy]\nremap_budget = 3\nbatch_timeout = 40\n")
    cfg = load_config(path)
    assert (cfg.remap_budget, cfg.batch_timeout) == (3, 40)
    assert load_config().remap_budget is None


def test_unknown_key_rejected():
    cp = read_config()
    with pytest.raises(ConfigError):
        set_key(cp, "strategy.colour", "red")
    with pytest.raises(ConfigError):
        set_key(cp, "colour", "red")


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        load_config(**{"workload.count": "many"})
    with pytest.raises(ConfigError):
        load_config(**{"run.checkpoint_every": "0"})


def test_explicit_edges_and_memory():
    cfg = load_config(**{"topology.generator": "explicit", "topology.edges": "0 1 250; 1 2 120",
                         "topology.memory": "0:120; 1:130; 2:140"})
    assert cfg.topology.edges == [(0, 1, 250), (1, 2, 120)]
    assert cfg.topology.memory == {0: 120, 1: 130, 2: 140}


def test_topology_file_relative_to_config(tmp_path):
    net = build_topology(TopologySpec(nodes=6), seed=3)
    save_topology(net, tmp_path / "sub.txt")
    (tmp_path / "c.ini").write_text("[topology]\nfile = sub.txt\n[workload]\ncount = 20\n")
    cfg = load_config(tmp_path / "c.ini")
    built = Simulation(cfg).net
    assert {k: l.bandwidth_capacity for k, l in built.links.items()} == \
        {k: l.bandwidth_capacity for k, l in net.links.items()}


def test_to_sim_config_validates():
    cp = read_config()
    cp.set("topology", "nodes", "1")
    with pytest.raises(ConfigError):
        to_sim_config(cp)
