import json
import math

import pytest

from drivecone.config import (EnvConfig, benchmark_config, check_benchmark, config_from_dict, load_config,
                              rule_violations, save_config)
from drivecone.dynamics import ActionGrid, ConfigError
from drivecone.sim import SimConfig
from drivecone.visibility import ViewConfig


def test_preset_matches_defaults():
    cfg = benchmark_config()
    assert cfg == EnvConfig()
    assert rule_violations(cfg) == []
    assert cfg.layout.dim == 5675
    assert cfg.view.view_angle == pytest.approx(math.radians(120))


def test_round_trip(tmp_path):
    path = tmp_path / "c.json"
    save_config(EnvConfig(), path)
    assert load_config(path) == EnvConfig()
    assert json.loads(path.read_text())["observation"]["dim"] == 5675


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"sim": {"warmup": 3}})
    with pytest.raises(ConfigError):
        config_from_dict({"physics": {}})


@pytest.mark.parametrize("cfg", [
    EnvConfig(view=ViewConfig(view_angle=math.pi)),
    EnvConfig(sim=SimConfig(max_heading_rate=None)),
    EnvConfig(sim=SimConfig(warmup_steps=5)),
    EnvConfig(sim=SimConfig(goal_pos_tol=2.0)),
])
def test_rule_violations_flagged(cfg):
    assert rule_violations(cfg)
    with pytest.raises(ConfigError):
        check_benchmark(cfg)


def test_allowed_changes():
    # bin counts and observation caps are free choices
    cfg = EnvConfig(actions=ActionGrid(accel_bins=3, steer_bins=11))
    assert rule_violations(cfg) == []
