from pathlib import Path

import pytest

from earlywarn.config import ConfigError, PipelineConfig, load_config, stage_rng, stage_seed


def test_defaults_and_roundtrip(tmp_path):
    cfg = PipelineConfig()
    assert cfg.features.threshold == 0.45
    assert cfg.data.window_samples == 30
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    assert load_config(None) == cfg


def test_yaml_and_json(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("gdcpd: {k: 2, window: 4}\nseeds: {root: 9}\n")
    cfg = load_config(y)
    assert (cfg.gdcpd.k, cfg.gdcpd.window, cfg.seeds.root) == (2, 4, 9)
    j = tmp_path / "c.json"
    j.write_text('{"features": {"threshold": 0.3}}')
    assert load_config(j).features.threshold == 0.3


@pytest.mark.parametrize("d", [
    {"extra": {}},
    {"gdcpd": {"bogus": 1}},
    {"data": {"split": [0.5, 0.5, 0.5]}},
    {"gdcpd": {"k": 0}},
    {"rul": {"dropout": 1.0}},
    {"features": {"threshold": -1}},
    {"monitor": [1, 2]},
])
def test_invalid_configs_rejected(d):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(d)


def test_shipped_config_loads():
    cfg = load_config(Path(__file__).parents[1] / "configs" / "synthetic.yaml")
    assert cfg.features.threshold == 0.45 and cfg.monitor.window == 3


def test_overrides():
    cfg = PipelineConfig().with_overrides(seed=5, window=7, k=2, threshold=0.6)
    assert (cfg.seeds.root, cfg.gdcpd.window, cfg.monitor.window, cfg.gdcpd.k,
            cfg.features.threshold) == (5, 7, 7, 2, 0.6)
    assert PipelineConfig().with_overrides() == PipelineConfig()


def test_stage_streams_are_independent_and_reproducible():
    assert stage_seed(0, "a") == stage_seed(0, "a")
    assert stage_seed(0, "a") != stage_seed(0, "b")
    assert stage_seed(0, "a") != stage_seed(1, "a")
    assert stage_rng(3, "x").random() == stage_rng(3, "x").random()
