"""Config defaults, INI round trip, aggregated validation errors."""

import pytest

from depthsr.train.config import ConfigError, TrainConfig, config_hash, load_config, write_config


def test_paper_scale_defaults():
    cfg = TrainConfig()
    assert cfg.stage_count == 5
    assert cfg.channels == 32
    assert cfg.step1_epochs == 100
    assert cfg.max_epochs == 200
    assert cfg.initial_lr == 1e-3
    assert cfg.lr_decay_factor == 0.1
    assert cfg.lr_decay_period == 50
    assert cfg.batch_size == 8
    assert (cfg.beta1, cfg.beta2, cfg.epsilon) == (0.9, 0.99, 1e-8)
    assert (cfg.weights.gamma, cfg.weights.lam) == (0.5, 0.2)
    assert (cfg.weights.rho1, cfg.weights.rho2) == (0.1, 0.1)


def test_toy_preset():
    cfg = TrainConfig.toy(seed=3)
    assert (cfg.stage_count, cfg.channels, cfg.scale) == (2, 16, 4)
    assert (cfg.step1_epochs, cfg.max_epochs, cfg.batch_size) == (30, 60, 16)
    assert cfg.seed == 3


def test_all_problems_reported_at_once():
    with pytest.raises(ConfigError) as err:
        TrainConfig(scale=3, batch_size=0, initial_lr=-1.0, step1_epochs=10, max_epochs=5)
    msg = str(err.value)
    assert "unsupported scale 3" in msg
    assert "batch_size" in msg
    assert "initial_lr" in msg
    assert "step1_epochs" in msg
    assert len(err.value.problems) == 4


def test_weight_validation_is_included():
    with pytest.raises(ConfigError, match="lam"):
        TrainConfig(weights={"lam": 2.0})


def test_ini_round_trip(tmp_path):
    cfg = TrainConfig.toy(seed=11)
    path = tmp_path / "train.ini"
    write_config(cfg, path)
    text = path.read_text()
    assert "[model]" in text and "[optim]" in text
    back = load_config(path)
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "train.ini"
    write_config(TrainConfig.toy(), path)
    cfg = load_config(path, overrides=[("seed", "42"), ("rho2", "0.0")])
    assert cfg.seed == 42
    assert cfg.weights.rho2 == 0.0
    assert config_hash(cfg) != config_hash(TrainConfig.toy())


def test_momentum_alias(tmp_path):
    path = tmp_path / "m.ini"
    path.write_text("[optim]\nmomentum = 0.8\n")
    cfg = load_config(path)
    assert cfg.beta1 == 0.8
    bad = tmp_path / "bad.ini"
    bad.write_text("[optim]\nmomentum = 0.8\nbeta1 = 0.9\n")
    with pytest.raises(ConfigError, match="alias"):
        load_config(bad)
    ok = tmp_path / "ok.ini"
    ok.write_text("[optim]\nmomentum = 0.9\nbeta1 = 0.9\n")
    assert load_config(ok).beta1 == 0.9


def test_unknown_and_malformed_keys_reported_together(tmp_path):
    path = tmp_path / "junk.ini"
    path.write_text("[train]\nbatch_size = soon\nwarp_speed = 9\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    msg = str(err.value)
    assert "batch_size" in msg and "warp_speed" in msg


def test_missing_file_reported():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/path.ini")
