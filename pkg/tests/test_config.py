import pytest

from network.config import NetworkConfig
from utils.config import env_jobs, load_environment, load_run_config, parse_run_config
from utils.errors import ConfigError


def test_defaults():
    config = load_run_config()
    assert config.preset == "densenet121"
    assert config.network == NetworkConfig()
    assert config.train.lr_max == 2e-4
    assert config.loss.ce_mode == "binary"


def test_parse_values_by_type():
    config = parse_run_config({
        "preset": "tiny",
        "VARIANT": "M1",
        "decoder_widths": "32, 32, 16, 16, 8",
        "freeze_bn_stats": "no",
        "epochs": "3",
        "lr_max": "1e-3",
        "ce_mode": "verbatim",
    })
    assert config.preset == "tiny"
    assert config.network.variant == "M1"
    assert config.network.decoder_widths == (32, 32, 16, 16, 8)
    assert config.network.growth_rate == 8
    assert config.network.freeze_bn_stats is False
    assert config.train.epochs == 3
    assert config.train.lr_max == 1e-3
    assert config.loss.ce_mode == "verbatim"


def test_all_problems_are_reported():
    with pytest.raises(ConfigError) as info:
        parse_run_config({"colour": "blue", "epochs": "many", "lr_min": "1", "freeze_encoder": "maybe"})
    keys = {problem.split(":")[0] for problem in info.value.problems}
    assert keys == {"colour", "epochs", "lr_min", "freeze_encoder"}
    assert "colour: unknown key" in info.value.problems


def test_unknown_preset():
    with pytest.raises(ConfigError, match="preset"):
        parse_run_config({"preset": "resnet"})


def test_load_config_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("# маленькая сеть\npreset=tiny\nvariant=M2\nepochs=2\nbatch_size=4\n", encoding="utf-8")
    config = load_run_config(path)
    assert config.source == str(path)
    assert config.network == NetworkConfig.tiny("M2")
    assert config.train.batch_size == 4
    assert config.to_dict()["train"]["epochs"] == 2

    with pytest.raises(FileNotFoundError):
        load_run_config(tmp_path / "absent.env")


def test_train_overrides():
    config = load_run_config()
    assert config.with_train_overrides(seed=None) is config
    changed = config.with_train_overrides(seed=9, jobs=2)
    assert changed.train.seed == 9 and changed.train.jobs == 2
    with pytest.raises(ConfigError, match="jobs"):
        config.with_train_overrides(jobs=0)


def test_environment(tmp_path, monkeypatch):
    monkeypatch.delenv("BRAINSEG_JOBS", raising=False)
    env_file = tmp_path / ".env"
    env_file.write_text("BRAINSEG_JOBS=3\n", encoding="utf-8")
    values = load_environment(env_file)
    assert values["BRAINSEG_JOBS"] == "3"
    assert env_jobs() == 3
    monkeypatch.setenv("BRAINSEG_JOBS", "lots")
    assert env_jobs(default=1) == 1
    monkeypatch.delenv("BRAINSEG_JOBS")
