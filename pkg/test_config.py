import os

import pytest

from modules.config import apply_overrides, config_hash, load_config
from modules.schema import ConfigError
from modules.teacher import NoiseConfig, PromptMode

CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.toml")


def test_defaults_without_file():
    config = load_config()
    assert config.distill_pool_size == 40000
    assert config.teacher.kind == "mock"
    assert config.training.threshold == 0.5
    assert config.evaluation.bench_sizes == [1, 2, 4, 8, 16]


def test_load_shipped_config():
    config = load_config(CONFIG)
    assert config.seed == 1
    assert config.teacher.mode is PromptMode.FEW_SHOT_5
    assert config.model.d_model == 64
    assert config.teacher.noise_few.drop_rate == 0.1


def test_overrides_are_json_or_strings():
    config = load_config(CONFIG, ["training.epochs=5", "evaluation.curve_sizes=[1, 2]", "paths.out=/tmp/run",
                                  "teacher.mode=zero", "synth.quiet_rate=0.5"])
    assert config.training.epochs == 5
    assert config.evaluation.curve_sizes == [1, 2]
    assert config.paths.out == "/tmp/run"
    assert config.teacher.mode is PromptMode.ZERO_SHOT
    assert config.synth.quiet_rate == 0.5


def test_apply_overrides_builds_sections():
    data = apply_overrides({}, ["a.b.c=1", "x=true"])
    assert data == {"a": {"b": {"c": 1}}, "x": True}


@pytest.mark.parametrize("override", ["noequals", "=3", "seed.inner=1"])
def test_malformed_overrides(override):
    with pytest.raises(ConfigError):
        load_config(None, [override])


def test_invalid_values_and_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(None, ["training.epochs=0"])
    with pytest.raises(ConfigError):
        load_config(None, ["model.d_model=10", "model.n_heads=4"])
    with pytest.raises(ConfigError):
        load_config(None, ["evaluation.bench_sizes=[]"])
    with pytest.raises(ConfigError):
        load_config(None, ["evaluation.bench_sizes=[0, 2]"])
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.toml"))
    broken = tmp_path / "broken.toml"
    broken.write_text("[paths\nout = 1", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(broken))


def test_config_hash():
    a = load_config(CONFIG)
    assert config_hash(a) == config_hash(load_config(CONFIG))
    assert config_hash(a) != config_hash(load_config(CONFIG, ["seed=2"]))


def test_noise_per_mode():
    teacher = load_config(CONFIG).teacher
    assert teacher.noise_for(PromptMode.ZERO_SHOT).drop_rate == 0.2
    assert teacher.noise_for("few").spurious_rate == 0.05
    explicit = teacher.model_copy(update={"noise": NoiseConfig(drop_rate=0.3)})
    assert explicit.noise_for(PromptMode.ZERO_SHOT).drop_rate == 0.3
