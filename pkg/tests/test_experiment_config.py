import json
from pathlib import Path

import pytest

from analysis.groups import GroupThresholds
from data.experiment_config import (
    DEFAULT_OUTPUT_ROOT,
    OUTPUT_ROOT_ENV,
    ExperimentConfig,
    ExperimentConfigManager,
    GroupingMode,
    load_experiment_config,
)
from utils.exceptions import ConfigurationError

CONFIG_DIR = Path(__file__).resolve().parents[1] / "config"


def write_config(tmp_path, payload) -> str:
    path = tmp_path / "config.json"
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return str(path)


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = ExperimentConfigManager(str(path)).config
    assert cfg.variant().name == cfg.loss.variant


def test_flagship_config_matches_protocol():
    cfg = load_experiment_config(str(CONFIG_DIR / "experiment_config.json"))
    assert (cfg.data.num_classes, cfg.data.input_dim, cfg.data.n_max, cfg.data.imbalance) == (10, 32, 500, 100.0)
    assert cfg.groups == GroupThresholds(many_min=100, few_max=20)
    assert cfg.sweep.seeds == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("sweep_*.json")), ids=lambda p: p.stem)
def test_sweeps_run_the_flagship_protocol(path):
    flagship = load_experiment_config(str(CONFIG_DIR / "experiment_config.json"))
    cfg = load_experiment_config(str(path))
    assert (cfg.data, cfg.network, cfg.train) == (flagship.data, flagship.network, flagship.train)


def test_missing_config_means_defaults():
    assert ExperimentConfigManager(None).config == ExperimentConfig()


def test_run_seed_drives_data_seed():
    assert ExperimentConfig(seed=5).data.seed == 5
    assert ExperimentConfig(seed=5, data={"seed": 99}).data.seed == 5
    assert ExperimentConfig().with_seed(7).data.seed == 7
    assert ExperimentConfig(seed=4).train_config().seed == 4


def test_config_hash_ignores_placement_only():
    base = ExperimentConfig()
    assert len(base.config_hash()) == 64
    assert base.config_hash() == ExperimentConfig().config_hash()
    moved = ExperimentConfig(run_label="other", output_dir="/tmp/elsewhere")
    assert moved.config_hash() == base.config_hash()
    assert ExperimentConfigManager(None).apply_overrides(threads=4).config_hash() == base.config_hash()
    assert base.with_seed(1).config_hash() != base.config_hash()
    assert base.with_loss(k=0.2).config_hash() != base.config_hash()


def test_deferred_reweighting_epoch():
    cfg = ExperimentConfig(loss={"variant": "ldam-drw"})
    assert cfg.train_config().drw_epoch == 48
    explicit = ExperimentConfig(loss={"variant": "ldam-drw"}, train={"drw_epoch": 10})
    assert explicit.train_config().drw_epoch == 10
    assert ExperimentConfig().train_config().drw_epoch is None


def test_train_config_carries_resolved_objective():
    cfg = ExperimentConfig(loss={"variant": "dbm-cb", "k": 0.2, "beta": 0.99})
    spec = cfg.train_config().loss
    assert spec.margin.k == 0.2
    assert spec.beta == 0.99


def test_tercile_grouping():
    cfg = ExperimentConfig(grouping=GroupingMode.TERCILE)
    counts = [300, 200, 100, 50, 20, 10, 5]
    assert cfg.thresholds(counts) == GroupThresholds.from_terciles(counts)
    assert ExperimentConfig().thresholds(counts) == GroupThresholds()


def test_output_dir_resolution(monkeypatch, tmp_path):
    monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)
    cfg = ExperimentConfig(run_label="exp")
    assert cfg.resolve_output_dir() == Path(DEFAULT_OUTPUT_ROOT) / "exp"
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert cfg.resolve_output_dir() == tmp_path / "exp"
    assert ExperimentConfig(output_dir="fixed").resolve_output_dir() == Path("fixed")
    assert cfg.resolve_output_dir("cli") == Path("cli")


def test_overrides():
    cfg = ExperimentConfigManager(None).apply_overrides(seed=3, threads=4)
    assert cfg.seed == 3
    assert cfg.data.seed == 3
    assert cfg.analysis.threads == 4
    assert cfg.sweep.workers == 4


@pytest.mark.parametrize("payload", [
    "{not json",
    "[1, 2]",
    {"loss": {"variant": "focal"}},
    {"data": {"imbalance": 0.5}},
    {"groups": {"many_min": 10, "few_max": 50}},
    {"train": {"epochs": 3, "warmup_epochs": 5}},
    {"sweep": {"seeds": []}},
    {"sweep": {"variants": ["nope"]}},
    {"dataset": {"train": "only-train.bin"}},
    {"unknown_section": {}},
])
def test_invalid_configs_raise_configuration_error(tmp_path, payload):
    with pytest.raises(ConfigurationError):
        ExperimentConfigManager(write_config(tmp_path, payload))


def test_missing_file_raises_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        ExperimentConfigManager(str(tmp_path / "absent.json"))
