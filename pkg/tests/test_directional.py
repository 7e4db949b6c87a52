"""
Directional checks on the flagship synthetic protocol (C=10, D_in=32,
rho=100, n_max=500) over five seeds. Slow; run with `pytest -m slow`.
"""

from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

import dbm_lab
from data.experiment_config import load_experiment_config

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2, 3, 4]
SLACK = 0.005
FLAGSHIP = Path(__file__).resolve().parents[1] / "config" / "experiment_config.json"


@lru_cache(maxsize=None)
def run(variant: str, seed: int, k: float = 0.1, tau: float = 1.0):
    cfg = load_experiment_config(str(FLAGSHIP)).with_loss(variant=variant, k=k, tau=tau).with_seed(seed)
    result = dbm_lab.run_training(cfg, write=False)
    report = dbm_lab.analyze(
        result.model, result.train_set, result.test_set, cfg.thresholds(result.train_set.class_counts)
    )
    return result.metrics, report, result.logs


def mean_of(values):
    return float(np.mean(values))


def test_dbm_bs_helps_the_few_group_without_hurting_overall():
    bs = [run("bs", s)[0] for s in SEEDS]
    dbm = [run("dbm-bs", s)[0] for s in SEEDS]
    assert mean_of([m.groups.few for m in dbm]) >= mean_of([m.groups.few for m in bs])
    assert mean_of([m.overall for m in dbm]) >= mean_of([m.overall for m in bs]) - SLACK


def test_dbm_margin_is_still_active_at_the_end_of_training():
    for seed in SEEDS:
        last = run("dbm-bs", seed)[2][-1]
        assert last.hard_positive_fraction >= 0.01
        assert last.mean_margin > 0.0


def test_dbm_bs_features_are_more_compact():
    wins = sum(
        run("dbm-bs", s)[1].angular["test"].all.mean < run("bs", s)[1].angular["test"].all.mean
        for s in SEEDS
    )
    assert wins >= 4


def test_dbm_bs_classes_are_more_separable():
    wins = sum(
        run("dbm-bs", s)[1].separability["test"].all >= run("bs", s)[1].separability["test"].all
        for s in SEEDS
    )
    assert wins >= 4


def test_margin_components_order():
    def overall(variant):
        return mean_of([run(variant, s)[0].overall for s in SEEDS])

    full, class_only, plain = overall("cosine-bs+mc+mi-hp"), overall("cosine-bs+mc"), overall("cosine-bs")
    assert full >= class_only - SLACK
    assert class_only >= plain - SLACK


@pytest.mark.parametrize("k", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_dbm_bs_is_robust_to_hyperparameters(k, tau):
    baseline = mean_of([run("bs", s)[0].overall for s in SEEDS])
    assert mean_of([run("dbm-bs", s, k, tau)[0].overall for s in SEEDS]) >= baseline - SLACK
