# -*- coding: utf-8 -*-
# File              : test_relapse_train.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 06.09.2026
# Last Modified Date: 16.10.2026

import logging
import math
import numpy as np
import pytest

from const import cfg
from strokeext.relapse import (
    Modality,
    ModelConfig,
    Sample,
    Task,
    TrainConfig,
    Trainer,
    impute_unknown_rfs,
    init_model,
    predict,
    roc_auc,
    train,
    train_variant,
)
from strokeext.relapse.relapse_types import ArgumentError, ConfigError, NumericError


def tabular_config(task, **kwargs):
    return ModelConfig(**dict(cfg.SMALL_MODEL, modality=Modality.TABULAR_ONLY, task=task, **kwargs))


def toy_samples(n, seed, unknown=0):
    """Tabular cohort whose age alone separates relapses from non-relapses."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        label = i % 2
        age_z = (1.0 if label else -1.0) + 0.3 * rng.normal()
        male = float(rng.integers(0, 2))
        features = np.array([age_z, 1.0 - male, male, float(rng.integers(0, 2)), 0.0])
        if label:
            rfs = float(rng.uniform(300, 1500))
        else:
            rfs = float(rng.uniform(1900, 2555))
        known = not (label and unknown > 0 and i // 2 < unknown)
        samples.append(
            Sample(f"T{i:03d}", np.zeros(cfg.SMALL_SHAPE), features, label, rfs if known else None, known)
        )
    return samples


def test_impute_unknown_rfs(caplog):
    assert impute_unknown_rfs([1000.0, 1200.0]) == 1100.0
    with caplog.at_level(logging.WARNING):
        assert impute_unknown_rfs([], kappa_low=1642.0) == 821.0
    assert "imputing 821.0 days" in caplog.text


def test_separable_tabular_classifier_reaches_high_auc():
    samples = toy_samples(20, seed=1)
    model = init_model(tabular_config(Task.CLASSIFY))
    config = TrainConfig(epochs=200, batch_size=4, learning_rate=0.05, momentum=0.9, task=Task.CLASSIFY)
    model, history = train(model, samples, config)
    assert len(history) == 200
    assert all(math.isfinite(v) for v in history.loss)
    assert history.loss[-1] < history.loss[0]
    scores = predict(model, np.stack([s.volume for s in samples]), np.stack([s.features for s in samples]))
    auc = roc_auc(scores, [s.label for s in samples])
    print(f"train AUC {auc:.3f}")
    assert auc >= 0.95


def test_training_is_deterministic():
    samples = toy_samples(16, seed=2, unknown=2)
    config = TrainConfig(epochs=5, batch_size=3, task=Task.REGRESS, seed=4)
    _, first = train(init_model(tabular_config(Task.REGRESS)), samples, config)
    _, second = train(init_model(tabular_config(Task.REGRESS)), samples, config)
    assert first.rows() == second.rows()


def test_imputation_path_is_inert_without_unknowns():
    samples = toy_samples(16, seed=3)
    config = TrainConfig(epochs=4, batch_size=4, task=Task.REGRESS)
    _, with_path = Trainer(config).train(init_model(tabular_config(Task.REGRESS)), samples)
    _, without = Trainer(config, impute=False).train(init_model(tabular_config(Task.REGRESS)), samples)
    assert with_path.loss == without.loss
    assert all(v is None for v in with_path.imputed_rfs_value)


def test_imputation_follows_predictions():
    samples = toy_samples(20, seed=4, unknown=3)
    known = [s.rfs_days for s in samples if s.label and s.rfs_known]
    config = TrainConfig(epochs=6, batch_size=4, task=Task.REGRESS)
    _, history = train(init_model(tabular_config(Task.REGRESS)), samples, config)
    assert history.imputed_rfs_value[0] == pytest.approx(sum(known) / len(known))
    for epoch in range(1, 6):
        assert history.imputed_rfs_value[epoch] == history.mean_predicted_rfs_known_relapses[epoch]


def test_history_csv(tmp_path):
    samples = toy_samples(12, seed=5, unknown=1)
    config = TrainConfig(epochs=3, batch_size=4, task=Task.REGRESS)
    _, history = train(init_model(tabular_config(Task.REGRESS)), samples, config)
    path = tmp_path / "history.csv"
    history.write_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,loss,imputed_rfs_value,mean_predicted_rfs_known_relapses"
    assert len(lines) == 4


def test_task_mismatch_and_bad_targets():
    samples = toy_samples(8, seed=6)
    with pytest.raises(ConfigError, match="head"):
        train(init_model(tabular_config(Task.CLASSIFY)), samples, TrainConfig(epochs=1, task=Task.REGRESS))
    orphan = samples[:2] + [Sample("X", np.zeros(cfg.SMALL_SHAPE), np.zeros(5), 0, None, False)]
    with pytest.raises(ArgumentError, match="X"):
        train(init_model(tabular_config(Task.REGRESS)), orphan, TrainConfig(epochs=1, task=Task.REGRESS))


def test_non_finite_loss_reports_epoch_and_record():
    samples = toy_samples(6, seed=7)
    samples[2] = Sample("NaN", np.zeros(cfg.SMALL_SHAPE), samples[2].features, 0, float("nan"), True)
    with pytest.raises(NumericError) as info:
        train(init_model(tabular_config(Task.REGRESS)), samples, TrainConfig(epochs=2, task=Task.REGRESS))
    assert info.value.epoch == 0
    assert info.value.record_id == "NaN"


def test_train_variant_builds_requested_graph():
    samples = toy_samples(8, seed=8)
    base = ModelConfig(**cfg.SMALL_MODEL)
    model, history = train_variant(
        "vision_only", base, samples, TrainConfig(epochs=1, batch_size=4, task=Task.REGRESS)
    )
    assert model.config.modality == Modality.VISION_ONLY
    assert model.task == Task.REGRESS
    assert model.tabular is None
    assert len(history) == 1
