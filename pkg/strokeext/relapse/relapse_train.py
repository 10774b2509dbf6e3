#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_train.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 06.09.2026
# Last Modified Date: 16.10.2026

import dataclasses
import logging
import math
import numpy as np
import torch

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .relapse_config import ModelConfig, TrainConfig
from .relapse_io import write_table
from .relapse_model import FusionModel, batch_loss, init_model, predict
from .relapse_preprocess import Sample
from .relapse_types import (
    ArgumentError,
    ConfigError,
    Modality,
    NumericError,
    Task,
    parse_enum,
)
from .version import __version__

log = logging.getLogger("strokeext.relapse.train")

DEFAULT_KAPPA_LOW = 1642.0
DEFAULT_RFS_CAP = 2555.0
HISTORY_COLUMNS = ["epoch", "loss", "imputed_rfs_value", "mean_predicted_rfs_known_relapses"]


@dataclass
class TrainHistory:
    loss: List[float] = field(default_factory=list)
    imputed_rfs_value: List[Optional[float]] = field(default_factory=list)
    mean_predicted_rfs_known_relapses: List[Optional[float]] = field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def append(self, loss, imputed=None, mean_predicted=None) -> None:
        self.loss.append(float(loss))
        self.imputed_rfs_value.append(imputed)
        self.mean_predicted_rfs_known_relapses.append(mean_predicted)

    def rows(self) -> List[dict]:
        return [
            {
                "epoch": e,
                "loss": self.loss[e],
                "imputed_rfs_value": self.imputed_rfs_value[e],
                "mean_predicted_rfs_known_relapses": self.mean_predicted_rfs_known_relapses[e],
            }
            for e in range(len(self))
        ]

    def write_csv(self, path: str) -> None:
        write_table(path, self.rows(), HISTORY_COLUMNS)


def impute_unknown_rfs(
    predicted_rfs_known_relapses: Sequence[float], kappa_low: float = DEFAULT_KAPPA_LOW
) -> float:
    """Shared regression target (days) for relapses whose RFS is unknown."""
    values = [float(v) for v in predicted_rfs_known_relapses]
    if not values:
        fallback = 0.5 * kappa_low
        log.warning(
            f"no relapse with known RFS in the training split; imputing {fallback:.1f} days"
        )
        return fallback
    return math.fsum(values) / len(values)


class Trainer:
    """Minibatch SGD with momentum for one model; owns the parameters while running."""

    def __init__(
        self,
        config: TrainConfig,
        kappa_low: float = DEFAULT_KAPPA_LOW,
        rfs_cap: float = DEFAULT_RFS_CAP,
        impute: bool = True,
        name: str = "trainer",
    ):
        self.config = config.validate()
        self.kappa_low = kappa_low
        self.rfs_cap = rfs_cap
        self.impute = impute
        self.log = logging.getLogger(f"strokeext.{name}")
        self.log.info(f"Relapse ({name}) {config.task.name.lower()} trainer")
        self.log.info("strokeext-relapse version %s", __version__)

    def _targets(self, samples: Sequence[Sample]) -> Tuple[torch.Tensor, List[int], List[int]]:
        """Initial targets plus index lists of known-RFS and unknown-RFS relapses."""
        known, unknown, values = [], [], []
        for i, s in enumerate(samples):
            if self.config.task == Task.CLASSIFY:
                values.append(float(s.label))
                continue
            if s.rfs_known:
                values.append(min(s.rfs_days, self.rfs_cap) / self.rfs_cap)
                if s.label == 1:
                    known.append(i)
            elif s.label == 1:
                values.append(0.0)
                unknown.append(i)
            else:
                raise ArgumentError(f"record {s.id}: non-relapse without RFS has no target")
        return torch.tensor(values, dtype=torch.float64), known, unknown

    def train(self, params: FusionModel, samples: Sequence[Sample]) -> Tuple[FusionModel, TrainHistory]:
        cfg = self.config
        if params.task != cfg.task:
            raise ConfigError(
                f"model head is {params.task.name.lower()} but training task is "
                f"{cfg.task.name.lower()}"
            )
        if not samples:
            raise ArgumentError("cannot train on an empty cohort")

        dtype = next(params.parameters()).dtype
        volumes = torch.as_tensor(np.stack([s.volume for s in samples]), dtype=dtype)
        features = torch.as_tensor(np.stack([s.features for s in samples]), dtype=dtype)
        targets, known, unknown = self._targets(samples)
        targets = targets.to(dtype)
        ids = [s.id for s in samples]
        regress = cfg.task == Task.REGRESS
        imputing = regress and self.impute and bool(unknown)

        imputed = None
        if imputing:
            # Seed value before any prediction exists: mean ground-truth RFS
            imputed = impute_unknown_rfs([samples[i].rfs_days for i in known], self.kappa_low)

        generator = torch.Generator().manual_seed(int(cfg.seed))
        optimizer = torch.optim.SGD(params.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)
        history = TrainHistory()
        n = len(samples)

        for epoch in range(cfg.epochs):
            mean_pred = None
            if regress and known:
                params.eval()
                preds = predict(params, volumes[known], features[known]) * self.rfs_cap
                mean_pred = math.fsum(preds.tolist()) / len(preds)
            if imputing:
                if epoch > 0:
                    imputed = impute_unknown_rfs(preds.tolist() if known else [], self.kappa_low)
                targets[unknown] = imputed / self.rfs_cap

            params.train()
            order = torch.randperm(n, generator=generator)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                optimizer.zero_grad()
                try:
                    loss = batch_loss(
                        params, volumes[idx], features[idx], targets[idx],
                        [ids[i] for i in idx.tolist()], cfg.task,
                    )
                except NumericError as exc:
                    raise NumericError(
                        f"epoch {epoch}: {exc}", record_id=exc.record_id, epoch=epoch
                    )
                loss.backward()
                optimizer.step()
                total += float(loss.detach()) * len(idx)
            epoch_loss = total / n
            if not math.isfinite(epoch_loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
            history.append(epoch_loss, imputed if imputing else None, mean_pred)
            self.log.debug(
                f"epoch {epoch}: loss {epoch_loss:.6f}"
                + (f", imputed RFS {imputed:.1f} d" if imputing else "")
            )

        params.eval()
        self.log.info(f"trained {cfg.epochs} epochs, final loss {history.loss[-1]:.6f}")
        return params, history


def train(
    params: FusionModel,
    train_samples: Sequence[Sample],
    config: TrainConfig,
    kappa_low: float = DEFAULT_KAPPA_LOW,
    rfs_cap: float = DEFAULT_RFS_CAP,
) -> Tuple[FusionModel, TrainHistory]:
    return Trainer(config, kappa_low, rfs_cap).train(params, train_samples)


def train_variant(
    modality: Modality,
    model_config: ModelConfig,
    train_samples: Sequence[Sample],
    config: TrainConfig,
    kappa_low: float = DEFAULT_KAPPA_LOW,
    rfs_cap: float = DEFAULT_RFS_CAP,
) -> Tuple[FusionModel, TrainHistory]:
    """Train the tabular-only, vision-only or multimodal graph from scratch."""
    modality = parse_enum(Modality, modality)
    variant = dataclasses.replace(model_config, modality=modality, task=config.task)
    params = init_model(variant)
    trainer = Trainer(config, kappa_low, rfs_cap, name=f"trainer.{modality.name.lower()}")
    return trainer.train(params, train_samples)
