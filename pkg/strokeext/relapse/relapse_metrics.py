#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_metrics.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 09.09.2026
# Last Modified Date: 15.10.2026

import logging
import numpy as np

from dataclasses import dataclass
from typing import Optional, Sequence

from .relapse_config import SelectionConfig
from .relapse_io import read_key_values, write_key_values
from .relapse_model import FusionModel, predict
from .relapse_preprocess import Sample
from .relapse_thresholds import ConfusionCounts, confusion_at_kappa, confusion_at_theta
from .relapse_types import (
    ArgumentError,
    CIndexMode,
    Modality,
    ShapeError,
    Task,
    UndefinedMetricError,
    parse_enum,
)

log = logging.getLogger("strokeext.relapse.metrics")

REPORT_COLUMNS = [
    "variant",
    "task",
    "auc",
    "f1",
    "sensitivity",
    "specificity",
    "c_index",
    "c_index_relapses",
    "threshold",
    "n_test",
    "tp",
    "fp",
    "tn",
    "fn",
]


@dataclass
class EvalReport:
    auc: float
    f1: float
    sensitivity: float
    specificity: float
    threshold_used: float
    n_test: int
    confusion: ConfusionCounts
    c_index: Optional[float] = None
    c_index_relapses: Optional[float] = None
    variant: Modality = Modality.MULTIMODAL
    task: Task = Task.CLASSIFY

    def row(self) -> dict:
        return {
            "variant": self.variant.name.lower(),
            "task": self.task.name.lower(),
            "auc": self.auc,
            "f1": self.f1,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "c_index": self.c_index,
            "c_index_relapses": self.c_index_relapses,
            "threshold": self.threshold_used,
            "n_test": self.n_test,
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "fn": self.confusion.fn,
        }

    def write(self, path: str) -> None:
        """Structured text, one 'key: value' per line, floats at full precision."""
        values = {}
        for key, value in self.row().items():
            values[key] = f"{value:.17g}" if isinstance(value, float) else value
        write_key_values(path, values)

    @classmethod
    def read(cls, path: str) -> "EvalReport":
        kv = read_key_values(path)

        def real(key):
            return float(kv[key]) if kv.get(key, "") != "" else None

        return cls(
            auc=real("auc"),
            f1=real("f1"),
            sensitivity=real("sensitivity"),
            specificity=real("specificity"),
            threshold_used=real("threshold"),
            n_test=int(kv["n_test"]),
            confusion=ConfusionCounts(*(int(kv[k]) for k in ("tp", "fp", "tn", "fn"))),
            c_index=real("c_index"),
            c_index_relapses=real("c_index_relapses"),
            variant=parse_enum(Modality, kv["variant"]),
            task=parse_enum(Task, kv["task"]),
        )


def roc_auc(scores, labels) -> float:
    """Mann-Whitney pair statistic with half credit for tied scores."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ShapeError(f"{scores.size} scores but {labels.size} labels")
    pos, neg = scores[labels == 1], scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError(
            f"AUC needs both classes, got {pos.size} positives and {neg.size} negatives"
        )
    diff = np.subtract.outer(pos, neg)
    credit = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(credit / (pos.size * neg.size))


def c_index(pred_times, true_times, event, mode: CIndexMode = CIndexMode.ALL) -> float:
    """Fraction of comparable pairs whose predicted order matches the true order."""
    mode = parse_enum(CIndexMode, mode)
    pred = np.asarray(pred_times, dtype=np.float64).ravel()
    true = np.asarray(true_times, dtype=np.float64).ravel()
    event = np.asarray(event).ravel().astype(bool)
    if not pred.shape == true.shape == event.shape:
        raise ShapeError(
            f"misaligned inputs: {pred.size} predictions, {true.size} times, {event.size} events"
        )
    if mode == CIndexMode.RELAPSES_ONLY and event.sum() < 2:
        raise UndefinedMetricError(f"relapse-only c-index needs >= 2 events, got {event.sum()}")

    # comparable[i, j]: patient i is known to relapse before patient j
    comparable = np.less.outer(true, true)
    if mode != CIndexMode.IGNORE_CENSORING:
        comparable &= event[:, None]
    if mode == CIndexMode.RELAPSES_ONLY:
        comparable &= event[None, :]
    n_pairs = int(comparable.sum())
    if n_pairs == 0:
        raise UndefinedMetricError("no comparable pairs")
    concordant = np.less.outer(pred, pred)[comparable].sum()
    tied = np.equal.outer(pred, pred)[comparable].sum()
    return float((concordant + 0.5 * tied) / n_pairs)


def _inputs(samples: Sequence[Sample]):
    if not samples:
        raise ArgumentError("evaluation needs at least one sample")
    volumes = np.stack([s.volume for s in samples])
    features = np.stack([s.features for s in samples])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return volumes, features, labels


def evaluate_classifier(model: FusionModel, samples: Sequence[Sample], theta: float) -> EvalReport:
    if model.task != Task.CLASSIFY:
        raise ArgumentError("evaluate_classifier needs a classification head")
    volumes, features, labels = _inputs(samples)
    scores = predict(model, volumes, features)
    counts = confusion_at_theta(scores, labels, theta)
    report = EvalReport(
        auc=roc_auc(scores, labels),
        f1=counts.f_beta(1.0),
        sensitivity=counts.sensitivity,
        specificity=counts.specificity,
        threshold_used=float(theta),
        n_test=len(samples),
        confusion=counts,
        variant=model.config.modality,
        task=Task.CLASSIFY,
    )
    log.info(
        f"classifier ({model.config.modality.name.lower()}): AUC {report.auc:.4f}, "
        f"F1 {report.f1:.4f} at theta {theta:.4f}"
    )
    return report


def predicted_rfs_days(model: FusionModel, samples: Sequence[Sample], rfs_cap: float) -> np.ndarray:
    """De-normalized predictions, clamped to [0, rfs_cap] days for reporting."""
    volumes, features, _ = _inputs(samples)
    return np.clip(predict(model, volumes, features) * rfs_cap, 0.0, rfs_cap)


def evaluate_regressor(
    model: FusionModel,
    samples: Sequence[Sample],
    kappa: float,
    selection: Optional[SelectionConfig] = None,
) -> EvalReport:
    if model.task != Task.REGRESS:
        raise ArgumentError("evaluate_regressor needs a regression head")
    selection = (selection or SelectionConfig()).validate()
    labels = np.array([s.label for s in samples], dtype=np.int64)
    pred = predicted_rfs_days(model, samples, selection.rfs_cap)
    substitute = selection.missing_rfs_substitute
    true = np.array([s.rfs_days if s.rfs_known else substitute for s in samples])

    counts = confusion_at_kappa(pred, labels, kappa, selection.kappa_low, selection.kappa_high)
    try:
        relapses_only = c_index(pred, true, labels, CIndexMode.RELAPSES_ONLY)
    except UndefinedMetricError as exc:
        log.warning(f"c-index over relapses left empty: {exc}")
        relapses_only = None
    report = EvalReport(
        auc=roc_auc(-pred, labels),
        f1=counts.f_beta(1.0),
        sensitivity=counts.sensitivity,
        specificity=counts.specificity,
        threshold_used=float(kappa),
        n_test=len(samples),
        confusion=counts,
        c_index=c_index(pred, true, labels, CIndexMode.ALL),
        c_index_relapses=relapses_only,
        variant=model.config.modality,
        task=Task.REGRESS,
    )
    relapses_text = "n/a" if relapses_only is None else f"{relapses_only:.4f}"
    log.info(
        f"regressor ({model.config.modality.name.lower()}): c-index {report.c_index:.4f}, "
        f"c-index relapses {relapses_text}, AUC {report.auc:.4f} at kappa {kappa:.2f}"
    )
    return report

