#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_thresholds.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 08.09.2026
# Last Modified Date: 14.10.2026

"""F-beta scores and threshold sweeps.

Classifier scores are called positive when strictly above theta. Predicted
RFS values are called relapses when at most kappa days, with kappa restricted
to the selection gap [kappa_low, kappa_high].
"""

import logging
import math
import numpy as np

from dataclasses import dataclass
from typing import List, Sequence

from .relapse_io import write_table
from .relapse_types import (
    RangeError,
    ShapeError,
    ThresholdDomain,
    TieRule,
    UndefinedOptimumError,
    parse_enum,
)

log = logging.getLogger("strokeext.relapse.thresholds")

DEFAULT_KAPPA_LOW = 1642.0
DEFAULT_KAPPA_HIGH = 1825.0
THETA_BETAS = (1.0, 2.0, 0.5)
KAPPA_BETAS = (1.0, 2.0, 4.0, 0.5)
CURVE_COLUMNS = ["threshold", "precision", "recall", "f_beta"]


def _ratio(num: int, den: int) -> float:
    return num / den if den else float("nan")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"confusion count {name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> float:
        # No predicted positives counts as zero precision
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    sensitivity = recall

    @property
    def specificity(self) -> float:
        return _ratio(self.tn, self.tn + self.fp)

    def f_beta(self, beta: float) -> float:
        recall = self.recall
        return f_beta_score(self.precision, 0.0 if math.isnan(recall) else recall, beta)


def f_beta_score(precision: float, recall: float, beta: float) -> float:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    b2 = beta * beta
    den = b2 * precision + recall
    if den == 0:
        return 0.0
    return (1.0 + b2) * precision * recall / den


def _aligned(values, labels):
    values = np.asarray(values, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if values.shape != labels.shape:
        raise ShapeError(f"{values.size} values but {labels.size} labels")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ShapeError("labels must be 0 or 1")
    return values, labels.astype(bool)


def _tally(predicted: np.ndarray, labels: np.ndarray) -> ConfusionCounts:
    return ConfusionCounts(
        tp=int(np.sum(predicted & labels)),
        fp=int(np.sum(predicted & ~labels)),
        tn=int(np.sum(~predicted & ~labels)),
        fn=int(np.sum(~predicted & labels)),
    )


def confusion_at_theta(scores, labels, theta: float) -> ConfusionCounts:
    scores, labels = _aligned(scores, labels)
    return _tally(scores > theta, labels)


def _check_kappa(kappa: float, kappa_low: float, kappa_high: float) -> None:
    if not kappa_low <= kappa <= kappa_high:
        raise RangeError(f"kappa {kappa} outside [{kappa_low}, {kappa_high}]")


def confusion_at_kappa(
    pred_rfs,
    labels,
    kappa: float,
    kappa_low: float = DEFAULT_KAPPA_LOW,
    kappa_high: float = DEFAULT_KAPPA_HIGH,
) -> ConfusionCounts:
    _check_kappa(kappa, kappa_low, kappa_high)
    pred_rfs, labels = _aligned(pred_rfs, labels)
    return _tally(pred_rfs <= kappa, labels)


@dataclass
class ThresholdReport:
    beta: float
    grid: List[float]
    scores: List[float]
    precisions: List[float]
    recalls: List[float]
    chosen: float
    rule: TieRule = TieRule.LOWEST_ARGMAX
    domain: ThresholdDomain = ThresholdDomain.THETA_UNIT_INTERVAL

    @property
    def chosen_index(self) -> int:
        return self.grid.index(self.chosen)

    @property
    def best_score(self) -> float:
        return self.scores[self.chosen_index]

    def rows(self) -> List[dict]:
        return [
            {"threshold": t, "precision": p, "recall": r, "f_beta": f}
            for t, p, r, f in zip(self.grid, self.precisions, self.recalls, self.scores)
        ]

    def write_csv(self, path: str) -> None:
        write_table(path, self.rows(), CURVE_COLUMNS)


def _midpoints(values: np.ndarray) -> np.ndarray:
    unique = np.unique(values)
    return (unique[:-1] + unique[1:]) / 2.0


def threshold_grid(
    values,
    domain: ThresholdDomain,
    kappa_low: float = DEFAULT_KAPPA_LOW,
    kappa_high: float = DEFAULT_KAPPA_HIGH,
) -> List[float]:
    """Candidate thresholds covering every achievable confusion matrix."""
    values = np.asarray(values, dtype=np.float64)
    mids = _midpoints(values)
    if domain == ThresholdDomain.THETA_UNIT_INTERVAL:
        grid = np.concatenate([[0.0, 1.0], mids[(mids > 0.0) & (mids < 1.0)]])
    else:
        inside = mids[(mids > kappa_low) & (mids < kappa_high)]
        grid = np.concatenate([[kappa_low, kappa_high], inside])
    return [float(t) for t in np.unique(grid)]


def sweep_threshold(
    values,
    labels,
    beta: float,
    domain: ThresholdDomain = ThresholdDomain.THETA_UNIT_INTERVAL,
    kappa_low: float = DEFAULT_KAPPA_LOW,
    kappa_high: float = DEFAULT_KAPPA_HIGH,
) -> ThresholdReport:
    """Maximize F-beta over the grid; the lowest maximizing threshold wins."""
    domain = parse_enum(ThresholdDomain, domain)
    values, labels = _aligned(values, labels)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise UndefinedOptimumError(
            f"threshold sweep needs both classes, got {n_pos} positives of {labels.size}"
        )
    if domain == ThresholdDomain.KAPPA_DAYS and not kappa_low < kappa_high:
        raise RangeError(f"kappa_low {kappa_low} must be < kappa_high {kappa_high}")

    grid = threshold_grid(values, domain, kappa_low, kappa_high)
    scores, precisions, recalls = [], [], []
    for t in grid:
        if domain == ThresholdDomain.THETA_UNIT_INTERVAL:
            counts = _tally(values > t, labels)
        else:
            counts = _tally(values <= t, labels)
        precisions.append(counts.precision)
        recalls.append(counts.recall)
        scores.append(f_beta_score(counts.precision, counts.recall, beta))

    best = int(np.argmax(scores))  # first index, grid is ascending
    report = ThresholdReport(
        beta=float(beta),
        grid=grid,
        scores=scores,
        precisions=precisions,
        recalls=recalls,
        chosen=grid[best],
        domain=domain,
    )
    log.debug(
        f"{domain.name.lower()} sweep beta={beta}: {len(grid)} candidates, "
        f"chosen {report.chosen:.6g} (F={scores[best]:.4f})"
    )
    return report


def threshold_table(
    train_values,
    train_labels,
    test_values,
    test_labels,
    betas: Sequence[float],
    domain: ThresholdDomain = ThresholdDomain.THETA_UNIT_INTERVAL,
    kappa_low: float = DEFAULT_KAPPA_LOW,
    kappa_high: float = DEFAULT_KAPPA_HIGH,
) -> List[dict]:
    """Per beta: threshold fixed on train, sensitivity and specificity on test."""
    domain = parse_enum(ThresholdDomain, domain)
    rows = []
    for beta in betas:
        report = sweep_threshold(train_values, train_labels, beta, domain, kappa_low, kappa_high)
        if domain == ThresholdDomain.THETA_UNIT_INTERVAL:
            counts = confusion_at_theta(test_values, test_labels, report.chosen)
        else:
            counts = confusion_at_kappa(
                test_values, test_labels, report.chosen, kappa_low, kappa_high
            )
        rows.append(
            {
                "beta": float(beta),
                "threshold": report.chosen,
                "train_f_beta": report.best_score,
                "test_f_beta": counts.f_beta(beta),
                "sensitivity": counts.sensitivity,
                "specificity": counts.specificity,
            }
        )
    return rows
