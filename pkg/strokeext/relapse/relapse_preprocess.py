#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_preprocess.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 04.09.2026
# Last Modified Date: 13.10.2026

import dataclasses
import logging
import math
import numpy as np

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from .relapse_config import SelectionConfig
from .relapse_synth import Cohort, PatientRecord
from .relapse_types import (
    DegenerateStatisticsError,
    Gender,
    InsufficientDataError,
    Provenance,
)

log = logging.getLogger("strokeext.relapse.preprocess")

FEATURE_NAMES = ("age_z", "gender_female", "gender_male", "chd", "pad")


@dataclass(frozen=True)
class AgeStats:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DegenerateStatisticsError(f"age sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class VolumeStats:
    mean: float
    sd: float


@dataclass(frozen=True)
class FeatureVector:
    values: Tuple[float, float, float, float, float]

    def __post_init__(self):
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(f"feature vector needs {len(FEATURE_NAMES)} entries")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @property
    def is_valid(self) -> bool:
        """One-hot gender pair and binary heart-disease flags."""
        _, female, male, chd, pad = self.values
        onehot = {female, male} <= {0.0, 1.0} and female + male == 1.0
        return onehot and chd in (0.0, 1.0) and pad in (0.0, 1.0)


@dataclass
class Sample:
    """Model-ready patient: normalized volume, encoded features and targets."""

    id: str
    volume: np.ndarray
    features: np.ndarray
    label: int
    rfs_days: Optional[float]
    rfs_known: bool
    lesion_mask: Optional[np.ndarray] = None


def compute_age_stats(train_records: Sequence[PatientRecord]) -> AgeStats:
    """Sample mean and N-1 standard deviation of the training ages."""
    if len(train_records) < 2:
        raise InsufficientDataError(
            f"age statistics need at least 2 records, got {len(train_records)}"
        )
    ages = np.array([r.age for r in train_records], dtype=np.float64)
    mu = float(ages.mean())
    sigma = float(ages.std(ddof=1))
    if not sigma > 0:
        raise DegenerateStatisticsError(f"all {len(ages)} training ages equal {mu}")
    return AgeStats(mu=mu, sigma=sigma)


def encode_tabular(record: PatientRecord, stats: AgeStats) -> FeatureVector:
    female = record.gender == Gender.FEMALE
    return FeatureVector(
        values=(
            (record.age - stats.mu) / stats.sigma,
            1.0 if female else 0.0,
            0.0 if female else 1.0,
            1.0 if record.chd else 0.0,
            1.0 if record.pad else 0.0,
        )
    )


def select_cohort(
    records: Union[Cohort, Sequence[PatientRecord]], config: SelectionConfig
) -> Cohort:
    """Keep relapses below kappa_low and non-relapses above kappa_high."""
    config.validate()
    provenance = Provenance.SYNTHETIC
    generator_config = None
    if isinstance(records, Cohort):
        provenance, generator_config = records.provenance, records.generator_config
        records = records.records

    kept = []
    dropped = {"relapse_late": 0, "relapse_unknown_late": 0, "non_relapse_early": 0, "beyond_cap": 0}
    for rec in records:
        if rec.relapse:
            if rec.rfs_known:
                if rec.rfs_days < config.kappa_low:
                    kept.append(rec)
                else:
                    dropped["relapse_late"] += 1
            elif rec.max_possible_rfs_days < config.kappa_low:
                kept.append(rec)
            else:
                dropped["relapse_unknown_late"] += 1
            continue
        if not rec.rfs_known or not rec.rfs_days > config.kappa_high:
            dropped["non_relapse_early"] += 1
            continue
        if rec.rfs_days > config.rfs_cap:
            if config.exclude_beyond_cap:
                dropped["beyond_cap"] += 1
                continue
            rec = dataclasses.replace(
                rec, rfs_days=config.rfs_cap, max_possible_rfs_days=config.rfs_cap
            )
        kept.append(rec)

    cohort = Cohort(records=kept, provenance=provenance, generator_config=generator_config)
    log.info(
        f"selected {len(kept)} of {len(records)} records "
        f"({cohort.n_relapses} relapses); dropped {dropped}"
    )
    return cohort


def split_cohort(cohort: Cohort, config: SelectionConfig) -> Tuple[Cohort, Cohort]:
    """Stratified (by relapse flag) seeded train/test split."""
    config.validate()
    if not cohort.records:
        raise InsufficientDataError("cannot split an empty cohort")
    rng = np.random.default_rng(config.split_seed)
    train_idx, test_idx = [], []
    for flag in (False, True):
        stratum = [i for i, r in enumerate(cohort.records) if r.relapse == flag]
        if not stratum:
            continue
        if len(stratum) < 2:
            log.warning(
                f"stratum relapse={flag} has {len(stratum)} member(s); assigned to train"
            )
            train_idx.extend(stratum)
            continue
        n_train = min(int(math.floor(config.split_ratio * len(stratum) + 0.5)), len(stratum) - 1)
        order = rng.permutation(len(stratum))
        train_idx.extend(stratum[k] for k in order[:n_train])
        test_idx.extend(stratum[k] for k in order[n_train:])

    def part(indices, name):
        return Cohort(
            records=[cohort.records[i] for i in sorted(indices)],
            provenance=cohort.provenance,
            generator_config=cohort.generator_config,
            split=name,
        )

    train, test = part(train_idx, "train"), part(test_idx, "test")
    log.info(
        f"split {len(cohort)} -> train {len(train)} ({train.n_relapses} relapses), "
        f"test {len(test)} ({test.n_relapses} relapses), seed {config.split_seed}"
    )
    return train, test


def compute_volume_stats(train_records: Sequence[PatientRecord]) -> VolumeStats:
    """Global voxel mean and standard deviation over the training volumes."""
    if not train_records:
        raise InsufficientDataError("volume statistics need at least one record")
    voxels = np.concatenate([np.asarray(rec.volume, dtype=np.float64).ravel() for rec in train_records])
    mean = float(np.mean(voxels))
    # Two-pass variance, stable under a large intensity offset
    sd = float(np.std(voxels))
    if not sd > 0:
        raise DegenerateStatisticsError("training volumes have zero intensity variance")
    return VolumeStats(mean=mean, sd=sd)


def normalize_volume(volume: np.ndarray, train_stats: Tuple[float, float]) -> np.ndarray:
    mean, sd = train_stats
    if not sd > 0:
        raise DegenerateStatisticsError(f"volume sd must be > 0, got {sd}")
    return (np.asarray(volume, dtype=np.float64) - mean) / sd


def prepare_samples(
    cohort: Cohort,
    age_stats: AgeStats,
    volume_stats: VolumeStats,
) -> List[Sample]:
    """Encode every record with statistics fixed on the training split."""
    samples = []
    for rec in cohort.records:
        samples.append(
            Sample(
                id=rec.id,
                volume=normalize_volume(rec.volume, (volume_stats.mean, volume_stats.sd)),
                features=encode_tabular(rec, age_stats).as_array(),
                label=int(rec.relapse),
                rfs_days=rec.rfs_days,
                rfs_known=rec.rfs_known,
                lesion_mask=rec.lesion_mask,
            )
        )
    return samples
