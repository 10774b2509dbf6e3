#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_synth.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 03.09.2026
# Last Modified Date: 15.10.2026

import logging
import math
import os
import numpy as np

from dataclasses import dataclass
from scipy.ndimage import gaussian_filter
from typing import List, Optional, Tuple

from .relapse_config import (
    AGE_MEAN,
    AGE_SD,
    HEART_DISEASE_CLASSES,
    SynthConfig,
)
from .relapse_io import (
    read_mask,
    read_table,
    read_volume,
    write_mask,
    write_table,
    write_volume,
)
from .relapse_types import ArgumentError, Gender, PrerequisiteError, Provenance

log = logging.getLogger("strokeext.relapse.synth")

AGE_RANGE = (30.0, 95.0)
HEAD_INTENSITY = 1.0
TUBE_INTENSITY = 2.0
LESION_BAND = (0.35, 0.65)

MANIFEST = "manifest.csv"
MANIFEST_COLUMNS = [
    "id",
    "age",
    "gender",
    "chd",
    "pad",
    "relapse",
    "rfs_days",
    "max_possible_rfs_days",
    "latent_risk",
]


@dataclass
class PatientRecord:
    id: str
    volume: np.ndarray
    age: float
    gender: Gender
    chd: bool
    pad: bool
    relapse: bool
    rfs_days: Optional[float]
    max_possible_rfs_days: Optional[float]
    lesion_mask: Optional[np.ndarray] = None
    latent_risk: Optional[float] = None

    def __post_init__(self):
        if self.relapse and self.rfs_days is not None and self.rfs_days <= 0:
            raise ArgumentError(f"record {self.id}: relapse RFS must be > 0, got {self.rfs_days}")
        if self.rfs_days is None and self.max_possible_rfs_days is None:
            raise ArgumentError(
                f"record {self.id}: unknown RFS needs max_possible_rfs_days"
            )
        if self.lesion_mask is not None and self.lesion_mask.shape != self.volume.shape:
            raise ArgumentError(
                f"record {self.id}: mask shape {self.lesion_mask.shape} != "
                f"volume shape {self.volume.shape}"
            )

    @property
    def rfs_known(self) -> bool:
        return self.rfs_days is not None


@dataclass
class Cohort:
    records: List[PatientRecord]
    provenance: Provenance = Provenance.SYNTHETIC
    generator_config: Optional[SynthConfig] = None
    split: Optional[str] = None

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ArgumentError(f"cohort ids must be unique, duplicated: {dupes}")

    def __len__(self):
        return len(self.records)

    @property
    def n_relapses(self) -> int:
        return sum(1 for r in self.records if r.relapse)


def _check_risk(risk: float) -> None:
    if not 0.0 <= risk <= 1.0:
        raise ArgumentError(f"risk must lie in [0, 1], got {risk}")


def rfs_from_risk(risk: float, config: SynthConfig, rng: np.random.Generator) -> float:
    """Affine risk-to-RFS map with Gaussian noise, clamped to [1, rfs_max] days."""
    _check_risk(risk)
    noise = rng.normal(0.0, config.rfs_noise_sd)
    rfs = config.rfs_scale * (1.0 - risk) + noise
    return float(min(max(rfs, 1.0), config.rfs_max))


def synth_volume(
    risk: float, config: SynthConfig, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Phantom: smooth background, ellipsoidal head, vessel tube along z and
    an ellipsoidal lesion on the tube whose brightness scales with risk."""
    _check_risk(risk)
    shape = config.volume_shape
    x, y, z = np.indices(shape, dtype=np.float64)
    cx, cy, cz = ((s - 1) / 2.0 for s in shape)

    field = gaussian_filter(rng.standard_normal(shape), sigma=2.0, mode="reflect")
    spread = field.std()
    background = config.background_amplitude * field / spread if spread > 0 else 0.0 * field

    head = (
        ((x - cx) / (0.42 * shape[0])) ** 2
        + ((y - cy) / (0.42 * shape[1])) ** 2
        + ((z - cz) / (0.45 * shape[2])) ** 2
    ) <= 1.0
    tube_radius = max(1.0, 0.07 * min(shape[0], shape[1]))
    tube = ((x - cx) ** 2 + (y - cy) ** 2) <= tube_radius ** 2

    lo, hi = LESION_BAND
    lesion_z = rng.uniform(lo * (shape[2] - 1), hi * (shape[2] - 1))
    rx, ry, rz = config.lesion_radius
    mask = (
        ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - lesion_z) / rz) ** 2
    ) <= 1.0

    volume = background.copy()
    volume[head] += HEAD_INTENSITY
    volume[tube] = background[tube] + TUBE_INTENSITY
    lesion_noise = rng.normal(0.0, config.lesion_noise_sd, size=int(mask.sum()))
    volume[mask] = (
        background[mask]
        + TUBE_INTENSITY
        + config.lesion_intensity_scale * risk
        + lesion_noise
    )
    volume += rng.normal(0.0, config.volume_noise_sd, size=shape)
    return volume, mask


def _marginals(config: SynthConfig) -> Tuple[float, float]:
    if config.heart_disease_joint is None:
        return config.chd_prob, config.pad_prob
    joint = config.heart_disease_joint
    return joint["chd_only"] + joint["both"], joint["pad_only"] + joint["both"]


def _standardize(flag: bool, p: float) -> float:
    return (float(flag) - p) / math.sqrt(p * (1.0 - p))


def _draw_patient(index: int, config: SynthConfig, rng: np.random.Generator) -> PatientRecord:
    age = float(np.clip(rng.normal(AGE_MEAN, AGE_SD), *AGE_RANGE))
    male = bool(rng.random() < config.male_prob)
    u_chd, u_pad, u_joint = rng.random(3)
    if config.heart_disease_joint is None:
        chd, pad = bool(u_chd < config.chd_prob), bool(u_pad < config.pad_prob)
    else:
        probs = np.array([config.heart_disease_joint[k] for k in HEART_DISEASE_CLASSES])
        slot = int(np.searchsorted(np.cumsum(probs), u_joint, side="right"))
        cls = HEART_DISEASE_CLASSES[min(slot, len(probs) - 1)]
        chd, pad = cls in ("chd_only", "both"), cls in ("pad_only", "both")
    lesion_severity = float(rng.standard_normal())

    p_chd, p_pad = _marginals(config)
    z = {
        "age_z": (age - AGE_MEAN) / AGE_SD,
        "gender": _standardize(male, config.male_prob),
        "chd": _standardize(chd, p_chd),
        "pad": _standardize(pad, p_pad),
        "lesion": lesion_severity,
    }
    score = config.risk_bias + sum(config.risk_weights.get(k, 0.0) * v for k, v in z.items())
    risk = 1.0 / (1.0 + math.exp(-score))

    volume, mask = synth_volume(risk, config, rng)
    rfs = rfs_from_risk(risk, config, rng)
    return PatientRecord(
        id=f"P{index:04d}",
        volume=volume,
        age=age,
        gender=Gender.MALE if male else Gender.FEMALE,
        chd=chd,
        pad=pad,
        relapse=rfs < config.kappa_low,
        rfs_days=rfs,
        max_possible_rfs_days=rfs,
        lesion_mask=mask,
        latent_risk=risk,
    )


def synth_cohort(config: SynthConfig) -> Cohort:
    """Draw a synthetic cohort; bit-identical for a fixed config and seed."""
    config.validate()
    children = np.random.SeedSequence(config.seed).spawn(config.n_patients + 1)
    records = [
        _draw_patient(i, config, np.random.default_rng(children[i]))
        for i in range(config.n_patients)
    ]

    # Hide the RFS of a share of the relapses, keeping a max-possible bound
    rng = np.random.default_rng(children[-1])
    relapse_idx = [i for i, r in enumerate(records) if r.relapse]
    n_hidden = int(round(config.frac_unknown_rfs * len(relapse_idx)))
    hidden = sorted(rng.choice(relapse_idx, size=n_hidden, replace=False)) if n_hidden else []
    for i in hidden:
        rec = records[i]
        slack = rng.uniform(1.0, config.unknown_slack_days)
        rec.max_possible_rfs_days = rec.rfs_days + min(
            slack, 0.5 * (config.kappa_low - rec.rfs_days)
        )
        rec.rfs_days = None

    cohort = Cohort(records=records, provenance=Provenance.SYNTHETIC, generator_config=config)
    log.info(
        f"synthesized {len(records)} patients ({cohort.n_relapses} relapses, "
        f"{n_hidden} with hidden RFS), seed {config.seed}"
    )
    return cohort


def _fmt_optional(value: Optional[float]):
    return "" if value is None else value


def save_cohort(cohort: Cohort, directory: str) -> None:
    """Manifest CSV plus one volume (and mask) file per patient."""
    rows = []
    for rec in cohort.records:
        rows.append(
            {
                "id": rec.id,
                "age": rec.age,
                "gender": rec.gender.name.lower(),
                "chd": int(rec.chd),
                "pad": int(rec.pad),
                "relapse": int(rec.relapse),
                "rfs_days": _fmt_optional(rec.rfs_days),
                "max_possible_rfs_days": _fmt_optional(rec.max_possible_rfs_days),
                "latent_risk": _fmt_optional(rec.latent_risk),
            }
        )
        write_volume(os.path.join(directory, "volumes", f"{rec.id}.vol"), rec.volume)
        if rec.lesion_mask is not None:
            write_mask(os.path.join(directory, "masks", f"{rec.id}.mask"), rec.lesion_mask)
    write_table(os.path.join(directory, MANIFEST), rows, MANIFEST_COLUMNS, float_format="%.17g")
    log.info(f"saved {len(rows)} records to {directory}")


def _optional(value) -> Optional[float]:
    if value is None or (isinstance(value, float) and math.isnan(value)) or value == "":
        return None
    return float(value)


def load_cohort(directory: str) -> Cohort:
    manifest = os.path.join(directory, MANIFEST)
    if not os.path.exists(manifest):
        raise PrerequisiteError(f"no cohort manifest at {manifest} (run 'synth' first)")
    frame = read_table(manifest)
    frame["id"] = frame["id"].astype(str)
    records = []
    for row in frame.to_dict(orient="records"):
        mask_path = os.path.join(directory, "masks", f"{row['id']}.mask")
        records.append(
            PatientRecord(
                id=row["id"],
                volume=read_volume(os.path.join(directory, "volumes", f"{row['id']}.vol")),
                age=float(row["age"]),
                gender=Gender[str(row["gender"]).upper()],
                chd=bool(int(row["chd"])),
                pad=bool(int(row["pad"])),
                relapse=bool(int(row["relapse"])),
                rfs_days=_optional(row["rfs_days"]),
                max_possible_rfs_days=_optional(row["max_possible_rfs_days"]),
                lesion_mask=read_mask(mask_path) if os.path.exists(mask_path) else None,
                latent_risk=_optional(row.get("latent_risk")),
            )
        )
    has_masks = os.path.isdir(os.path.join(directory, "masks"))
    return Cohort(
        records=records,
        provenance=Provenance.SYNTHETIC if has_masks else Provenance.EXTERNAL,
    )
