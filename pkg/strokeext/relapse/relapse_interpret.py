#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_interpret.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 11.09.2026
# Last Modified Date: 16.10.2026

"""Attribute ablation contributions and 3D occlusion saliency.

The contribution of an attribute is the mean absolute change of the model
output when that attribute is replaced by its training baseline, normalized
over all attributes (absolute) and within the attribute's modality (relative).
"""

import itertools
import logging
import os
import numpy as np

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .relapse_config import OcclusionConfig
from .relapse_io import write_pgm, write_volume
from .relapse_model import FusionModel, predict
from .relapse_preprocess import Sample
from .relapse_types import (
    MODALITY_ATTRIBUTES,
    ArgumentError,
    Attribute,
    DegenerateContributionError,
    Modality,
    OcclusionFill,
    ShapeError,
    VolumeBaseline,
    parse_enum,
)

log = logging.getLogger("strokeext.relapse.interpret")

COLLAPSE_LIMIT = 0.05
SALIENCY_FLOOR = 1e-9
OCCLUSION_BATCH = 64
CONTRIBUTION_COLUMNS = ["variant"] + [a.name.lower() for a in Attribute]

# Feature vector columns: age_z, female, male, chd, pad
_AGE, _FEMALE, _MALE, _CHD, _PAD = range(5)


@dataclass
class Baselines:
    volume_intensity: float
    gender: Tuple[float, float]
    chd: float
    pad: float
    age_z: float = 0.0
    volume: Optional[np.ndarray] = None
    kind: VolumeBaseline = VolumeBaseline.MEAN_INTENSITY

    def volume_like(self, shape) -> np.ndarray:
        if self.kind == VolumeBaseline.MEAN_VOLUME and self.volume is not None:
            if tuple(self.volume.shape) != tuple(shape):
                raise ShapeError(f"baseline volume {self.volume.shape} != {tuple(shape)}")
            return self.volume
        return np.full(shape, self.volume_intensity)


def compute_baselines(
    train_samples: Sequence[Sample], volume_baseline: VolumeBaseline = VolumeBaseline.MEAN_INTENSITY
) -> Baselines:
    """Training-set means of every attribute, in model input space."""
    if not train_samples:
        raise ArgumentError("baselines need at least one training sample")
    kind = parse_enum(VolumeBaseline, volume_baseline)
    features = np.stack([s.features for s in train_samples])
    mean_volume = np.mean(np.stack([s.volume for s in train_samples]), axis=0)
    return Baselines(
        volume_intensity=float(mean_volume.mean()),
        gender=(float(features[:, _FEMALE].mean()), float(features[:, _MALE].mean())),
        chd=float(features[:, _CHD].mean()),
        pad=float(features[:, _PAD].mean()),
        volume=mean_volume if kind == VolumeBaseline.MEAN_VOLUME else None,
        kind=kind,
    )


def ablate_attribute(
    volume: np.ndarray, features: np.ndarray, attribute: Attribute, baselines: Baselines
) -> Tuple[np.ndarray, np.ndarray]:
    """Replace one attribute by its baseline; works on single items or batches."""
    try:
        attribute = parse_enum(Attribute, attribute)
    except ValueError:
        raise ArgumentError(f"unknown attribute {attribute!r}")
    volume = np.array(volume, dtype=np.float64, copy=True)
    features = np.array(features, dtype=np.float64, copy=True)
    if attribute == Attribute.VOLUME:
        shape = volume.shape[-3:]
        volume[...] = baselines.volume_like(shape)
    elif attribute == Attribute.AGE:
        features[..., _AGE] = baselines.age_z
    elif attribute == Attribute.GENDER:
        features[..., _FEMALE], features[..., _MALE] = baselines.gender
    elif attribute == Attribute.CHD:
        features[..., _CHD] = baselines.chd
    else:
        features[..., _PAD] = baselines.pad
    return volume, features


@dataclass
class ContributionReport:
    absolute: Dict[Attribute, float]
    relative: Dict[Attribute, Optional[float]]
    modality_totals: Dict[str, float]
    collapse_flag: bool = False
    variant: Modality = Modality.MULTIMODAL
    raw: Dict[Attribute, float] = field(default_factory=dict)

    def absolute_row(self) -> dict:
        row = {"variant": self.variant.name.lower()}
        row.update({a.name.lower(): self.absolute[a] for a in Attribute})
        return row

    def relative_row(self) -> dict:
        row = {"variant": self.variant.name.lower()}
        for a in Attribute:
            value = self.relative[a]
            row[a.name.lower()] = "-" if value is None else value
        return row


def modality_contribution(
    params: FusionModel, samples: Sequence[Sample], baselines: Baselines
) -> ContributionReport:
    """Normalized mean absolute output change under single-attribute ablation."""
    if not samples:
        raise ArgumentError("contribution needs a non-empty evaluation cohort")
    volumes = np.stack([s.volume for s in samples])
    features = np.stack([s.features for s in samples])
    reference = predict(params, volumes, features)

    raw = {}
    for attribute in Attribute:
        vol, feat = ablate_attribute(volumes, features, attribute, baselines)
        raw[attribute] = float(np.mean(np.abs(reference - predict(params, vol, feat))))
    total = sum(raw.values())
    if total <= 0.0:
        raise DegenerateContributionError(
            "model output does not change under any ablation; contributions undefined"
        )

    absolute = {a: u / total for a, u in raw.items()}
    relative = {}
    totals = {}
    for modality, members in MODALITY_ATTRIBUTES.items():
        within = sum(raw[a] for a in members)
        totals[modality] = sum(absolute[a] for a in members)
        for a in members:
            relative[a] = raw[a] / within if within > 0.0 else None

    variant = params.config.modality
    collapse = variant == Modality.MULTIMODAL and min(totals.values()) < COLLAPSE_LIMIT
    if collapse:
        log.warning(f"unimodal collapse: modality totals {totals}")
    log.info(
        f"contribution ({variant.name.lower()}): vision {totals['vision']:.3f}, "
        f"tabular {totals['tabular']:.3f}"
    )
    return ContributionReport(
        absolute=absolute,
        relative=relative,
        modality_totals=totals,
        collapse_flag=collapse,
        variant=variant,
        raw=raw,
    )


@dataclass
class SaliencyVolume:
    grid: np.ndarray
    patch: int
    stride: int
    fill: OcclusionFill


def patch_starts(side: int, patch: int, stride: int) -> List[int]:
    """Placement origins along one axis; the last patch sits flush with the end."""
    starts = list(range(0, side - patch + 1, stride))
    if starts[-1] != side - patch:
        starts.append(side - patch)
    return starts


def occlusion_saliency(
    params: FusionModel,
    record: Sample,
    config: OcclusionConfig,
    baselines: Optional[Baselines] = None,
) -> SaliencyVolume:
    """Per-voxel mean of |output change| over every occluding cube covering it."""
    volume = np.asarray(record.volume, dtype=np.float64)
    config.validate(volume.shape)
    p = config.patch
    if config.fill == OcclusionFill.TRAIN_MEAN_INTENSITY and baselines is not None:
        fill = baselines.volume_intensity
    else:
        # Normalized volumes have zero training mean
        fill = 0.0

    def result(grid):
        return SaliencyVolume(grid=grid, patch=p, stride=config.stride, fill=config.fill)

    if not params.config.uses_vision:
        return result(np.zeros_like(volume))

    features = np.asarray(record.features, dtype=np.float64)
    base = predict(params, volume[None], features[None])[0]
    placements = list(
        itertools.product(*(patch_starts(side, p, config.stride) for side in volume.shape))
    )
    total = np.zeros_like(volume)
    count = np.zeros_like(volume)
    for start in range(0, len(placements), OCCLUSION_BATCH):
        chunk = placements[start : start + OCCLUSION_BATCH]
        occluded = np.repeat(volume[None], len(chunk), axis=0)
        for k, (x, y, z) in enumerate(chunk):
            occluded[k, x : x + p, y : y + p, z : z + p] = fill
        outputs = predict(params, occluded, np.repeat(features[None], len(chunk), axis=0))
        for (x, y, z), out in zip(chunk, outputs):
            total[x : x + p, y : y + p, z : z + p] += abs(out - base)
            count[x : x + p, y : y + p, z : z + p] += 1.0

    raw = total / count
    peak = raw.max()
    if peak < SALIENCY_FLOOR:
        return result(np.zeros_like(volume))
    return result(raw / peak)


def saliency_hit(saliency, mask: np.ndarray, top_fraction: float) -> Tuple[float, bool]:
    """IoU of the top-fraction voxels with the mask, and whether the peak hits it."""
    grid = saliency.grid if isinstance(saliency, SaliencyVolume) else np.asarray(saliency)
    mask = np.asarray(mask, dtype=bool)
    if grid.shape != mask.shape:
        raise ShapeError(f"saliency shape {grid.shape} != mask shape {mask.shape}")
    if not mask.any():
        raise ArgumentError("lesion mask is empty")
    if not 0.0 < top_fraction < 1.0:
        raise ArgumentError(f"top_fraction must lie in (0, 1), got {top_fraction}")

    flat = grid.ravel()
    k = max(1, int(round(top_fraction * flat.size)))
    top = np.zeros(flat.size, dtype=bool)
    top[np.argsort(-flat, kind="stable")[:k]] = True
    truth = mask.ravel()
    iou = np.count_nonzero(top & truth) / np.count_nonzero(top | truth)
    hit = bool(truth[int(np.argmax(flat))])
    return float(iou), hit


def export_slices(saliency: SaliencyVolume, directory: str, stem: str) -> List[str]:
    """Saliency volume plus its three orthogonal mid-slices as PGM images."""
    grid = saliency.grid
    cx, cy, cz = (s // 2 for s in grid.shape)
    paths = [os.path.join(directory, f"{stem}.vol")]
    write_volume(paths[0], grid)
    for axis, image in (("x", grid[cx, :, :]), ("y", grid[:, cy, :]), ("z", grid[:, :, cz])):
        path = os.path.join(directory, f"{stem}_{axis}.pgm")
        write_pgm(path, image)
        paths.append(path)
    return paths
