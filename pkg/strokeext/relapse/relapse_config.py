#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_config.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 02.09.2026
# Last Modified Date: 14.10.2026

import dataclasses
import hashlib
import json
import yaml

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Tuple

from .relapse_types import (
    Activation,
    ConfigError,
    Modality,
    OcclusionFill,
    Task,
    VolumeBaseline,
    parse_enum,
)

RISK_ATTRIBUTES = ("age_z", "gender", "chd", "pad", "lesion")
HEART_DISEASE_CLASSES = ("none", "chd_only", "pad_only", "both")

# Source cohort statistics (N = 119)
AGE_MEAN = 69.10
AGE_SD = 10.18
MALE_PROB = 0.664
CHD_PROB = 0.252
PAD_PROB = 0.218
HEART_DISEASE_JOINT = {"none": 0.580, "chd_only": 0.202, "pad_only": 0.168, "both": 0.050}


def _shape3(value, name: str) -> Tuple[int, int, int]:
    try:
        shape = tuple(int(v) for v in value)
    except TypeError:
        raise ConfigError(f"{name} must be a sequence of three integers, got {value!r}")
    if len(shape) != 3:
        raise ConfigError(f"{name} must have exactly three axes, got {len(shape)}")
    return shape


@dataclass
class SynthConfig:
    n_patients: int = 200
    volume_shape: Tuple[int, int, int] = (24, 24, 24)
    risk_weights: Dict[str, float] = field(
        default_factory=lambda: {
            "age_z": 0.8,
            "gender": 0.3,
            "chd": 0.5,
            "pad": 0.6,
            "lesion": 1.2,
        }
    )
    risk_bias: float = -0.4
    lesion_intensity_scale: float = 2.0
    rfs_scale: float = 3200.0
    rfs_noise_sd: float = 100.0
    rfs_max: float = 2555.0
    frac_unknown_rfs: float = 0.4
    unknown_slack_days: float = 400.0
    kappa_low: float = 1642.0
    male_prob: float = MALE_PROB
    chd_prob: float = CHD_PROB
    pad_prob: float = PAD_PROB
    heart_disease_joint: Optional[Dict[str, float]] = None
    background_amplitude: float = 0.2
    volume_noise_sd: float = 0.05
    lesion_noise_sd: float = 0.05
    lesion_radius: Tuple[float, float, float] = (3.0, 3.0, 4.0)
    seed: int = 0

    def __post_init__(self):
        self.volume_shape = _shape3(self.volume_shape, "synth.volume_shape")
        self.lesion_radius = tuple(float(r) for r in self.lesion_radius)
        self.risk_weights = {str(k): float(v) for k, v in dict(self.risk_weights).items()}
        if self.heart_disease_joint is not None:
            self.heart_disease_joint = {
                str(k): float(v) for k, v in dict(self.heart_disease_joint).items()
            }

    def validate(self) -> "SynthConfig":
        if self.n_patients <= 0:
            raise ConfigError(f"synth.n_patients must be > 0, got {self.n_patients}")
        if min(self.volume_shape) < 8:
            raise ConfigError(
                f"synth.volume_shape axes must be >= 8, got {self.volume_shape}"
            )
        if not 0.0 <= self.frac_unknown_rfs <= 1.0:
            raise ConfigError(
                f"synth.frac_unknown_rfs must lie in [0, 1], got {self.frac_unknown_rfs}"
            )
        for key in self.risk_weights:
            if key not in RISK_ATTRIBUTES:
                raise ConfigError(
                    f"synth.risk_weights has unknown attribute {key!r} "
                    f"(expected one of {', '.join(RISK_ATTRIBUTES)})"
                )
        if self.rfs_scale <= 0 or self.rfs_max < 1:
            raise ConfigError("synth.rfs_scale must be > 0 and synth.rfs_max >= 1")
        if self.rfs_noise_sd < 0 or self.volume_noise_sd < 0 or self.lesion_noise_sd < 0:
            raise ConfigError("synth noise standard deviations must be >= 0")
        if self.unknown_slack_days <= 0:
            raise ConfigError("synth.unknown_slack_days must be > 0")
        if len(self.lesion_radius) != 3 or min(self.lesion_radius) <= 0:
            raise ConfigError(f"synth.lesion_radius must be 3 positive reals, got {self.lesion_radius}")
        for name in ("male_prob", "chd_prob", "pad_prob"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ConfigError(f"synth.{name} must lie in (0, 1), got {p}")
        if self.heart_disease_joint is not None:
            if set(self.heart_disease_joint) != set(HEART_DISEASE_CLASSES):
                raise ConfigError(
                    "synth.heart_disease_joint must name exactly "
                    f"{', '.join(HEART_DISEASE_CLASSES)}"
                )
            total = sum(self.heart_disease_joint.values())
            if abs(total - 1.0) > 1e-6 or min(self.heart_disease_joint.values()) < 0:
                raise ConfigError(
                    f"synth.heart_disease_joint must be a probability vector, sums to {total}"
                )
        return self


@dataclass
class SelectionConfig:
    kappa_low: float = 1642.0
    kappa_high: float = 1825.0
    rfs_cap: float = 2555.0
    split_ratio: float = 0.8
    split_seed: int = 0
    exclude_beyond_cap: bool = False

    def validate(self) -> "SelectionConfig":
        if not self.kappa_low < self.kappa_high <= self.rfs_cap:
            raise ConfigError(
                "selection requires kappa_low < kappa_high <= rfs_cap, got "
                f"{self.kappa_low} / {self.kappa_high} / {self.rfs_cap}"
            )
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(
                f"selection.split_ratio must lie in (0, 1), got {self.split_ratio}"
            )
        return self

    @property
    def missing_rfs_substitute(self) -> float:
        return 0.5 * self.kappa_low


@dataclass
class ModelConfig:
    vision_channels: Tuple[int, ...] = (8, 16, 32)
    blocks_per_stage: int = 1
    vision_embed_dim: int = 32
    tabular_hidden: Tuple[int, ...] = (16, 16)
    tabular_embed_dim: int = 8
    fusion_hidden: Tuple[int, ...] = (16,)
    vision_activation: Activation = Activation.RELU
    tabular_activation: Activation = Activation.GELU
    fusion_activation: Activation = Activation.GELU
    task: Task = Task.CLASSIFY
    modality: Modality = Modality.MULTIMODAL
    volume_shape: Tuple[int, int, int] = (24, 24, 24)
    init_seed: int = 0

    n_features = 5

    def __post_init__(self):
        self.vision_channels = tuple(int(c) for c in self.vision_channels)
        self.tabular_hidden = tuple(int(c) for c in self.tabular_hidden)
        self.fusion_hidden = tuple(int(c) for c in self.fusion_hidden)
        self.volume_shape = _shape3(self.volume_shape, "model.volume_shape")
        self.vision_activation = parse_enum(Activation, self.vision_activation)
        self.tabular_activation = parse_enum(Activation, self.tabular_activation)
        self.fusion_activation = parse_enum(Activation, self.fusion_activation)
        self.task = parse_enum(Task, self.task)
        self.modality = parse_enum(Modality, self.modality)

    def validate(self) -> "ModelConfig":
        widths = {
            "vision_channels": self.vision_channels,
            "tabular_hidden": self.tabular_hidden,
            "fusion_hidden": self.fusion_hidden,
        }
        for name, values in widths.items():
            for w in values:
                if w <= 0:
                    raise ConfigError(f"model.{name} widths must be > 0, got {list(values)}")
        if not self.vision_channels:
            raise ConfigError("model.vision_channels needs at least one stage")
        if self.blocks_per_stage < 0:
            raise ConfigError("model.blocks_per_stage must be >= 0")
        if self.vision_embed_dim <= 0 or self.tabular_embed_dim <= 0:
            raise ConfigError("model embed dims must be > 0")
        if min(self.volume_shape) < 2 ** len(self.vision_channels):
            raise ConfigError(
                f"model.volume_shape {self.volume_shape} too small for "
                f"{len(self.vision_channels)} pooling stages"
            )
        return self

    @property
    def uses_vision(self) -> bool:
        return self.modality != Modality.TABULAR_ONLY

    @property
    def uses_tabular(self) -> bool:
        return self.modality != Modality.VISION_ONLY

    @property
    def fusion_input_dim(self) -> int:
        dim = 0
        if self.uses_vision:
            dim += self.vision_embed_dim
        if self.uses_tabular:
            dim += self.tabular_embed_dim
        return dim


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 16
    learning_rate: float = 0.01
    momentum: float = 0.9
    task: Task = Task.CLASSIFY
    seed: int = 0

    def __post_init__(self):
        self.task = parse_enum(Task, self.task)

    def validate(self) -> "TrainConfig":
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ConfigError(
                f"train.epochs and train.batch_size must be > 0, got "
                f"{self.epochs} / {self.batch_size}"
            )
        if self.learning_rate <= 0:
            raise ConfigError(f"train.learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"train.momentum must lie in [0, 1), got {self.momentum}")
        return self


@dataclass
class OcclusionConfig:
    patch: int = 6
    stride: int = 3
    fill: OcclusionFill = OcclusionFill.TRAIN_MEAN_INTENSITY

    def __post_init__(self):
        self.fill = parse_enum(OcclusionFill, self.fill)

    def validate(self, volume_shape: Optional[Iterable[int]] = None) -> "OcclusionConfig":
        if self.patch <= 0:
            raise ConfigError(f"occlusion.patch must be > 0, got {self.patch}")
        if not 0 < self.stride <= self.patch:
            raise ConfigError(
                f"occlusion.stride must satisfy 0 < stride <= patch, got {self.stride}"
            )
        if volume_shape is not None and self.patch > min(volume_shape):
            raise ConfigError(
                f"occlusion.patch {self.patch} exceeds the smallest volume side "
                f"{min(volume_shape)}"
            )
        return self


@dataclass
class InterpretConfig:
    volume_baseline: VolumeBaseline = VolumeBaseline.MEAN_INTENSITY
    top_fraction: float = 0.02
    saliency_cases: int = 4

    def __post_init__(self):
        self.volume_baseline = parse_enum(VolumeBaseline, self.volume_baseline)

    def validate(self) -> "InterpretConfig":
        if not 0.0 < self.top_fraction < 1.0:
            raise ConfigError(
                f"interpret.top_fraction must lie in (0, 1), got {self.top_fraction}"
            )
        if self.saliency_cases < 0:
            raise ConfigError("interpret.saliency_cases must be >= 0")
        return self


@dataclass
class SeedConfig:
    synth: int = 7
    split: int = 0
    train: int = 0


@dataclass
class PathConfig:
    data_dir: str = "data"
    model_dir: str = "models"
    report_dir: str = "reports"


# Keys owned by the top level of RunConfig and copied into the sections
_DERIVED_KEYS = {
    "synth": {"seed": "seeds.synth"},
    "selection": {"split_seed": "seeds.split"},
    "model": {
        "init_seed": "seeds.train",
        "task": "task",
        "modality": "variant",
        "volume_shape": "synth.volume_shape",
    },
    "train": {"seed": "seeds.train", "task": "task"},
}

_SECTIONS = {
    "synth": SynthConfig,
    "selection": SelectionConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "occlusion": OcclusionConfig,
    "interpret": InterpretConfig,
    "seeds": SeedConfig,
    "paths": PathConfig,
}

_SCALARS = ("variant", "task", "beta")


@dataclass
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    occlusion: OcclusionConfig = field(default_factory=OcclusionConfig)
    interpret: InterpretConfig = field(default_factory=InterpretConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    paths: PathConfig = field(default_factory=PathConfig)
    variant: Modality = Modality.MULTIMODAL
    task: Task = Task.REGRESS
    beta: float = 1.0

    def __post_init__(self):
        self.variant = parse_enum(Modality, self.variant)
        self.task = parse_enum(Task, self.task)
        self._propagate()

    def _propagate(self) -> None:
        self.synth.seed = self.seeds.synth
        self.selection.split_seed = self.seeds.split
        self.train.seed = self.seeds.train
        self.train.task = self.task
        self.model.init_seed = self.seeds.train
        self.model.task = self.task
        self.model.modality = self.variant
        self.model.volume_shape = self.synth.volume_shape

    def validate(self) -> "RunConfig":
        self._propagate()
        self.synth.validate()
        self.selection.validate()
        self.model.validate()
        self.train.validate()
        self.occlusion.validate(self.synth.volume_shape)
        self.interpret.validate()
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.synth.kappa_low != self.selection.kappa_low:
            raise ConfigError(
                "synth.kappa_low must equal selection.kappa_low "
                f"({self.synth.kappa_low} != {self.selection.kappa_low})"
            )
        return self

    def canonical(self) -> Dict[str, Any]:
        out = {}
        for name in _SECTIONS:
            section = getattr(self, name)
            out[name] = {
                f.name: _plain(getattr(section, f.name))
                for f in dataclasses.fields(section)
                if f.name not in _DERIVED_KEYS.get(name, {})
            }
        for name in _SCALARS:
            out[name] = _plain(getattr(self, name))
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.canonical(), sort_keys=True, default_flow_style=False)

    def section_hash(self, *names: str) -> str:
        """SHA-256 over the canonical JSON of the named sections, scalars or
        single `section.key` entries."""
        canonical = self.canonical()
        payload = {}
        for name in sorted(names):
            section, _, key = name.partition(".")
            payload[name] = canonical[section][key] if key else canonical[section]
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _plain(value):
    if isinstance(value, (Activation, Task, Modality, OcclusionFill, VolumeBaseline)):
        return value.name.lower()
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in sorted(value.items())}
    return value


def _build_section(name: str, data: Any):
    cls = _SECTIONS[name]
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key in _DERIVED_KEYS.get(name, {}):
            raise ConfigError(
                f"key {name}.{key} is set through {_DERIVED_KEYS[name][key]}"
            )
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value in section {name!r}: {exc}")


def run_config_from_dict(data: Optional[Dict[str, Any]]) -> RunConfig:
    """Build and validate a RunConfig from a plain mapping."""
    data = dict(data or {})
    for key in data:
        if key not in _SECTIONS and key not in _SCALARS:
            raise ConfigError(f"unknown key {key}")
    kwargs = {name: _build_section(name, data.get(name)) for name in _SECTIONS}
    for name in _SCALARS:
        if name in data:
            kwargs[name] = data[name]
    try:
        cfg = RunConfig(**kwargs)
        cfg.beta = float(cfg.beta)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid top-level value: {exc}")
    return cfg.validate()


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply `section.key=value` overrides; values are parsed as YAML scalars."""
    data = dict(data or {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {dotted}: cannot parse value {raw!r} ({exc})")
        parts = dotted.strip().split(".")
        if len(parts) == 1:
            data[parts[0]] = value
        elif len(parts) == 2:
            section = dict(data.get(parts[0]) or {})
            section[parts[1]] = value
            data[parts[0]] = section
        else:
            raise ConfigError(f"override key {dotted!r} nests deeper than section.key")
    return data


def parse_config(path: Optional[str], overrides: Iterable[str] = ()) -> RunConfig:
    """Read a YAML run config, apply overrides and validate it."""
    data = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else path
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(f"{where}: {problem}")
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    return run_config_from_dict(apply_overrides(data, overrides))
