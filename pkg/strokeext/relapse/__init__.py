#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : __init__.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 02.09.2026
# Last Modified Date: 17.10.2026

# Public names are re-exported here so callers do not need to know the
# module layout
# ex. without this:
# from strokeext.relapse.relapse_train import Trainer
# ex. with this:
# from strokeext.relapse import Trainer
from .relapse_types import (
    Gender,
    Task,
    Modality,
    Activation,
    Provenance,
    ThresholdDomain,
    TieRule,
    CIndexMode,
    OcclusionFill,
    VolumeBaseline,
    Attribute,
    RelapseError,
    ConfigError,
    PrerequisiteError,
    LeakageError,
)
from .relapse_config import (
    SynthConfig,
    SelectionConfig,
    ModelConfig,
    TrainConfig,
    OcclusionConfig,
    InterpretConfig,
    RunConfig,
    parse_config,
)
from .relapse_synth import PatientRecord, Cohort, synth_cohort, save_cohort, load_cohort
from .relapse_preprocess import (
    AgeStats,
    FeatureVector,
    Sample,
    compute_age_stats,
    encode_tabular,
    select_cohort,
    split_cohort,
    normalize_volume,
    prepare_samples,
)
from .relapse_model import FusionModel, init_model, forward, predict, loss_and_grad
from .relapse_model import save_checkpoint, load_checkpoint
from .relapse_train import Trainer, TrainHistory, impute_unknown_rfs, train, train_variant
from .relapse_thresholds import (
    ConfusionCounts,
    ThresholdReport,
    f_beta_score,
    confusion_at_theta,
    confusion_at_kappa,
    sweep_threshold,
    threshold_table,
)
from .relapse_metrics import EvalReport, roc_auc, c_index, evaluate_classifier, evaluate_regressor
from .relapse_interpret import (
    Baselines,
    ContributionReport,
    SaliencyVolume,
    compute_baselines,
    ablate_attribute,
    modality_contribution,
    occlusion_saliency,
    saliency_hit,
    export_slices,
)
from .relapse_cli import Pipeline, run_subcommand
