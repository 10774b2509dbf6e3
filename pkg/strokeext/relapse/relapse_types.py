#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_types.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 02.09.2026
# Last Modified Date: 11.10.2026

import enum


class Gender(enum.IntEnum):
    FEMALE = 0
    MALE = 1


class Task(enum.IntEnum):
    CLASSIFY = 0
    REGRESS = 1


class Modality(enum.IntEnum):
    TABULAR_ONLY = 0
    VISION_ONLY = 1
    MULTIMODAL = 2


class Activation(enum.IntEnum):
    RELU = 0
    GELU = 1


class Provenance(enum.IntEnum):
    SYNTHETIC = 0
    EXTERNAL = 1


class ThresholdDomain(enum.IntEnum):
    THETA_UNIT_INTERVAL = 0
    KAPPA_DAYS = 1


class TieRule(enum.IntEnum):
    LOWEST_ARGMAX = 0


class CIndexMode(enum.IntEnum):
    ALL = 0
    RELAPSES_ONLY = 1
    IGNORE_CENSORING = 2


class OcclusionFill(enum.IntEnum):
    TRAIN_MEAN_INTENSITY = 0
    ZERO = 1


class VolumeBaseline(enum.IntEnum):
    MEAN_INTENSITY = 0
    MEAN_VOLUME = 1


class Attribute(enum.IntEnum):
    VOLUME = 0
    AGE = 1
    GENDER = 2
    CHD = 3
    PAD = 4


# Attributes grouped by the modality that feeds them into the network
MODALITY_ATTRIBUTES = {
    "vision": (Attribute.VOLUME,),
    "tabular": (Attribute.AGE, Attribute.GENDER, Attribute.CHD, Attribute.PAD),
}


def parse_enum(enum_cls, value):
    """Accept an enum member, its name (any case) or its integer value."""
    if isinstance(value, enum_cls):
        return value
    if isinstance(value, str):
        try:
            return enum_cls[value.strip().upper()]
        except KeyError:
            pass
    elif isinstance(value, int) and not isinstance(value, bool):
        try:
            return enum_cls(value)
        except ValueError:
            pass
    choices = ", ".join(m.name.lower() for m in enum_cls)
    raise ConfigError(f"{value!r} is not a valid {enum_cls.__name__} ({choices})")


class RelapseError(Exception):
    """Root of every error raised by strokeext.relapse."""


class ConfigError(RelapseError, ValueError):
    pass


class InsufficientDataError(RelapseError, ValueError):
    pass


class DegenerateStatisticsError(RelapseError, ValueError):
    pass


class ShapeError(RelapseError, ValueError):
    pass


class NumericError(RelapseError, ArithmeticError):
    def __init__(self, message, record_id=None, epoch=None):
        super().__init__(message)
        self.record_id = record_id
        self.epoch = epoch


class RangeError(RelapseError, ValueError):
    pass


class UndefinedOptimumError(RelapseError, ValueError):
    pass


class UndefinedMetricError(RelapseError, ValueError):
    pass


class DegenerateContributionError(RelapseError, ValueError):
    pass


class ArgumentError(RelapseError, ValueError):
    pass


class FormatError(RelapseError, ValueError):
    pass


class PrerequisiteError(RelapseError):
    pass


class ConfigHashMismatchError(PrerequisiteError):
    pass


class LeakageError(RelapseError):
    pass
