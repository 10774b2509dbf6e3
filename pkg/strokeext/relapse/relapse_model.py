#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_model.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 05.09.2026
# Last Modified Date: 16.10.2026

import json
import logging
import math
import os
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from collections import namedtuple
from typing import Dict, List, Optional, Sequence, Tuple

from .relapse_config import ModelConfig
from .relapse_types import (
    Activation,
    FormatError,
    NumericError,
    ShapeError,
    Task,
    parse_enum,
)

log = logging.getLogger("strokeext.relapse.model")

CHECKPOINT_MAGIC = b"SRLPCKPT"
CHECKPOINT_VERSION = 1

BatchItem = namedtuple("BatchItem", ["volume", "features", "target", "id"], defaults=[None])


def _activation(kind: Activation) -> nn.Module:
    return nn.ReLU() if kind == Activation.RELU else nn.GELU()


class ResBlock3d(nn.Module):
    """x + conv(act(conv(x))); identity when both convolutions are zero."""

    def __init__(self, channels: int, activation: Activation):
        super().__init__()
        self.conv1 = nn.Conv3d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv3d(channels, channels, 3, padding=1)
        self.act = _activation(activation)

    def forward(self, x):
        return x + self.conv2(self.act(self.conv1(x)))


class VisionEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        layers = []
        in_ch = 1
        for width in config.vision_channels:
            layers.append(nn.Conv3d(in_ch, width, 3, padding=1))
            layers.append(_activation(config.vision_activation))
            for _ in range(config.blocks_per_stage):
                layers.append(ResBlock3d(width, config.vision_activation))
            layers.append(nn.MaxPool3d(2))
            in_ch = width
        self.stages = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool3d(1)
        self.fc = nn.Linear(in_ch, config.vision_embed_dim)
        self.act = _activation(config.vision_activation)

    def forward(self, volume):
        x = self.pool(self.stages(volume)).flatten(1)
        return self.act(self.fc(x))


def _mlp(in_dim: int, hidden: Sequence[int], out_dim: int, activation: Activation) -> nn.Sequential:
    layers = []
    for width in hidden:
        layers += [nn.Linear(in_dim, width), _activation(activation)]
        in_dim = width
    layers += [nn.Linear(in_dim, out_dim), _activation(activation)]
    return nn.Sequential(*layers)


class FusionModel(nn.Module):
    """Late fusion: per-modality embeddings concatenated into an MLP head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.vision = VisionEncoder(config) if config.uses_vision else None
        self.tabular = (
            _mlp(
                config.n_features,
                config.tabular_hidden,
                config.tabular_embed_dim,
                config.tabular_activation,
            )
            if config.uses_tabular
            else None
        )
        layers = []
        in_dim = config.fusion_input_dim
        for width in config.fusion_hidden:
            layers += [nn.Linear(in_dim, width), _activation(config.fusion_activation)]
            in_dim = width
        layers.append(nn.Linear(in_dim, 1))
        self.fusion = nn.Sequential(*layers)

    @property
    def task(self) -> Task:
        return self.config.task

    def _check_inputs(self, volume, features) -> None:
        if self.vision is not None:
            if volume is None or tuple(volume.shape[-3:]) != self.config.volume_shape:
                got = None if volume is None else tuple(volume.shape)
                raise ShapeError(
                    f"volume shape {got} does not match expected {self.config.volume_shape}"
                )
        if self.tabular is not None:
            if features is None or features.shape[-1] != self.config.n_features:
                got = None if features is None else tuple(features.shape)
                raise ShapeError(f"features shape {got}, expected (*, {self.config.n_features})")

    def embed(self, volume, features):
        """Return (fusion logit, vision embedding, tabular embedding) for a batch."""
        self._check_inputs(volume, features)
        parts = []
        v_emb = t_emb = None
        if self.vision is not None:
            v_emb = self.vision(volume.unsqueeze(1) if volume.dim() == 4 else volume)
            parts.append(v_emb)
        if self.tabular is not None:
            t_emb = self.tabular(features)
            parts.append(t_emb)
        logit = self.fusion(torch.cat(parts, dim=1)).squeeze(1)
        return logit, v_emb, t_emb

    def head(self, logit, task: Optional[Task] = None):
        task = self.task if task is None else task
        return torch.sigmoid(logit) if task == Task.CLASSIFY else logit

    def forward(self, volume, features):
        logit, _, _ = self.embed(volume, features)
        return self.head(logit)


def _fan_in_uniform_(model: nn.Module, seed: int) -> None:
    g = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, (nn.Linear, nn.Conv3d)):
                bound = 1.0 / math.sqrt(module.weight[0].numel())
                module.weight.copy_(
                    torch.empty_like(module.weight).uniform_(-bound, bound, generator=g)
                )
                if module.bias is not None:
                    module.bias.copy_(
                        torch.empty_like(module.bias).uniform_(-bound, bound, generator=g)
                    )


def init_model(config: ModelConfig) -> FusionModel:
    """Build the graph for config.modality with fan-in scaled uniform weights."""
    config.validate()
    model = FusionModel(config)
    _fan_in_uniform_(model, config.init_seed)
    return model


def _dtype(model: nn.Module) -> torch.dtype:
    return next(model.parameters()).dtype


def _as_tensor(array, dtype) -> Optional[torch.Tensor]:
    if array is None:
        return None
    if isinstance(array, torch.Tensor):
        return array.to(dtype)
    return torch.as_tensor(np.asarray(array), dtype=dtype)


def forward(
    params: FusionModel, volume, features, task: Optional[Task] = None
) -> Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    """Single-patient inference; returns (output, vision emb, tabular emb)."""
    dtype = _dtype(params)
    vol = _as_tensor(volume, dtype)
    feat = _as_tensor(features, dtype)
    with torch.no_grad():
        logit, v_emb, t_emb = params.embed(
            None if vol is None else vol.unsqueeze(0),
            None if feat is None else feat.unsqueeze(0),
        )
        out = params.head(logit, None if task is None else parse_enum(Task, task))
    return (
        float(out[0]),
        None if v_emb is None else v_emb[0].numpy().copy(),
        None if t_emb is None else t_emb[0].numpy().copy(),
    )


def predict(params: FusionModel, volumes, features, batch_size: int = 32) -> np.ndarray:
    """Batched inference over stacked inputs (N, X, Y, Z) and (N, 5)."""
    dtype = _dtype(params)
    n = len(features) if features is not None else len(volumes)
    outputs = []
    with torch.no_grad():
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            vol = None if volumes is None else _as_tensor(volumes[start:stop], dtype)
            feat = None if features is None else _as_tensor(features[start:stop], dtype)
            outputs.append(params(vol, feat).numpy().astype(np.float64))
    return np.concatenate(outputs) if outputs else np.zeros(0)


def _stack_batch(batch, dtype):
    items = [BatchItem(*item) if not isinstance(item, BatchItem) else item for item in batch]
    volumes = torch.stack([_as_tensor(i.volume, dtype) for i in items])
    features = torch.stack([_as_tensor(i.features, dtype) for i in items])
    targets = torch.as_tensor([float(i.target) for i in items], dtype=dtype)
    ids = [i.id for i in items]
    return volumes, features, targets, ids


def batch_loss(params: FusionModel, volumes, features, targets, ids=None, task=None):
    """Mean loss tensor: BCE on the logit (classify) or MSE (regress)."""
    task = params.task if task is None else parse_enum(Task, task)
    logit, _, _ = params.embed(volumes, features)
    if task == Task.CLASSIFY:
        per_sample = F.binary_cross_entropy_with_logits(logit, targets, reduction="none")
    else:
        per_sample = (logit - targets) ** 2
    finite = torch.isfinite(per_sample)
    if not bool(finite.all()):
        bad = int((~finite).nonzero()[0, 0])
        record_id = ids[bad] if ids is not None else bad
        raise NumericError(f"non-finite loss for record {record_id}", record_id=record_id)
    return per_sample.mean()


def loss_and_grad(
    params: FusionModel, batch: Sequence, task: Optional[Task] = None
) -> Tuple[float, Dict[str, torch.Tensor]]:
    """Loss and exact gradient w.r.t. every parameter, leaving .grad untouched."""
    if len(batch) == 0:
        raise ShapeError("loss_and_grad needs a non-empty batch")
    volumes, features, targets, ids = _stack_batch(batch, _dtype(params))
    named = list(params.named_parameters())
    loss = batch_loss(params, volumes, features, targets, ids, task)
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    out = {}
    for (name, p), g in zip(named, grads):
        out[name] = torch.zeros_like(p) if g is None else g.detach()
    return float(loss.detach()), out


def model_config_dict(config: ModelConfig) -> dict:
    return {
        "vision_channels": list(config.vision_channels),
        "blocks_per_stage": config.blocks_per_stage,
        "vision_embed_dim": config.vision_embed_dim,
        "tabular_hidden": list(config.tabular_hidden),
        "tabular_embed_dim": config.tabular_embed_dim,
        "fusion_hidden": list(config.fusion_hidden),
        "vision_activation": config.vision_activation.name.lower(),
        "tabular_activation": config.tabular_activation.name.lower(),
        "fusion_activation": config.fusion_activation.name.lower(),
        "task": config.task.name.lower(),
        "modality": config.modality.name.lower(),
        "volume_shape": list(config.volume_shape),
        "init_seed": config.init_seed,
    }


def canonical_parameters(params: FusionModel) -> List[Tuple[str, torch.Tensor]]:
    """Parameter order of the checkpoint payload (module registration order)."""
    return list(params.state_dict().items())


def save_checkpoint(path: str, params: FusionModel, extra: Optional[dict] = None) -> None:
    """Magic, uint32 version, uint32 header length, JSON header, float32 LE payload."""
    tensors = canonical_parameters(params)
    header = {
        "config": model_config_dict(params.config),
        "extra": extra or {},
        "parameters": [[name, list(t.shape)] for name, t in tensors],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(CHECKPOINT_VERSION.to_bytes(4, "little"))
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        for _, t in tensors:
            fh.write(t.detach().cpu().numpy().astype("<f4").tobytes(order="C"))
    log.info(f"saved checkpoint {path} ({sum(t.numel() for _, t in tensors)} parameters)")


def load_checkpoint(path: str) -> Tuple[FusionModel, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic {data[:8]!r}")
    pos = len(CHECKPOINT_MAGIC)
    version = int.from_bytes(data[pos : pos + 4], "little")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    length = int.from_bytes(data[pos + 4 : pos + 8], "little")
    pos += 8
    header = json.loads(data[pos : pos + length].decode("utf-8"))
    pos += length

    model = FusionModel(ModelConfig(**header["config"]).validate())
    state = {}
    for name, shape in header["parameters"]:
        count = int(np.prod(shape)) if shape else 1
        chunk = data[pos : pos + 4 * count]
        if len(chunk) != 4 * count:
            raise FormatError(f"{path}: payload truncated at parameter {name}")
        state[name] = torch.from_numpy(
            np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float32)
        )
        pos += 4 * count
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes after payload")
    model.load_state_dict(state)
    return model, header["extra"]
