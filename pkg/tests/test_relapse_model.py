# -*- coding: utf-8 -*-
# File              : test_relapse_model.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 05.09.2026
# Last Modified Date: 16.10.2026

import math
import random
import numpy as np
import pytest
import torch

from const import cfg
from strokeext.relapse import (
    Activation,
    Modality,
    ModelConfig,
    Task,
    forward,
    init_model,
    load_checkpoint,
    loss_and_grad,
    predict,
    save_checkpoint,
)
from strokeext.relapse.relapse_model import BatchItem, ResBlock3d
from strokeext.relapse.relapse_types import ConfigError, FormatError, NumericError, ShapeError


def small_config(**kwargs):
    return ModelConfig(**dict(cfg.SMALL_MODEL, **kwargs)).validate()


def random_batch(rng, n, task, shape=cfg.SMALL_SHAPE):
    batch = []
    for i in range(n):
        target = float(rng.integers(0, 2)) if task == Task.CLASSIFY else float(rng.uniform(0.1, 1.0))
        features = np.array([rng.normal(), 0.0, 1.0, float(rng.integers(0, 2)), float(rng.integers(0, 2))])
        if i % 2:
            features[1:3] = (1.0, 0.0)
        batch.append(BatchItem(rng.normal(size=shape), features, target, f"B{i}"))
    return batch


# Smooth activations keep central differences away from ReLU kinks
GRADCHECK_CONFIGS = [
    dict(modality=Modality.MULTIMODAL, task=Task.CLASSIFY, init_seed=0),
    dict(modality=Modality.MULTIMODAL, task=Task.REGRESS, init_seed=1, blocks_per_stage=2),
    dict(modality=Modality.TABULAR_ONLY, task=Task.CLASSIFY, init_seed=2, tabular_hidden=(5, 4)),
    dict(modality=Modality.VISION_ONLY, task=Task.REGRESS, init_seed=3, vision_channels=(3,)),
    dict(modality=Modality.MULTIMODAL, task=Task.REGRESS, init_seed=4, fusion_hidden=(), blocks_per_stage=0),
    dict(modality=Modality.VISION_ONLY, task=Task.CLASSIFY, init_seed=5, fusion_hidden=(3, 3)),
]


@pytest.mark.parametrize("overrides", GRADCHECK_CONFIGS)
def test_gradient_matches_central_differences(overrides):
    config = small_config(vision_activation=Activation.GELU, **overrides)
    model = init_model(config).double()
    rng = np.random.default_rng(config.init_seed + 100)
    batch = random_batch(rng, 4, config.task)
    _, grads = loss_and_grad(model, batch)

    params = dict(model.named_parameters())
    picker = random.Random(config.init_seed)
    eps = 1e-5
    checked = 0
    for _ in range(20):
        name = picker.choice(sorted(params))
        tensor = params[name]
        flat_index = picker.randrange(tensor.numel())
        idx = tuple(int(i) for i in np.unravel_index(flat_index, tuple(tensor.shape)))
        original = tensor[idx].item()
        values = []
        for shifted in (original + eps, original - eps):
            with torch.no_grad():
                tensor[idx] = shifted
            values.append(loss_and_grad(model, batch)[0])
        with torch.no_grad():
            tensor[idx] = original
        plus, minus = values
        numeric = (plus - minus) / (2 * eps)
        analytic = grads[name][idx].item()
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-5)
        if rel > 1e-4:
            print("------ERROR------")
            print(f"{name}{list(idx)}: analytic {analytic!r} numeric {numeric!r}")
        assert rel <= 1e-4
        checked += 1
    assert checked == 20


def test_residual_block_identity():
    block = ResBlock3d(3, Activation.RELU).double()
    with torch.no_grad():
        for p in block.parameters():
            p.zero_()
    x = torch.randn(2, 3, 4, 4, 4, dtype=torch.float64)
    assert torch.equal(block(x), x)


def test_init_is_seeded():
    a = init_model(small_config(init_seed=7)).state_dict()
    b = init_model(small_config(init_seed=7)).state_dict()
    c = init_model(small_config(init_seed=8)).state_dict()
    assert all(torch.equal(a[k], b[k]) for k in a)
    assert not all(torch.equal(a[k], c[k]) for k in a)


def test_modality_graphs_ignore_excised_inputs():
    rng = np.random.default_rng(cfg.RANDOM_SEED)
    vol_a, vol_b = rng.normal(size=(2,) + cfg.SMALL_SHAPE)
    feat_a = np.array([0.5, 1.0, 0.0, 1.0, 0.0])
    feat_b = np.array([-1.5, 0.0, 1.0, 0.0, 1.0])

    tab = init_model(small_config(modality=Modality.TABULAR_ONLY))
    assert forward(tab, vol_a, feat_a)[0] == forward(tab, vol_b, feat_a)[0]
    assert forward(tab, None, feat_a)[1] is None

    vis = init_model(small_config(modality=Modality.VISION_ONLY))
    assert forward(vis, vol_a, feat_a)[0] == forward(vis, vol_a, feat_b)[0]
    assert forward(vis, vol_a, None)[2] is None

    multi = init_model(small_config())
    out, v_emb, t_emb = forward(multi, vol_a, feat_a)
    assert 0.0 < out < 1.0
    assert v_emb.shape == (4,) and t_emb.shape == (3,)


def test_shape_errors():
    model = init_model(small_config())
    with pytest.raises(ShapeError):
        forward(model, np.zeros((6, 8, 8)), np.zeros(5))
    with pytest.raises(ShapeError):
        forward(model, np.zeros(cfg.SMALL_SHAPE), np.zeros(4))
    with pytest.raises(ShapeError):
        loss_and_grad(model, [])


def test_predict_matches_forward():
    model = init_model(small_config(task=Task.REGRESS))
    rng = np.random.default_rng(3)
    volumes = rng.normal(size=(5,) + cfg.SMALL_SHAPE)
    features = rng.normal(size=(5, 5))
    batched = predict(model, volumes, features, batch_size=2)
    single = [forward(model, v, f)[0] for v, f in zip(volumes, features)]
    assert batched == pytest.approx(single, rel=1e-5, abs=1e-6)


def test_loss_examples():
    rng = np.random.default_rng(0)
    model = init_model(small_config()).double()
    last = model.fusion[-1]
    with torch.no_grad():
        last.weight.zero_()
        last.bias.zero_()
    batch = [BatchItem(rng.normal(size=cfg.SMALL_SHAPE), np.array([0.0, 0.0, 1.0, 0.0, 0.0]), 1.0)]
    loss, _ = loss_and_grad(model, batch)
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    reg = init_model(small_config(task=Task.REGRESS)).double()
    with torch.no_grad():
        reg.fusion[-1].weight.zero_()
        reg.fusion[-1].bias.fill_(0.4)
    batch = [BatchItem(rng.normal(size=cfg.SMALL_SHAPE), np.array([0.0, 1.0, 0.0, 1.0, 0.0]), 0.4)]
    loss, grads = loss_and_grad(reg, batch)
    assert loss == pytest.approx(0.0, abs=1e-24)
    assert float(grads["fusion.%d.bias" % (len(reg.fusion) - 1)].abs().max()) == pytest.approx(0.0, abs=1e-12)


def test_loss_ignores_batch_order():
    rng = np.random.default_rng(cfg.RANDOM_SEED)
    for task in (Task.CLASSIFY, Task.REGRESS):
        model = init_model(small_config(task=task)).double()
        batch = random_batch(rng, 6, task)
        shuffled = [batch[i] for i in rng.permutation(len(batch))]
        loss, grads = loss_and_grad(model, batch)
        loss_shuffled, grads_shuffled = loss_and_grad(model, shuffled)
        assert loss_shuffled == pytest.approx(loss, rel=1e-12)
        for name in grads:
            assert torch.allclose(grads[name], grads_shuffled[name], rtol=1e-10, atol=1e-14), name


def test_zeroed_tabular_encoder_is_vision_only_plus_bias():
    multi = init_model(small_config(task=Task.REGRESS, fusion_hidden=(), init_seed=2)).double()
    vis = init_model(
        small_config(task=Task.REGRESS, fusion_hidden=(), modality=Modality.VISION_ONLY, init_seed=5)
    ).double()
    vdim = multi.config.vision_embed_dim
    with torch.no_grad():
        vis.vision.load_state_dict(multi.vision.state_dict())
        for p in multi.tabular.parameters():
            p.zero_()
        multi.tabular[-2].bias.fill_(0.3)
        vis.fusion[0].weight.copy_(multi.fusion[0].weight[:, :vdim])
        vis.fusion[0].bias.copy_(multi.fusion[0].bias)

    rng = np.random.default_rng(cfg.RANDOM_SEED)
    volumes = rng.normal(size=(5,) + cfg.SMALL_SHAPE)
    features = rng.normal(size=(5, 5))
    diff = predict(multi, volumes, features) - predict(vis, volumes, None)
    t_emb = forward(multi, volumes[0], features[0])[2]
    expected = float(multi.fusion[0].weight[0, vdim:].detach().numpy() @ t_emb)
    print(f"diff {diff} expected {expected}")
    assert expected != 0.0
    assert np.allclose(diff, expected, rtol=0.0, atol=1e-12)


@pytest.mark.parametrize(
    "widths", [dict(tabular_hidden=(4, 0)), dict(fusion_hidden=(0,)), dict(vision_channels=(2, 0))]
)
def test_zero_width_layer_is_rejected(widths):
    with pytest.raises(ConfigError):
        init_model(ModelConfig(**dict(cfg.SMALL_MODEL, **widths)))


def test_non_finite_loss_names_record():
    model = init_model(small_config(task=Task.REGRESS))
    batch = [
        BatchItem(np.zeros(cfg.SMALL_SHAPE), np.zeros(5), 0.5, "ok"),
        BatchItem(np.zeros(cfg.SMALL_SHAPE), np.zeros(5), float("nan"), "bad"),
    ]
    with pytest.raises(NumericError, match="bad") as info:
        loss_and_grad(model, batch)
    assert info.value.record_id == "bad"


def test_checkpoint_round_trip(tmp_path):
    model = init_model(small_config(task=Task.REGRESS, init_seed=12))
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(path, model, extra={"age_stats": [69.1, 10.18]})
    loaded, extra = load_checkpoint(path)
    assert extra == {"age_stats": [69.1, 10.18]}
    assert loaded.config == model.config
    for (name, a), (_, b) in zip(model.state_dict().items(), loaded.state_dict().items()):
        assert torch.equal(a, b), name
    rng = np.random.default_rng(1)
    vol, feat = rng.normal(size=cfg.SMALL_SHAPE), rng.normal(size=5)
    assert forward(loaded, vol, feat)[0] == forward(model, vol, feat)[0]


def test_checkpoint_rejects_corruption(tmp_path):
    model = init_model(small_config())
    path = tmp_path / "model.ckpt"
    save_checkpoint(str(path), model)
    data = path.read_bytes()
    (tmp_path / "magic.ckpt").write_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(str(tmp_path / "magic.ckpt"))
    (tmp_path / "short.ckpt").write_bytes(data[:-3])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(str(tmp_path / "short.ckpt"))
