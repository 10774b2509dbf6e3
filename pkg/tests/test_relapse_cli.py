# -*- coding: utf-8 -*-
# File              : test_relapse_cli.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 12.09.2026
# Last Modified Date: 17.10.2026

import os
import pytest

from strokeext.relapse import RunConfig, parse_config, run_subcommand
from strokeext.relapse.relapse_cli import main
from strokeext.relapse.relapse_io import read_key_values, read_table

SMALL_RUN = [
    "synth.n_patients=60",
    "synth.volume_shape=[8,8,8]",
    "synth.lesion_radius=[1.5,1.5,2.0]",
    "model.vision_channels=[2,3]",
    "model.vision_embed_dim=4",
    "model.tabular_hidden=[4]",
    "model.tabular_embed_dim=3",
    "model.fusion_hidden=[4]",
    "train.epochs=2",
    "train.batch_size=8",
    "occlusion.patch=4",
    "occlusion.stride=4",
    "interpret.saliency_cases=2",
]


def flags(root, *extra):
    args = []
    for item in SMALL_RUN + [
        f"paths.data_dir={root}/data",
        f"paths.model_dir={root}/models",
        f"paths.report_dir={root}/reports",
    ]:
        args += ["--set", item]
    return args + list(extra)


def run_pipeline(root, tasks=("regress", "classify"), variant="multimodal"):
    assert main(["synth"] + flags(root)) == 0
    for task in tasks:
        for stage in ("train", "sweep", "eval", "explain"):
            status = main([stage] + flags(root, "--task", task, "--variant", variant, "--seed-train", "3"))
            assert status == 0, f"{stage} ({task}) exited {status}"
    assert main(["report"] + flags(root, "--seed-train", "3")) == 0


def test_full_pipeline(tmp_path):
    root = str(tmp_path)
    run_pipeline(root)
    assert os.path.exists(os.path.join(root, "data", "manifest.csv.sha"))
    run = os.path.join(root, "models", "regress_multimodal")
    for name in ("model.ckpt", "history.csv", "threshold.csv", "threshold.txt"):
        assert os.path.exists(os.path.join(run, name))
        assert os.path.exists(os.path.join(run, name + ".sha"))
    kappa = float(read_key_values(os.path.join(run, "threshold.txt"))["threshold"])
    assert 1642.0 <= kappa <= 1825.0

    reports = os.path.join(root, "reports")
    regression = read_table(os.path.join(reports, "regression_table.csv"))
    assert list(regression["variant"]) == ["multimodal"]
    assert 0.0 <= regression["c_index"][0] <= 1.0
    classification = read_table(os.path.join(reports, "classification_table.csv"))
    assert list(classification["task"]) == ["classify"]
    contribution = read_table(os.path.join(reports, "contribution_table.csv"))
    totals = contribution[["volume", "age", "gender", "chd", "pad"]].sum(axis=1)
    assert totals.tolist() == pytest.approx([1.0, 1.0], abs=1e-5)
    by_beta = read_table(os.path.join(reports, "thresholds_table.csv"))
    assert sorted(set(by_beta["beta"])) == [0.5, 1.0, 2.0, 4.0]
    for name in ("classification_table.csv", "regression_table.csv", "thresholds_table.csv"):
        assert os.path.exists(os.path.join(reports, name + ".sha"))

    cases = read_table(os.path.join(reports, "regress_multimodal", "saliency.csv"))
    assert set(cases["outcome"]) <= {"tp", "tn"}
    assert all(cases["label"] == (cases["outcome"] == "tp").astype(int))
    saliency = os.path.join(reports, "regress_multimodal", "saliency")
    exported = [name for name in os.listdir(saliency) if not name.endswith(".sha")]
    assert any(name.endswith("_z.pgm") for name in exported)
    assert all(os.path.exists(os.path.join(saliency, name + ".sha")) for name in exported)


def test_rerun_is_byte_identical(tmp_path):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    run_pipeline(first, tasks=("regress",), variant="tabular_only")
    run_pipeline(second, tasks=("regress",), variant="tabular_only")
    for name in ("regression_table.csv", "contribution_table.csv", "thresholds_table.csv"):
        left, right = (os.path.join(root, "reports", name) for root in (first, second))
        with open(left, "rb") as a, open(right, "rb") as b:
            assert a.read() == b.read(), name
    run = os.path.join("models", "regress_tabular_only", "history.csv")
    with open(os.path.join(first, run), "rb") as a, open(os.path.join(second, run), "rb") as b:
        assert a.read() == b.read()


def test_report_refuses_runs_from_another_config(tmp_path, caplog):
    root = str(tmp_path)
    run_pipeline(root, tasks=("regress",), variant="tabular_only")
    # same runs, different beta: every input was produced under another config
    assert main(["report"] + flags(root, "--seed-train", "3", "--beta", "2")) == 2
    assert "config hash" in caplog.text

    sidecar = os.path.join(root, "reports", "regress_tabular_only", "eval.csv.sha")
    with open(sidecar, "w") as fh:
        fh.write("0" * 16 + "\n")
    caplog.clear()
    assert main(["report"] + flags(root, "--seed-train", "3")) == 2
    assert "eval.csv was produced with config hash 0000000000000000" in caplog.text


def test_stage_prerequisites(tmp_path, caplog):
    root = str(tmp_path)
    assert main(["train"] + flags(root)) == 2
    assert "run 'synth' first" in caplog.text
    assert main(["synth"] + flags(root)) == 0
    assert main(["train"] + flags(root, "--task", "classify")) == 0
    # eval before sweep
    assert main(["eval"] + flags(root, "--task", "classify")) == 2
    assert "run 'sweep' first" in caplog.text
    # thresholds are never fixed on the test split
    assert main(["sweep"] + flags(root, "--task", "classify", "--split", "test")) == 2
    # a checkpoint trained under another config is refused
    assert main(["sweep"] + flags(root, "--task", "classify", "--set", "train.epochs=3")) == 2
    assert "config hash" in caplog.text
    assert main(["sweep"] + flags(root, "--task", "classify")) == 0
    assert main(["eval"] + flags(root, "--task", "classify")) == 0
    # data regenerated under another seed invalidates everything downstream
    assert main(["synth"] + flags(root, "--seed-synth", "99")) == 0
    assert main(["eval"] + flags(root, "--task", "classify")) == 2


def test_report_without_runs(tmp_path):
    config = parse_config(None, [f"paths.report_dir={tmp_path}/none"])
    assert run_subcommand("report", config) == 2


def test_run_subcommand_applies_overrides(tmp_path):
    config = RunConfig()
    overrides = SMALL_RUN + [f"paths.data_dir={tmp_path}/data"]
    assert run_subcommand("synth", config, overrides) == 0
    manifest = read_table(os.path.join(str(tmp_path), "data", "manifest.csv"))
    assert len(manifest) == 60
    assert run_subcommand("bogus", config) == 2


def test_bad_config_exits_with_status_2(tmp_path):
    assert main(["synth", "--set", "selection.kapa_low=1"]) == 2
    path = tmp_path / "bad.yaml"
    path.write_text("synth: [\n")
    assert main(["synth", "--config", str(path)]) == 2
