#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_cli.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 12.09.2026
# Last Modified Date: 17.10.2026

"""Command line front end: synth, train, sweep, eval, explain, report.

Every artifact gets a `.sha` sidecar holding the hash of the config entries
that produced it; downstream stages refuse artifacts whose hash differs from
the one the current config implies.
"""

import argparse
import logging
import os
import sys
import numpy as np

from typing import Iterable, List, Optional, Sequence

from .relapse_config import RunConfig, apply_overrides, parse_config, run_config_from_dict
from .relapse_interpret import (
    CONTRIBUTION_COLUMNS,
    compute_baselines,
    export_slices,
    modality_contribution,
    occlusion_saliency,
    saliency_hit,
)
from .relapse_io import (
    check_hash,
    read_key_values,
    read_table,
    write_hash,
    write_key_values,
    write_table,
)
from .relapse_metrics import (
    REPORT_COLUMNS,
    evaluate_classifier,
    evaluate_regressor,
    predicted_rfs_days,
)
from .relapse_model import init_model, load_checkpoint, predict, save_checkpoint
from .relapse_preprocess import (
    compute_age_stats,
    compute_volume_stats,
    prepare_samples,
    select_cohort,
    split_cohort,
)
from .relapse_synth import MANIFEST, load_cohort, save_cohort, synth_cohort
from .relapse_thresholds import KAPPA_BETAS, THETA_BETAS, sweep_threshold, threshold_table
from .relapse_train import Trainer
from .relapse_types import (
    LeakageError,
    Modality,
    PrerequisiteError,
    RelapseError,
    Task,
    ThresholdDomain,
)
from .version import __version__

SUBCOMMANDS = ("synth", "train", "sweep", "eval", "explain", "report")

# Config entries each artifact depends on
DATA_KEYS = ("synth", "seeds.synth")
MODEL_KEYS = DATA_KEYS + ("selection", "seeds.split", "model", "train", "seeds.train", "task", "variant")
THRESHOLD_KEYS = MODEL_KEYS + ("beta",)
EXPLAIN_KEYS = THRESHOLD_KEYS + ("occlusion", "interpret")
# Consolidated tables span every (task, variant) run
REPORT_KEYS = tuple(k for k in EXPLAIN_KEYS if k not in ("task", "variant"))

THRESHOLD_BY_BETA_COLUMNS = [
    "beta", "threshold", "train_f_beta", "test_f_beta", "sensitivity", "specificity",
]
SALIENCY_COLUMNS = ["id", "outcome", "label", "iou", "hit"]


class Pipeline:
    """One configured run; each public method is a subcommand."""

    def __init__(self, config: RunConfig, name: str = "cli"):
        self.config = config.validate()
        self.log = logging.getLogger(f"strokeext.{name}")
        self.log.info("Relapse pipeline")
        self.log.info("strokeext-relapse version %s", __version__)
        self._prepared = None

    @property
    def run_name(self) -> str:
        return f"{self.config.task.name.lower()}_{self.config.variant.name.lower()}"

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.config.paths.data_dir, MANIFEST)

    def model_path(self, *parts: str) -> str:
        return os.path.join(self.config.paths.model_dir, self.run_name, *parts)

    def report_path(self, *parts: str) -> str:
        return os.path.join(self.config.paths.report_dir, self.run_name, *parts)

    def _hash(self, keys: Sequence[str]) -> str:
        return self.config.section_hash(*keys)

    def _emit_table(self, path: str, rows, columns, keys: Sequence[str]) -> None:
        write_table(path, rows, columns)
        write_hash(path, self._hash(keys))

    def _log_effective(self, stage: str) -> None:
        seeds = self.config.seeds
        self.log.info(
            f"{stage}: seeds synth={seeds.synth} split={seeds.split} train={seeds.train}"
        )
        self.log.debug("effective config:\n%s", self.config.to_yaml())

    def synth(self) -> None:
        self._log_effective("synth")
        cohort = synth_cohort(self.config.synth)
        save_cohort(cohort, self.config.paths.data_dir)
        write_hash(self.manifest_path, self._hash(DATA_KEYS))

    def prepare(self):
        """Selection, split and training statistics, shared by every later stage."""
        if self._prepared is None:
            cohort = load_cohort(self.config.paths.data_dir)
            check_hash(self.manifest_path, self._hash(DATA_KEYS))
            selected = select_cohort(cohort, self.config.selection)
            train, test = split_cohort(selected, self.config.selection)
            age_stats = compute_age_stats(train.records)
            volume_stats = compute_volume_stats(train.records)
            self._prepared = (
                prepare_samples(train, age_stats, volume_stats),
                prepare_samples(test, age_stats, volume_stats),
                age_stats,
                volume_stats,
            )
        return self._prepared

    def train(self) -> None:
        self._log_effective("train")
        train_samples, _, age_stats, volume_stats = self.prepare()
        cfg = self.config
        model = init_model(cfg.model)
        trainer = Trainer(
            cfg.train,
            kappa_low=cfg.selection.kappa_low,
            rfs_cap=cfg.selection.rfs_cap,
            name=f"trainer.{cfg.variant.name.lower()}",
        )
        model, history = trainer.train(model, train_samples)
        ckpt = self.model_path("model.ckpt")
        save_checkpoint(
            ckpt,
            model,
            extra={
                "age_stats": [age_stats.mu, age_stats.sigma],
                "volume_stats": [volume_stats.mean, volume_stats.sd],
                "rfs_cap": cfg.selection.rfs_cap,
            },
        )
        write_hash(ckpt, self._hash(MODEL_KEYS))
        history_path = self.model_path("history.csv")
        history.write_csv(history_path)
        write_hash(history_path, self._hash(MODEL_KEYS))

    def _load_model(self):
        ckpt = self.model_path("model.ckpt")
        check_hash(ckpt, self._hash(MODEL_KEYS))
        model, _ = load_checkpoint(ckpt)
        return model

    def _outputs(self, model, samples) -> np.ndarray:
        """Classifier scores, or predicted RFS in days for regressors."""
        if self.config.task == Task.CLASSIFY:
            return predict(
                model, np.stack([s.volume for s in samples]), np.stack([s.features for s in samples])
            )
        return predicted_rfs_days(model, samples, self.config.selection.rfs_cap)

    @property
    def domain(self) -> ThresholdDomain:
        if self.config.task == Task.CLASSIFY:
            return ThresholdDomain.THETA_UNIT_INTERVAL
        return ThresholdDomain.KAPPA_DAYS

    def sweep(self, split: str = "train") -> None:
        if split != "train":
            raise LeakageError(f"thresholds are fixed on the train split only, not {split!r}")
        self._log_effective("sweep")
        train_samples = self.prepare()[0]
        model = self._load_model()
        sel = self.config.selection
        report = sweep_threshold(
            self._outputs(model, train_samples),
            [s.label for s in train_samples],
            self.config.beta,
            self.domain,
            sel.kappa_low,
            sel.kappa_high,
        )
        curve = self.model_path("threshold.csv")
        report.write_csv(curve)
        write_hash(curve, self._hash(THRESHOLD_KEYS))
        chosen = self.model_path("threshold.txt")
        write_key_values(
            chosen,
            {
                "threshold": f"{report.chosen:.17g}",
                "beta": report.beta,
                "domain": report.domain.name.lower(),
                "f_beta": report.best_score,
            },
        )
        write_hash(chosen, self._hash(THRESHOLD_KEYS))
        self.log.info(f"threshold {report.chosen:.6g} fixed on train (F={report.best_score:.4f})")

    def _threshold(self) -> float:
        path = self.model_path("threshold.txt")
        if not os.path.exists(path):
            raise PrerequisiteError(f"no threshold at {path} (run 'sweep' first)")
        check_hash(path, self._hash(THRESHOLD_KEYS))
        return float(read_key_values(path)["threshold"])

    def eval(self) -> None:
        self._log_effective("eval")
        threshold = self._threshold()
        train_samples, test_samples, _, _ = self.prepare()
        model = self._load_model()
        if self.config.task == Task.CLASSIFY:
            report = evaluate_classifier(model, test_samples, threshold)
            betas = THETA_BETAS
        else:
            report = evaluate_regressor(model, test_samples, threshold, self.config.selection)
            betas = KAPPA_BETAS
        text = self.report_path("eval.txt")
        report.write(text)
        write_hash(text, self._hash(THRESHOLD_KEYS))
        self._emit_table(self.report_path("eval.csv"), [report.row()], REPORT_COLUMNS, THRESHOLD_KEYS)

        sel = self.config.selection
        rows = threshold_table(
            self._outputs(model, train_samples),
            [s.label for s in train_samples],
            self._outputs(model, test_samples),
            [s.label for s in test_samples],
            betas,
            self.domain,
            sel.kappa_low,
            sel.kappa_high,
        )
        self._emit_table(
            self.report_path("thresholds_by_beta.csv"), rows, THRESHOLD_BY_BETA_COLUMNS, THRESHOLD_KEYS
        )

    def explain(self) -> None:
        self._log_effective("explain")
        train_samples, test_samples, _, _ = self.prepare()
        model = self._load_model()
        interp = self.config.interpret
        baselines = compute_baselines(train_samples, interp.volume_baseline)
        contribution = modality_contribution(model, test_samples, baselines)
        self._emit_table(
            self.report_path("contribution.csv"),
            [contribution.absolute_row()],
            CONTRIBUTION_COLUMNS,
            EXPLAIN_KEYS,
        )
        self._emit_table(
            self.report_path("contribution_relative.csv"),
            [contribution.relative_row()],
            CONTRIBUTION_COLUMNS,
            EXPLAIN_KEYS,
        )

        rows = []
        for outcome, sample in self._saliency_cases(model, test_samples):
            saliency = occlusion_saliency(model, sample, self.config.occlusion, baselines)
            for path in export_slices(saliency, self.report_path("saliency"), sample.id):
                write_hash(path, self._hash(EXPLAIN_KEYS))
            iou, hit = saliency_hit(saliency, sample.lesion_mask, interp.top_fraction)
            rows.append(
                {"id": sample.id, "outcome": outcome, "label": sample.label, "iou": iou, "hit": int(hit)}
            )
        self._emit_table(self.report_path("saliency.csv"), rows, SALIENCY_COLUMNS, EXPLAIN_KEYS)

    def _saliency_cases(self, model, samples):
        """Up to saliency_cases true positives, then as many true negatives."""
        threshold = self._threshold()
        values = self._outputs(model, samples)
        if self.config.task == Task.CLASSIFY:
            positive = values > threshold
        else:
            positive = values <= threshold
        limit = self.config.interpret.saliency_cases
        with_mask = [(s, bool(p)) for s, p in zip(samples, positive) if s.lesion_mask is not None]
        tp = [("tp", s) for s, p in with_mask if p and s.label == 1]
        tn = [("tn", s) for s, p in with_mask if not p and s.label == 0]
        if not tp:
            self.log.warning("no true positive in the test split; saliency shows negatives only")
        return tp[:limit] + tn[:limit]

    def _run_config(self, task: Task, variant: Modality) -> RunConfig:
        """The current config with another (task, variant) pair."""
        overrides = [f"task={task.name.lower()}", f"variant={variant.name.lower()}"]
        return run_config_from_dict(apply_overrides(self.config.canonical(), overrides))

    def _read_checked(self, path: str, config: RunConfig, keys: Sequence[str]) -> List[dict]:
        check_hash(path, config.section_hash(*keys))
        return read_table(path).to_dict(orient="records")

    def report(self) -> None:
        """Consolidate every (task, variant) run found under report_dir."""
        self._log_effective("report")
        root = self.config.paths.report_dir
        tables = {"classification": [], "regression": [], "contribution": [],
                  "contribution_relative": [], "thresholds": []}
        found = 0
        for task in Task:
            for variant in Modality:
                run = os.path.join(root, f"{task.name.lower()}_{variant.name.lower()}")
                eval_csv = os.path.join(run, "eval.csv")
                if not os.path.exists(eval_csv):
                    continue
                found += 1
                run_config = self._run_config(task, variant)
                key = "classification" if task == Task.CLASSIFY else "regression"
                tables[key].extend(self._read_checked(eval_csv, run_config, THRESHOLD_KEYS))
                by_beta = os.path.join(run, "thresholds_by_beta.csv")
                for row in self._read_checked(by_beta, run_config, THRESHOLD_KEYS):
                    tables["thresholds"].append(
                        {"variant": variant.name.lower(), "task": task.name.lower(), **row}
                    )
                for name in ("contribution", "contribution_relative"):
                    path = os.path.join(run, f"{name}.csv")
                    if os.path.exists(path):
                        for row in self._read_checked(path, run_config, EXPLAIN_KEYS):
                            tables[name].append({"task": task.name.lower(), **row})
        if not found:
            raise PrerequisiteError(f"no evaluated runs under {root} (run 'eval' first)")

        contribution_columns = ["task"] + CONTRIBUTION_COLUMNS
        outputs = (
            ("classification_table.csv", tables["classification"], REPORT_COLUMNS),
            ("regression_table.csv", tables["regression"], REPORT_COLUMNS),
            ("contribution_table.csv", tables["contribution"], contribution_columns),
            ("contribution_relative_table.csv", tables["contribution_relative"], contribution_columns),
            ("thresholds_table.csv", tables["thresholds"], ["variant", "task"] + THRESHOLD_BY_BETA_COLUMNS),
        )
        for name, rows, columns in outputs:
            self._emit_table(os.path.join(root, name), rows, columns, REPORT_KEYS)
        self.log.info(f"consolidated {found} run(s) into {root}")


def run_subcommand(
    name: str, config: RunConfig, overrides: Iterable[str] = (), split: str = "train"
) -> int:
    """Run one stage; returns the process exit status."""
    log = logging.getLogger("strokeext.cli")
    try:
        if name not in SUBCOMMANDS:
            raise PrerequisiteError(f"unknown subcommand {name!r}")
        overrides = list(overrides)
        if overrides:
            config = run_config_from_dict(apply_overrides(config.canonical(), overrides))
        pipeline = Pipeline(config)
        if name == "sweep":
            pipeline.sweep(split)
        else:
            getattr(pipeline, name)()
    except RelapseError as exc:
        log.error(f"{name}: {exc}")
        return 2
    return 0


def _flag_overrides(args) -> List[str]:
    out = list(args.set or [])
    for flag, key in (("seed_synth", "seeds.synth"), ("seed_split", "seeds.split"),
                      ("seed_train", "seeds.train"), ("variant", "variant"),
                      ("task", "task"), ("beta", "beta")):
        value = getattr(args, flag)
        if value is not None:
            out.append(f"{key}={value}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--set", action="append", metavar="K=V",
                        help="override section.key=value (repeatable)")
    common.add_argument("--seed-synth", type=int)
    common.add_argument("--seed-split", type=int)
    common.add_argument("--seed-train", type=int)
    common.add_argument("--variant", choices=[m.name.lower() for m in Modality])
    common.add_argument("--task", choices=[t.name.lower() for t in Task])
    common.add_argument("--beta", type=float)
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(
        prog="strokeext-relapse",
        description="Synthetic stroke-relapse pipeline: multimodal prediction and interpretation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "sweep":
            p.add_argument("--split", default="train", choices=["train", "test"])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
    try:
        config = parse_config(args.config, _flag_overrides(args))
    except RelapseError as exc:
        logging.getLogger("strokeext.cli").error(f"config: {exc}")
        return 2
    return run_subcommand(args.command, config, split=getattr(args, "split", "train"))


if __name__ == "__main__":
    sys.exit(main())
