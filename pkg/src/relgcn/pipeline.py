"""Staged experiment driver: learn rules, featurize, train, evaluate.

Every stage reads its inputs from and persists its outputs to the run
directory, so an expensive earlier stage (rule learning) amortizes across
later sweeps.  A manifest records the config hash, all seeds and per-stage
wall times.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from . import featurize as fz
from . import gcn as gcn_mod
from . import metrics as metrics_mod
from .grounding import (
    NEGATIVE,
    POSITIVE,
    TargetExample,
    count_satisfied_groundings,
    sample_negatives,
)
from .kb import KnowledgeBase, parse_facts, parse_ground_atoms
from .rulelearn import (
    LearnConfig,
    NEGATIVE_DENSITY,
    POSITIVE_DENSITY,
    RuleSet,
    learn_ruleset,
    parse_rules,
    serialize_rules,
)

_DEFAULTS: dict[str, object] = {
    "facts": "",
    "pos": "",
    "neg": "",
    "out": "out",
    "target": "",
    "negatives.ratio": 1.0,
    "negatives.seed": 17,
    "negatives.symmetric": True,
    "learn.k_pos": 3,
    "learn.k_neg": 3,
    "learn.max_body_length": 4,
    "learn.beam_width": 5,
    "learn.min_examples_per_leaf": 2,
    "learn.covering_discount": 0.1,
    "learn.seed": 7,
    "learn.max_constants_for_grounding": 50,
    "learn.contrast_ratio": 1.0,
    "featurize.metric": fz.EUCLIDEAN,
    "featurize.cap": 0,  # 0 means uncapped
    "featurize.zscale": False,
    "featurize.literal_self_loops": False,
    "train.epochs": 200,
    "train.learning_rate": 0.01,
    "train.weight_decay": 5e-4,
    "train.dropout_rate": 0.5,
    "train.seed": 0,
    "train.patience": 10,
    "train.hidden_size": 16,
    "train.num_layers": 2,
    "split.train": 0.6,
    "split.val": 0.1,
    "split.test": 0.3,
    "split.seed": 0,
    "split.stratified": True,
    "eval.threshold": "0.5",  # a float, or "mean" for mean-score thresholding
}


def _coerce(key: str, raw: str) -> object:
    default = _DEFAULTS[key]
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean for {key!r}, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


@dataclass
class PipelineConfig:
    """Flat dotted-key configuration with typed defaults."""

    values: dict[str, object]

    @classmethod
    def from_overrides(cls, overrides: dict[str, str] | None = None) -> "PipelineConfig":
        values = dict(_DEFAULTS)
        for key, raw in (overrides or {}).items():
            if key not in _DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
        return cls(values)

    @classmethod
    def from_file(
        cls, path: str | Path, overrides: dict[str, str] | None = None
    ) -> "PipelineConfig":
        file_overrides: dict[str, str] = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            file_overrides[key] = val
        file_overrides.update(overrides or {})  # flags win
        return cls.from_overrides(file_overrides)

    def __getitem__(self, key: str) -> object:
        return self.values[key]

    def with_values(self, **updates: object) -> "PipelineConfig":
        values = dict(self.values)
        for key, v in updates.items():
            dotted = key.replace("__", ".")
            if dotted not in _DEFAULTS:
                raise ConfigError(f"unknown config key {dotted!r}")
            values[dotted] = v
        return PipelineConfig(values)

    def hash(self) -> str:
        canon = json.dumps(self.values, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()

    def out_dir(self) -> Path:
        out = Path(str(self["out"]))
        out.mkdir(parents=True, exist_ok=True)
        return out

    def learn_config(self, k: int, seed_offset: int = 0) -> LearnConfig:
        return LearnConfig(
            num_rules=k,
            max_body_length=int(self["learn.max_body_length"]),
            beam_width=int(self["learn.beam_width"]),
            min_examples_per_leaf=int(self["learn.min_examples_per_leaf"]),
            covering_discount=float(self["learn.covering_discount"]),
            seed=int(self["learn.seed"]) + seed_offset,
            max_constants_for_grounding=int(self["learn.max_constants_for_grounding"]),
            contrast_ratio=float(self["learn.contrast_ratio"]),
        )

    def train_config(self) -> gcn_mod.TrainConfig:
        return gcn_mod.TrainConfig(
            epochs=int(self["train.epochs"]),
            learning_rate=float(self["train.learning_rate"]),
            weight_decay=float(self["train.weight_decay"]),
            dropout_rate=float(self["train.dropout_rate"]),
            seed=int(self["train.seed"]),
            early_stopping_patience=int(self["train.patience"]),
            hidden_size=int(self["train.hidden_size"]),
            num_layers=int(self["train.num_layers"]),
        )


# -- shared loading helpers ------------------------------------------------


def _load_kb(config: PipelineConfig) -> KnowledgeBase:
    facts_path = Path(str(config["facts"]))
    if not facts_path.is_file():
        raise DataError(f"facts path does not exist: {facts_path} (config key 'facts')")
    return parse_facts(facts_path.read_text())


def _load_examples(
    config: PipelineConfig, kb: KnowledgeBase
) -> tuple[list[TargetExample], list[TargetExample]]:
    pos_path = Path(str(config["pos"]))
    if not pos_path.is_file():
        raise DataError(f"pos path does not exist: {pos_path} (config key 'pos')")
    positives = [
        TargetExample(a, POSITIVE)
        for a in parse_ground_atoms(pos_path.read_text(), kb)
    ]
    neg = str(config["neg"])
    if neg:
        neg_path = Path(neg)
        if not neg_path.is_file():
            raise DataError(f"neg path does not exist: {neg_path} (config key 'neg')")
        negatives = [
            TargetExample(a, NEGATIVE)
            for a in parse_ground_atoms(neg_path.read_text(), kb)
        ]
    else:
        target = str(config["target"]) or positives[0].atom.predicate
        negatives = sample_negatives(
            kb,
            kb.schema(target),
            positives,
            float(config["negatives.ratio"]),
            int(config["negatives.seed"]),
            symmetric=bool(config["negatives.symmetric"]),
        )
    return positives, negatives


def _write_targets(path: Path, targets: list[TargetExample]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["atom", "label"])
        for ex in targets:
            writer.writerow([str(ex.atom), ex.label])


def _read_targets(path: Path, kb: KnowledgeBase) -> list[TargetExample]:
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for atom_str, label in reader:
            atoms = parse_ground_atoms(atom_str + ".", kb)
            out.append(TargetExample(atoms[0], label))
    return out


def _target_predicate(config: PipelineConfig, positives: list[TargetExample]) -> str:
    return str(config["target"]) or positives[0].atom.predicate


# -- stages ----------------------------------------------------------------


def stage_learn(config: PipelineConfig) -> Path:
    """Learn positive- and negative-density rule sets; persist targets and rules."""
    out = config.out_dir()
    kb = _load_kb(config)
    positives, negatives = _load_examples(config, kb)
    _write_targets(out / "targets.csv", positives + negatives)
    pos_rules = learn_ruleset(
        kb, positives, config.learn_config(int(config["learn.k_pos"]))
    )
    neg_rules = learn_ruleset(
        kb, negatives, config.learn_config(int(config["learn.k_neg"]), seed_offset=1)
    )
    rules_path = out / "rules.txt"
    rules_path.write_text(serialize_rules(pos_rules.rules + neg_rules.rules))
    return rules_path


def stage_featurize(config: PipelineConfig) -> fz.PropagationMatrix:
    """Counts -> distances -> adjacency approximation -> normalization."""
    out = config.out_dir()
    kb = _load_kb(config)
    targets = _read_targets(out / "targets.csv", kb)
    rules = parse_rules((out / "rules.txt").read_text(), kb)
    pos = [r for r in rules if r.source == POSITIVE_DENSITY]
    neg = [r for r in rules if r.source == NEGATIVE_DENSITY]
    cap = int(config["featurize.cap"]) or None
    rule_matrix = fz.build_rule_matrix(
        [RuleSet(pos, POSITIVE_DENSITY), RuleSet(neg, NEGATIVE_DENSITY)],
        targets,
        kb,
        cap,
    )
    X = rule_matrix.values
    if bool(config["featurize.zscale"]):
        X = fz.zscale_columns(X)
    row_ids = [str(t.atom) for t in targets]
    col_ids = [f"rule{j}" for j in range(X.shape[1])]
    fz.write_matrix_csv(out / "X.csv", X, row_ids, col_ids)
    D = fz.pairwise_distances(X, str(config["featurize.metric"]))
    fz.write_matrix_csv(out / "D.csv", D.values, row_ids, row_ids)
    A_hat, t = fz.adjacency_approximation(D)
    fz.write_matrix_csv(out / "A_hat.csv", A_hat, row_ids, row_ids)
    prop = fz.normalize_propagation(
        A_hat, t, literal_self_loops=bool(config["featurize.literal_self_loops"])
    )
    fz.write_matrix_csv(out / "P.csv", prop.values, row_ids, row_ids)
    (out / "threshold.json").write_text(json.dumps({"t": t}))
    return prop


def _load_labels(config: PipelineConfig, kb: KnowledgeBase) -> np.ndarray:
    targets = _read_targets(config.out_dir() / "targets.csv", kb)
    return np.array([1 if t.label == POSITIVE else 0 for t in targets], dtype=int)


def stage_train(config: PipelineConfig) -> tuple[gcn_mod.GCNModel, list]:
    out = config.out_dir()
    kb = _load_kb(config)
    labels = _load_labels(config, kb)
    X, _, _ = fz.read_matrix_csv(out / "X.csv")
    P, _, _ = fz.read_matrix_csv(out / "P.csv")
    props = (
        float(config["split.train"]),
        float(config["split.val"]),
        float(config["split.test"]),
    )
    masks = metrics_mod.split_examples(
        labels, props, int(config["split.seed"]), bool(config["split.stratified"])
    )
    model, history = gcn_mod.train(P, X, labels, masks, config.train_config())
    gcn_mod.save_checkpoint(out / "model.rdgw", model)
    with open(out / "history.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_f1"])
        for rec in history:
            writer.writerow(
                [rec.epoch, repr(rec.train_loss), repr(rec.val_loss), repr(rec.val_f1)]
            )
    (out / "splits.json").write_text(
        json.dumps(
            {
                "train": masks.train.tolist(),
                "validation": masks.validation.tolist(),
                "test": masks.test.tolist(),
            }
        )
    )
    return model, history


def stage_eval(config: PipelineConfig) -> metrics_mod.MetricsReport:
    out = config.out_dir()
    kb = _load_kb(config)
    labels = _load_labels(config, kb)
    X, _, _ = fz.read_matrix_csv(out / "X.csv")
    P, _, _ = fz.read_matrix_csv(out / "P.csv")
    model = gcn_mod.load_checkpoint(out / "model.rdgw")
    splits = json.loads((out / "splits.json").read_text())
    test_idx = np.array(splits["test"], dtype=int)
    scores, _ = gcn_mod.predict(model, P, X)
    test_scores = scores[test_idx]
    test_labels = labels[test_idx]
    thr_setting = str(config["eval.threshold"])
    threshold = (
        float(np.mean(test_scores)) if thr_setting == "mean" else float(thr_setting)
    )
    report = metrics_mod.confusion_metrics(test_scores, test_labels, threshold)
    report.auc_pr = metrics_mod.auc_pr(test_scores, test_labels)
    (out / "metrics.txt").write_text(report.to_text())
    with open(out / "metrics.csv", "w", newline="") as f:
        f.write(metrics_mod.MetricsReport.csv_header() + "\n")
        f.write(report.to_csv_row() + "\n")
    return report


_STAGES = [
    ("learn", stage_learn),
    ("featurize", stage_featurize),
    ("train", stage_train),
    ("eval", stage_eval),
]


def run_pipeline(config: PipelineConfig) -> metrics_mod.MetricsReport:
    """Execute all stages in order, writing a manifest; a stage failure is
    re-raised with the stage name, and earlier artifacts stay on disk."""
    out = config.out_dir()
    stage_times: dict[str, float] = {}
    report = None
    for name, fn in _STAGES:
        start = time.perf_counter()
        try:
            result = fn(config)
        except Exception as exc:
            raise type(exc)(f"stage {name!r} failed: {exc}") from exc
        stage_times[name] = time.perf_counter() - start
        if name == "eval":
            report = result
    manifest = {
        "config": config.values,
        "config_hash": config.hash(),
        "seeds": {
            k: config.values[k] for k in sorted(config.values) if k.endswith("seed")
        },
        "stage_times_s": stage_times,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    assert report is not None
    return report


# -- sensitivity sweeps ----------------------------------------------------

SWEEP_AXES = {
    "hidden_size": [16, 32, 64, 128],
    "num_layers": [2, 3, 4, 5],
    "metric": [fz.MANHATTAN, fz.EUCLIDEAN, fz.CHEBYSHEV],
}


def sensitivity_sweep(
    config: PipelineConfig,
    axis: str,
    values: list | None = None,
    reuse_features: bool = True,
) -> list[tuple[object, metrics_mod.MetricsReport]]:
    """Rerun the training-side stages varying one axis, seeds fixed.

    Expects stage_learn to have produced rules already when
    ``reuse_features`` is set; the metric axis reruns featurization since
    the distance matrix changes.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    values = values if values is not None else SWEEP_AXES[axis]
    out = config.out_dir()
    if not (out / "rules.txt").is_file():
        stage_learn(config)
    if reuse_features and axis != "metric" and not (out / "X.csv").is_file():
        stage_featurize(config)
    results = []
    for value in values:
        if axis == "metric":
            cfg = config.with_values(featurize__metric=str(value))
            stage_featurize(cfg)
        else:
            cfg = config.with_values(**{f"train__{axis}": int(value)})
        stage_train(cfg)
        report = stage_eval(cfg)
        results.append((value, report))
    with open(out / f"sweep_{axis}.csv", "w", newline="") as f:
        f.write(axis + "," + metrics_mod.MetricsReport.csv_header() + "\n")
        for value, report in results:
            f.write(f"{value}," + report.to_csv_row() + "\n")
    return results


def rule_coverage_report(config: PipelineConfig) -> str:
    """Pretty-print the learned rules with per-rule coverage statistics."""
    out = config.out_dir()
    kb = _load_kb(config)
    targets = _read_targets(out / "targets.csv", kb)
    rules = parse_rules((out / "rules.txt").read_text(), kb)
    pos = [t for t in targets if t.label == POSITIVE]
    neg = [t for t in targets if t.label == NEGATIVE]
    lines = []
    for j, rule in enumerate(rules):
        cov_pos = sum(
            1 for t in pos if count_satisfied_groundings(rule, t, kb, cap=1) > 0
        )
        cov_neg = sum(
            1 for t in neg if count_satisfied_groundings(rule, t, kb, cap=1) > 0
        )
        lines.append(
            f"[{j}] {rule}  (source={rule.source} iter={rule.iteration}; "
            f"covers {cov_pos}/{len(pos)} positives, {cov_neg}/{len(neg)} negatives)"
        )
    return "\n".join(lines) + "\n"
