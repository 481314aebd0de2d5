"""Experiment orchestration: config handling, runs, sweeps, MI reports.

A run is prepare -> train -> evaluate. Mode flags cover the standard
comparison set: drop-protected removes the mitigated columns before
training, upsample rebalances the train split over the protected
combinations, mask-at-inference masks protected features in the test split
only. Every artifact carries the config hash; reruns of an unchanged config
reproduce CSV bodies byte for byte.
"""

from __future__ import annotations

import copy
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .dataset import (
    Dataset,
    SplitSpec,
    apply_standardization,
    derive_feature,
    drop_features,
    load_csv,
    split,
    standardization_stats,
)
from .errors import ConfigError, FairmiError
from .interactions import InteractionHeatmap, interaction_heatmap
from .metrics import FairnessGaps, SubgroupReport, accuracy, fairness_gaps, mutual_information, subgroup_rates
from .nn import ModelConfig, load_model, predict, save_model
from .report import config_hash, sha256_of_arrays, write_csv, write_json, write_manifest
from .schema import FeatureSchema, ProtectedFamily
from .substitution import augment_for_mi, mask_features, subgroup_keys, upsample
from .train import TrainConfig, TrainReport, train

log = logging.getLogger(__name__)

DEFAULTS: dict = {
    "dataset": {"path": None, "schema": None, "label_column": None},
    "split": {"train": 0.7, "valid": 0.1, "test": 0.2, "seed": 101},
    "model": {
        "hidden": [128, 64],
        "batchnorm_epsilon": 1e-5,
        "batchnorm_momentum": 0.1,
        "init_seed": None,
    },
    "train": {
        "alpha": 0.0,
        "primary_loss": "bce_logit",
        "constraint_loss": "squared",
        "learning_rate": 0.001,
        "max_epochs": 100,
        "batch_size": None,
        "seed": 7,
    },
    "protected_family": [],
    "derive": [],
    "audit": {"subgroup_by": None, "min_support": 5, "threshold": 0.5},
    "flags": {"mask_at_inference": False, "drop_protected": False, "upsample": False},
    "output_dir": "runs/out",
    "figures": True,
}

_UPSAMPLE_SALT = 1000003
_AUGMENT_SALT = 2000003


def materialize_config(user: dict) -> dict:
    """Deep-merge a user config over the defaults; reject unknown keys."""
    cfg = copy.deepcopy(DEFAULTS)
    _merge(cfg, user, path="")
    for key in ("path", "schema", "label_column"):
        if not cfg["dataset"].get(key):
            raise ConfigError(f"config: dataset.{key} is required")
    return cfg


def semantic_hash(cfg: dict) -> str:
    """Hash of the experiment-defining fields; where outputs land is excluded."""
    trimmed = {k: v for k, v in cfg.items() if k not in ("output_dir", "figures")}
    return config_hash(trimmed)


def _merge(base: dict, override: dict, path: str) -> None:
    if not isinstance(override, dict):
        raise ConfigError(f"config section {path or '<root>'} must be an object")
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"config: unknown key {path + key!r}")
        if isinstance(base[key], dict) and base[key]:
            _merge(base[key], value, path=f"{path}{key}.")
        else:
            base[key] = copy.deepcopy(value)


def load_config_file(path: str | Path) -> dict:
    try:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
    return materialize_config(user)


@dataclass
class PreparedData:
    train: Dataset
    valid: Dataset
    test: Dataset
    family: ProtectedFamily | None
    mask_indices: tuple[int, ...]
    audit_names: list[str]
    audit_values: np.ndarray
    audit_schema: FeatureSchema
    seeds: dict
    train_split_hash: str


def _stage(name: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, FairmiError):
                raise type(exc)(f"[stage {name}] {exc}") from exc
            return False

    return _Ctx()


def prepare_data(cfg: dict) -> PreparedData:
    """Load, derive, split, optionally upsample/drop, then standardize.

    The audit columns are captured from the test split before any column
    drop so baselines trained without protected attributes can still be
    audited over them.
    """
    with _stage("prepare"):
        schema = FeatureSchema.load(cfg["dataset"]["schema"])
        ds = load_csv(cfg["dataset"]["path"], schema, cfg["dataset"]["label_column"])
        for rule in cfg["derive"]:
            ds = derive_feature(
                ds,
                source=rule["source"],
                mapping=rule["mapping"],
                new_name=rule["new_name"],
                protected=bool(rule.get("protected", False)),
            )

        split_spec = SplitSpec(
            train_fraction=cfg["split"]["train"],
            valid_fraction=cfg["split"]["valid"],
            test_fraction=cfg["split"]["test"],
            seed=cfg["split"]["seed"],
        )
        train_ds, valid_ds, test_ds = split(ds, split_spec)

        family_names = [list(g) for g in cfg["protected_family"]]
        family = ProtectedFamily.from_names(ds.schema, family_names) if family_names else None
        union_names = []
        if family is not None:
            union_names = [ds.schema.names[i] for i in family.union()]

        audit_names = cfg["audit"]["subgroup_by"] or union_names
        if not audit_names:
            raise ConfigError("config: audit.subgroup_by or a protected family is required")
        audit_idx = [ds.schema.index(n) for n in audit_names]
        audit_values = test_ds.rows[:, audit_idx].copy()

        seeds = {
            "split": cfg["split"]["seed"],
            "train": cfg["train"]["seed"],
            "upsample": cfg["train"]["seed"] + _UPSAMPLE_SALT,
            "augment": cfg["train"]["seed"] + _AUGMENT_SALT,
        }

        if cfg["flags"]["upsample"]:
            if family is None:
                raise ConfigError("upsample flag needs a protected family")
            train_ds = upsample(train_ds, family.union(), seed=seeds["upsample"])

        if cfg["flags"]["drop_protected"]:
            if cfg["train"]["alpha"] > 0:
                raise ConfigError("drop_protected cannot be combined with alpha > 0")
            if not union_names:
                raise ConfigError("drop_protected flag needs a protected family")
            train_ds = drop_features(train_ds, union_names)
            valid_ds = drop_features(valid_ds, union_names)
            test_ds = drop_features(test_ds, union_names)
            family_final = None
            mask_indices: tuple[int, ...] = ()
        else:
            family_final = family
            mask_indices = family.union() if family is not None else ()

        stats = standardization_stats(train_ds)
        train_ds = apply_standardization(train_ds, stats)
        valid_ds = apply_standardization(valid_ds, stats)
        test_ds = apply_standardization(test_ds, stats)

        return PreparedData(
            train=train_ds,
            valid=valid_ds,
            test=test_ds,
            family=family_final,
            mask_indices=mask_indices,
            audit_names=list(audit_names),
            audit_values=audit_values,
            audit_schema=ds.schema,
            seeds=seeds,
            train_split_hash=sha256_of_arrays(train_ds.rows, train_ds.labels),
        )


@dataclass
class Evaluation:
    accuracy: float
    gaps: FairnessGaps
    report: SubgroupReport
    masked: bool

    def subgroup_rows(self, prepared: PreparedData) -> list[dict]:
        idx = [prepared.audit_schema.index(n) for n in prepared.audit_names]
        rows = []
        for g in self.report.groups:
            decoded = tuple(
                prepared.audit_schema.decode(i, v) for i, v in zip(idx, g.key)
            )
            rows.append(
                {
                    "key": decoded,
                    "label": "|".join(decoded),
                    "count": g.count,
                    "positives": g.positives,
                    "negatives": g.negatives,
                    "tpr": g.tpr,
                    "fpr": g.fpr,
                    "positive_rate": g.positive_rate,
                    "included": g.included,
                }
            )
        return rows


def evaluate_model(model, prepared: PreparedData, cfg: dict, mask: bool | None = None) -> Evaluation:
    """Test-split accuracy and subgroup gaps, optionally under masking."""
    with _stage("evaluate"):
        masked = cfg["flags"]["mask_at_inference"] if mask is None else mask
        rows = prepared.test.rows
        if masked and prepared.mask_indices:
            baseline = prepared.test.schema.baseline_vector()
            rows = mask_features(rows, baseline, prepared.mask_indices)
        preds = predict(model, rows, threshold=cfg["audit"]["threshold"])
        acc = accuracy(preds, prepared.test.labels)
        pred_pos = (preds == prepared.test.C).astype(np.int64)
        label_pos = (prepared.test.labels == prepared.test.C).astype(np.int64)
        keys = [tuple(k) for k in prepared.audit_values.tolist()]
        report = subgroup_rates(
            pred_pos, label_pos, keys, min_support=cfg["audit"]["min_support"]
        )
        gaps = fairness_gaps(report)
        return Evaluation(accuracy=acc, gaps=gaps, report=report, masked=masked)


def _write_eval_artifacts(
    out: Path, cfg: dict, cfg_hash: str, prepared: PreparedData, ev: Evaluation
) -> list[str]:
    rows = ev.subgroup_rows(prepared)
    sub_rows = [
        list(r["key"])
        + [r["count"], r["positives"], r["negatives"], r["tpr"], r["fpr"],
           r["positive_rate"], r["included"]]
        for r in rows
    ]
    header = prepared.audit_names + [
        "count", "positives", "negatives", "tpr", "fpr", "positive_rate", "included",
    ]
    outputs = []
    outputs.append(str(write_csv(out / "subgroups.csv", header, sub_rows, cfg_hash)))
    gaps_payload = {
        "accuracy": ev.accuracy,
        "eo_tpr_gap": ev.gaps.eo_tpr_gap,
        "eo_fpr_gap": ev.gaps.eo_fpr_gap,
        "dp_gap": ev.gaps.dp_gap,
        "extremes": {
            name: {side: list(key) for side, key in ext.items()}
            for name, ext in ev.gaps.extremes.items()
        },
        "masked": ev.masked,
        "min_support": cfg["audit"]["min_support"],
        "included_subgroups": sum(1 for r in rows if r["included"]),
        "total_subgroups": len(rows),
    }
    outputs.append(str(write_json(out / "gaps.json", gaps_payload, cfg_hash)))
    if cfg["figures"]:
        outputs.append(str(plots.save_subgroup_rates(rows, out / "subgroup_rates.png")))
    return outputs


def run_experiment(config: dict) -> dict:
    """Full pipeline; returns the run summary and writes all artifacts."""
    cfg = materialize_config(config)
    cfg_hash = semantic_hash(cfg)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    stale = out / ".stale"
    stale.touch()

    prepared = prepare_data(cfg)
    model_cfg = _model_config(cfg, prepared)
    train_cfg = TrainConfig(
        alpha=cfg["train"]["alpha"],
        family=prepared.family,
        constraint_loss=cfg["train"]["constraint_loss"],
        primary_loss=cfg["train"]["primary_loss"],
        learning_rate=cfg["train"]["learning_rate"],
        max_epochs=cfg["train"]["max_epochs"],
        batch_size=cfg["train"]["batch_size"],
        seed=cfg["train"]["seed"],
    )

    with _stage("train"):
        model, report = train(prepared.train, prepared.valid, model_cfg, train_cfg)

    outputs = []
    checkpoint = out / "model.npz"
    save_model(model, checkpoint, train_seed=train_cfg.seed)
    outputs.append(str(checkpoint))
    outputs.append(str(write_csv(out / "epochs.csv", TrainReport.HEADER, report.rows(), cfg_hash)))
    if cfg["figures"]:
        outputs.append(str(plots.save_training_curves(report.rows(), out / "training_curves.png")))

    ev = evaluate_model(model, prepared, cfg)
    outputs.extend(_write_eval_artifacts(out, cfg, cfg_hash, prepared, ev))

    summary = {
        "config_hash": cfg_hash,
        "dataset": cfg["dataset"]["path"],
        "n_train": prepared.train.n,
        "n_valid": prepared.valid.n,
        "n_test": prepared.test.n,
        "classes": list(prepared.train.label_values),
        "split_fractions": [cfg["split"]["train"], cfg["split"]["valid"], cfg["split"]["test"]],
        "seeds": prepared.seeds,
        "flags": dict(cfg["flags"]),
        "alpha": cfg["train"]["alpha"],
        "best_epoch": report.best_epoch,
        "best_validation_accuracy": report.best_validation_accuracy,
        "accuracy": ev.accuracy,
        "eo_tpr_gap": ev.gaps.eo_tpr_gap,
        "eo_fpr_gap": ev.gaps.eo_fpr_gap,
        "dp_gap": ev.gaps.dp_gap,
        "train_split_hash": prepared.train_split_hash,
        "checkpoint": checkpoint.name,
        "subgroups": ev.subgroup_rows(prepared),
    }
    outputs.append(str(write_json(out / "summary.json", _json_safe(summary), cfg_hash)))
    write_manifest(out / "manifest.json", cfg, cfg_hash, prepared.seeds, outputs)
    stale.unlink(missing_ok=True)
    return summary


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _model_config(cfg: dict, prepared: PreparedData) -> ModelConfig:
    out_width = 1 if prepared.train.C == 2 else prepared.train.C
    init_seed = cfg["model"]["init_seed"]
    if init_seed is None:
        init_seed = cfg["train"]["seed"]
    return ModelConfig(
        layer_widths=[prepared.train.m] + list(cfg["model"]["hidden"]) + [out_width],
        batchnorm_epsilon=cfg["model"]["batchnorm_epsilon"],
        batchnorm_momentum=cfg["model"]["batchnorm_momentum"],
        init_seed=init_seed,
    )


def evaluate_checkpoint(
    config: dict,
    checkpoint: str | Path,
    out_dir: str | Path | None = None,
    mask: bool | None = None,
) -> dict:
    """Re-run the evaluation stage of a config against a saved model."""
    cfg = materialize_config(config)
    cfg_hash = semantic_hash(cfg)
    prepared = prepare_data(cfg)
    model, _ = load_model(checkpoint)
    ev = evaluate_model(model, prepared, cfg, mask=mask)
    out = Path(out_dir) if out_dir is not None else Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    outputs = _write_eval_artifacts(out, cfg, cfg_hash, prepared, ev)
    summary = {
        "config_hash": cfg_hash,
        "checkpoint": str(checkpoint),
        "masked": ev.masked,
        "accuracy": ev.accuracy,
        "eo_tpr_gap": ev.gaps.eo_tpr_gap,
        "eo_fpr_gap": ev.gaps.eo_fpr_gap,
        "dp_gap": ev.gaps.dp_gap,
        "train_split_hash": prepared.train_split_hash,
        "subgroups": ev.subgroup_rows(prepared),
    }
    outputs.append(str(write_json(out / "evaluation.json", _json_safe(summary), cfg_hash)))
    write_manifest(out / "manifest.json", cfg, cfg_hash, prepared.seeds, outputs)
    return summary


SWEEP_HEADER = ["alpha", "seed", "run_id", "accuracy", "eo_tpr_gap", "eo_fpr_gap", "dp_gap", "status"]


def sweep(
    config: dict,
    alphas: list[float],
    seeds: list[int],
    jobs: int = 1,
    out_dir: str | Path | None = None,
) -> list[dict]:
    """One independent run per (alpha, seed); failures are recorded per row."""
    if not alphas or not seeds:
        raise ConfigError("sweep needs at least one alpha and one seed")
    cfg = materialize_config(config)
    out = Path(out_dir) if out_dir is not None else Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)

    tasks = []
    for alpha in sorted(alphas):
        for seed in seeds:
            sub = copy.deepcopy(cfg)
            run_id = f"a{alpha:g}_s{seed}"
            sub["train"]["alpha"] = alpha
            sub["train"]["seed"] = seed
            sub["output_dir"] = str(out / f"run_{run_id}")
            tasks.append((alpha, seed, run_id, sub))

    def _one(task):
        alpha, seed, run_id, sub = task
        try:
            summary = run_experiment(sub)
            return {
                "alpha": alpha,
                "seed": seed,
                "run_id": run_id,
                "accuracy": summary["accuracy"],
                "eo_tpr_gap": summary["eo_tpr_gap"],
                "eo_fpr_gap": summary["eo_fpr_gap"],
                "dp_gap": summary["dp_gap"],
                "status": "ok",
            }
        except FairmiError as exc:
            log.error("sweep run %s failed: %s", run_id, exc)
            return {
                "alpha": alpha,
                "seed": seed,
                "run_id": run_id,
                "accuracy": None,
                "eo_tpr_gap": None,
                "eo_fpr_gap": None,
                "dp_gap": None,
                "status": f"error: {exc}",
            }

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one, tasks))
    else:
        rows = [_one(t) for t in tasks]
    rows.sort(key=lambda r: (r["alpha"], r["seed"]))

    cfg_hash = semantic_hash(cfg)
    write_csv(
        out / "sweep.csv",
        SWEEP_HEADER,
        [[r[k] for k in SWEEP_HEADER] for r in rows],
        cfg_hash,
    )
    if cfg["figures"]:
        plots.save_sweep_curves(rows, out / "sweep_curves.png")
    write_manifest(
        out / "sweep_manifest.json", cfg, cfg_hash,
        {"seeds": seeds}, [str(out / "sweep.csv")],
        extra={"alphas": sorted(alphas)},
    )
    return rows


def mi_report(ds: Dataset, family: ProtectedFamily, augmented: bool, seed: int) -> list[dict]:
    """Per-subset mutual information with labels, before and after augmentation."""
    if family is None or len(family) == 0:
        raise ConfigError("mi report needs a non-empty protected family")
    rows = []
    aug = augment_for_mi(ds, family, seed=seed) if augmented else None
    for k, subset in enumerate(family.subsets):
        cols = ds.rows[:, list(subset)]
        row = {
            "subset": family.subset_label(k),
            "mi_original": mutual_information(cols, ds.labels),
            "mi_augmented": None,
        }
        if aug is not None:
            row["mi_augmented"] = mutual_information(aug.rows[:, list(subset)], aug.labels)
        rows.append(row)
    return rows


def mi_table(config: dict, splits: tuple[str, ...] = ("train", "test", "full")) -> list[dict]:
    """MI rows for each requested split, written to mi.csv in the output dir."""
    cfg = materialize_config(config)
    cfg_hash = semantic_hash(cfg)
    with _stage("prepare"):
        schema = FeatureSchema.load(cfg["dataset"]["schema"])
        ds = load_csv(cfg["dataset"]["path"], schema, cfg["dataset"]["label_column"])
        for rule in cfg["derive"]:
            ds = derive_feature(ds, rule["source"], rule["mapping"], rule["new_name"],
                                protected=bool(rule.get("protected", False)))
        family = ProtectedFamily.from_names(ds.schema, [list(g) for g in cfg["protected_family"]])
        split_spec = SplitSpec(
            cfg["split"]["train"], cfg["split"]["valid"], cfg["split"]["test"],
            cfg["split"]["seed"],
        )
        train_ds, _, test_ds = split(ds, split_spec)
    parts = {"train": train_ds, "test": test_ds, "full": ds}
    unknown = set(splits) - set(parts)
    if unknown:
        raise ConfigError(f"unknown mi splits: {sorted(unknown)}")

    seed = cfg["train"]["seed"] + _AUGMENT_SALT
    rows = []
    for name in splits:
        for row in mi_report(parts[name], family, augmented=True, seed=seed):
            rows.append({"split": name, **row})

    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "mi.csv",
        ["split", "subset", "mi_original", "mi_augmented"],
        [[r["split"], r["subset"], r["mi_original"], r["mi_augmented"]] for r in rows],
        cfg_hash,
    )
    if cfg["figures"]:
        plots.save_mi_bars(rows, out / "mi.png")
    return rows


def interactions_report(
    config: dict,
    checkpoint: str | Path,
    slice_by: str | None = None,
    out_dir: str | Path | None = None,
) -> list[InteractionHeatmap]:
    """Interaction heatmaps over the test split, optionally per subgroup slice."""
    cfg = materialize_config(config)
    cfg_hash = semantic_hash(cfg)
    prepared = prepare_data(cfg)
    model, _ = load_model(checkpoint)
    test = prepared.test
    out = Path(out_dir) if out_dir is not None else Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)

    slices: list[tuple[str, list[int] | None, tuple | None]] = []
    if slice_by is None:
        slices.append(("all", None, None))
    else:
        idx = test.schema.index(slice_by)
        spec = test.schema.features[idx]
        observed = sorted(set(test.rows[:, idx].tolist()))
        for code in observed:
            label = spec.categories[int(code)] if 0 <= int(code) < len(spec.categories) else str(code)
            slices.append((label, [idx], (code,)))

    heatmaps = []
    for label, group_by, key in slices:
        hm = interaction_heatmap(model, test, group_by=group_by, group_key=key, group_label=label)
        heatmaps.append(hm)
        safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in label)
        csv_path = out / f"heatmap_{safe}.csv"
        write_csv(csv_path, hm.feature_names, hm.matrix.tolist(), cfg_hash)
        write_json(
            out / f"heatmap_{safe}.json",
            {
                "model": str(checkpoint),
                "group": label,
                "sample_count": hm.sample_count,
                "functional": hm.functional,
                "features": hm.feature_names,
            },
            cfg_hash,
        )
        if cfg["figures"]:
            plots.save_heatmap(hm.matrix, hm.feature_names,
                               f"pairwise interactions ({label})", out / f"heatmap_{safe}.png")
    return heatmaps
