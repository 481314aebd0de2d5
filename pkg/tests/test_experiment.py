import json

import numpy as np
import pytest

from fairmi import datagen
from fairmi.dataset import load_csv
from fairmi.errors import ConfigError
from fairmi.experiment import (
    materialize_config,
    mi_report,
    prepare_data,
    run_experiment,
    semantic_hash,
    sweep,
)
from fairmi.schema import FeatureSchema, ProtectedFamily


@pytest.fixture(scope="module")
def toy_paths(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    return datagen.generate_toy(out, seed=3)


def _base_cfg(toy_paths, out_dir):
    return {
        "dataset": {
            "path": str(toy_paths["csv"]),
            "schema": str(toy_paths["schema"]),
            "label_column": "outcome",
        },
        "model": {"hidden": [12, 6]},
        "train": {"alpha": 0.0, "max_epochs": 5, "batch_size": 64, "seed": 1},
        "protected_family": [["grp"], ["sex"]],
        "audit": {"min_support": 2},
        "output_dir": str(out_dir),
        "figures": False,
    }


def test_materialize_rejects_unknown_keys(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path)
    cfg["typo_key"] = 1
    with pytest.raises(ConfigError, match="typo_key"):
        materialize_config(cfg)
    cfg.pop("typo_key")
    cfg["train"] = dict(cfg["train"], nope=2)
    with pytest.raises(ConfigError, match="train.nope"):
        materialize_config(cfg)


def test_materialize_requires_dataset_fields(tmp_path):
    with pytest.raises(ConfigError, match="dataset.path"):
        materialize_config({})


def test_semantic_hash_ignores_output_dir(toy_paths, tmp_path):
    a = materialize_config(_base_cfg(toy_paths, tmp_path / "a"))
    b = materialize_config(_base_cfg(toy_paths, tmp_path / "b"))
    assert semantic_hash(a) == semantic_hash(b)
    c = materialize_config(_base_cfg(toy_paths, tmp_path / "a"))
    c["train"]["alpha"] = 0.25
    assert semantic_hash(a) != semantic_hash(c)


def test_prepare_data_splits_and_audit(toy_paths, tmp_path):
    cfg = materialize_config(_base_cfg(toy_paths, tmp_path))
    prepared = prepare_data(cfg)
    assert prepared.train.n + prepared.valid.n + prepared.test.n == 600
    assert prepared.audit_names == ["grp", "sex"]
    assert prepared.audit_values.shape == (prepared.test.n, 2)
    # standardization came from the train split
    stats = prepared.train.standardization
    assert stats == prepared.test.standardization
    assert abs(prepared.train.rows[:, 2].mean()) < 1e-9


def test_prepare_drop_protected_removes_columns(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path)
    cfg["flags"] = {"drop_protected": True}
    prepared = prepare_data(materialize_config(cfg))
    assert prepared.train.schema.names == ["f1", "f2"]
    assert prepared.family is None
    assert prepared.mask_indices == ()
    # audit columns survive for reporting
    assert prepared.audit_values.shape[1] == 2


def test_drop_protected_with_alpha_rejected(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path)
    cfg["train"] = dict(cfg["train"], alpha=0.5)
    cfg["flags"] = {"drop_protected": True}
    with pytest.raises(ConfigError):
        prepare_data(materialize_config(cfg))


def test_prepare_upsample_balances_train(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path)
    cfg["flags"] = {"upsample": True}
    prepared = prepare_data(materialize_config(cfg))
    from fairmi.substitution import subgroup_keys

    keys = subgroup_keys(prepared.train.rows, [0, 1])
    counts = {k: keys.count(k) for k in set(keys)}
    assert len(set(counts.values())) == 1


def test_derive_rule_applied(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path)
    cfg["derive"] = [{"source": "grp", "mapping": {"P": "one", "Q": "one"},
                      "new_name": "coarse"}]
    prepared = prepare_data(materialize_config(cfg))
    assert "coarse" in prepared.train.schema.names


def test_run_experiment_stage_tagging(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path)
    cfg["dataset"] = dict(cfg["dataset"], label_column="wrong")
    with pytest.raises(Exception, match=r"\[stage prepare\]"):
        run_experiment(cfg)
    # stale marker survives the failed run
    assert (tmp_path / ".stale").exists()


def test_run_experiment_summary_and_manifest(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path / "run")
    summary = run_experiment(cfg)
    assert summary["n_train"] == 420
    assert summary["split_fractions"] == [0.7, 0.1, 0.2]
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["config_hash"] == summary["config_hash"]
    assert manifest["config"]["train"]["max_epochs"] == 5
    assert "created_utc" in manifest


def test_sweep_records_failures_and_continues(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path / "sweep")
    cfg["train"]["max_epochs"] = 2
    # alpha > 0 with drop_protected fails per-run but the sweep keeps going
    cfg["flags"] = {"drop_protected": True}
    rows = sweep(cfg, alphas=[0.0, 0.5], seeds=[1], out_dir=tmp_path / "sweep")
    assert [r["alpha"] for r in rows] == [0.0, 0.5]
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("error")
    assert rows[1]["accuracy"] is None


def test_sweep_parallel_matches_serial(toy_paths, tmp_path):
    cfg = _base_cfg(toy_paths, tmp_path / "s1")
    cfg["train"]["max_epochs"] = 3
    serial = sweep(cfg, alphas=[0.0, 0.5], seeds=[1], out_dir=tmp_path / "s1")
    cfg2 = _base_cfg(toy_paths, tmp_path / "s2")
    cfg2["train"]["max_epochs"] = 3
    parallel = sweep(cfg2, alphas=[0.0, 0.5], seeds=[1], jobs=2, out_dir=tmp_path / "s2")
    for a, b in zip(serial, parallel):
        assert a["accuracy"] == b["accuracy"]
        assert a["eo_tpr_gap"] == b["eo_tpr_gap"]


def test_mi_report_rows(toy_paths):
    schema = FeatureSchema.load(toy_paths["schema"])
    ds = load_csv(toy_paths["csv"], schema, "outcome")
    fam = ProtectedFamily.from_names(schema, [["grp"], ["sex"], ["grp", "sex"]])
    rows = mi_report(ds, fam, augmented=True, seed=5)
    assert [r["subset"] for r in rows] == ["grp", "sex", "grp+sex"]
    for row in rows:
        assert row["mi_original"] >= -1e-12
        assert row["mi_augmented"] is not None
        assert row["mi_augmented"] < row["mi_original"] or row["mi_original"] < 1e-4
    plain = mi_report(ds, fam, augmented=False, seed=5)
    assert all(r["mi_augmented"] is None for r in plain)


def test_mi_report_requires_family(toy_paths):
    schema = FeatureSchema.load(toy_paths["schema"])
    ds = load_csv(toy_paths["csv"], schema, "outcome")
    with pytest.raises(ConfigError):
        mi_report(ds, None, augmented=True, seed=0)
