"""Command-line front end.

Exit codes: 0 success, 1 config error, 2 data error, 3 numeric or training
error, 4 integrity or network error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import datagen, experiment, fetch
from .dataset import save_dataset
from .errors import (
    AuditError,
    ConfigError,
    FairmiError,
    InputError,
    IntegrityError,
    NetworkError,
    NumericError,
    ParseError,
    SchemaError,
    TrainingError,
)

log = logging.getLogger("fairmi")

EXIT_CODES = (
    (ConfigError, 1),
    ((SchemaError, ParseError, InputError, AuditError), 2),
    ((NumericError, TrainingError), 3),
    ((IntegrityError, NetworkError), 4),
)


def _common(parser: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        parser.add_argument("--config", required=True, help="experiment config JSON")
        parser.add_argument("--seed", type=int, default=None, help="override train seed")
        parser.add_argument("--out", default=None, help="override output directory")
        parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    parser.add_argument("--quiet", action="store_true", help="log errors only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairmi",
        description="Train tabular classifiers under a substitution-based fairness "
        "regularizer and audit intersectional subgroup gaps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark table")
    p.add_argument("--dataset", required=True, choices=sorted(datagen.GENERATORS))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    _common(p, config=False)

    p = sub.add_parser("fetch", help="download a dataset with checksum verification")
    p.add_argument("--dataset", required=True)
    p.add_argument("--dest", required=True)
    p.add_argument("--table", default=None, help="override the URL/checksum table")
    _common(p, config=False)

    p = sub.add_parser("prepare", help="encode, split and persist a dataset")
    _common(p)

    p = sub.add_parser("train", help="run prepare + train + evaluate")
    _common(p)

    p = sub.add_parser("evaluate", help="re-evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--mask", dest="mask", action="store_true", default=None,
                       help="mask protected features in the test split")
    group.add_argument("--no-mask", dest="mask", action="store_false")
    _common(p)

    p = sub.add_parser("sweep", help="run one experiment per (alpha, seed)")
    p.add_argument("--alphas", required=True, help="comma-separated alphas")
    p.add_argument("--seeds", default=None, help="comma-separated seeds")
    p.add_argument("--jobs", type=int, default=1)
    _common(p)

    p = sub.add_parser("mi", help="mutual information before/after augmentation")
    p.add_argument("--splits", default="train,test,full")
    _common(p)

    p = sub.add_parser("interactions", help="pairwise interaction heatmaps")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--slice-by", default=None, help="categorical feature to slice on")
    _common(p)

    return parser


def _load_config(args) -> dict:
    cfg = experiment.load_config_file(args.config)
    if args.seed is not None:
        cfg["train"]["seed"] = args.seed
    if args.out is not None:
        cfg["output_dir"] = args.out
    if args.no_figures:
        cfg["figures"] = False
    return cfg


def _cmd_synth(args) -> int:
    paths = datagen.generate(args.dataset, args.out, seed=args.seed)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
    return 0


def _cmd_fetch(args) -> int:
    path = fetch.fetch_dataset(args.dataset, args.dest, table=args.table)
    print(path)
    return 0


def _cmd_prepare(args) -> int:
    cfg = _load_config(args)
    prepared = experiment.prepare_data(cfg)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, part in (("train", prepared.train), ("valid", prepared.valid),
                       ("test", prepared.test)):
        outputs.append(str(save_dataset(part, out / f"{name}.csv")))
    from .report import config_hash, write_manifest

    write_manifest(out / "manifest.json", cfg, config_hash(cfg), prepared.seeds, outputs,
                   extra={"train_split_hash": prepared.train_split_hash})
    print(json.dumps({"output_dir": str(out), "n_train": prepared.train.n,
                      "n_valid": prepared.valid.n, "n_test": prepared.test.n}, indent=2))
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    summary = experiment.run_experiment(cfg)
    print(json.dumps({k: summary[k] for k in (
        "config_hash", "accuracy", "eo_tpr_gap", "eo_fpr_gap", "dp_gap",
        "best_epoch", "best_validation_accuracy")}, indent=2))
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    summary = experiment.evaluate_checkpoint(cfg, args.checkpoint, out_dir=cfg["output_dir"],
                                             mask=args.mask)
    print(json.dumps({k: summary[k] for k in (
        "config_hash", "masked", "accuracy", "eo_tpr_gap", "eo_fpr_gap", "dp_gap")}, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    alphas = [float(a) for a in args.alphas.split(",") if a.strip() != ""]
    seeds = ([int(s) for s in args.seeds.split(",") if s.strip() != ""]
             if args.seeds else [cfg["train"]["seed"]])
    rows = experiment.sweep(cfg, alphas, seeds, jobs=args.jobs)
    print(json.dumps(rows, indent=2))
    return 0


def _cmd_mi(args) -> int:
    cfg = _load_config(args)
    splits = tuple(s.strip() for s in args.splits.split(",") if s.strip())
    rows = experiment.mi_table(cfg, splits=splits)
    print(json.dumps(rows, indent=2))
    return 0


def _cmd_interactions(args) -> int:
    cfg = _load_config(args)
    heatmaps = experiment.interactions_report(cfg, args.checkpoint, slice_by=args.slice_by,
                                              out_dir=cfg["output_dir"])
    print(json.dumps([{"group": h.group_label, "samples": h.sample_count}
                      for h in heatmaps], indent=2))
    return 0


HANDLERS = {
    "synth": _cmd_synth,
    "fetch": _cmd_fetch,
    "prepare": _cmd_prepare,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "mi": _cmd_mi,
    "interactions": _cmd_interactions,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return HANDLERS[args.command](args)
    except FairmiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for types, code in EXIT_CODES:
            if isinstance(exc, types):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
