"""Dataset ingestion, encoding, splitting and column surgery.

Encoded form: an (N, M) float64 matrix. Categorical cells hold integer codes
(category position in schema order) or the feature baseline; continuous cells
hold raw or z-scored values. Labels are 1-based class indices; the mapping
from raw label strings (sorted lexicographically) is kept on the dataset.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, ParseError, SchemaError
from .schema import CATEGORICAL, CONTINUOUS, FeatureSchema, FeatureSpec

log = logging.getLogger(__name__)

MISSING_TOKENS = {"", "?"}


@dataclass
class SplitSpec:
    """Train/valid/test fractions plus the shuffle seed."""

    train_fraction: float = 0.7
    valid_fraction: float = 0.1
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.valid_fraction, self.test_fraction)
        if any(not (0.0 < f < 1.0) for f in fracs):
            raise ConfigError(f"split fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)!r}")


@dataclass
class Dataset:
    """Encoded feature matrix plus labels, tied to a schema."""

    rows: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema
    C: int
    label_values: tuple[str, ...] = ()
    standardization: dict[str, tuple[float, float]] | None = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.rows.ndim != 2:
            raise InputError("rows must be a 2-D matrix")
        if self.rows.shape[0] != self.labels.shape[0]:
            raise InputError("rows and labels disagree on N")
        if self.rows.shape[0] < 1:
            raise InputError("dataset needs at least one row")
        if self.rows.shape[1] != len(self.schema):
            raise SchemaError(
                f"matrix has {self.rows.shape[1]} columns, schema has {len(self.schema)}"
            )
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.C):
            raise InputError(f"labels must lie in [1, {self.C}]")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def m(self) -> int:
        return self.rows.shape[1]

    def with_rows(self, rows: np.ndarray, labels: np.ndarray) -> Dataset:
        return replace(self, rows=rows, labels=labels)

    def binary_targets(self) -> np.ndarray:
        """0/1 vector marking the positive class (the highest class index)."""
        if self.C != 2:
            raise InputError("binary_targets is only defined for C=2")
        return (self.labels == self.C).astype(np.float64)


def load_csv(
    path: str | Path,
    schema: FeatureSchema,
    label_column: str,
    standardize: bool = False,
) -> Dataset:
    """Read a comma-separated, headered, UTF-8 file into an encoded Dataset.

    Cells equal to "?" or the empty string count as missing; their rows are
    dropped and the dropped count is logged. Unknown category strings raise
    EncodingError via the schema; non-numeric continuous cells raise
    ParseError with the offending row number.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise SchemaError(f"{path}: missing label column {label_column!r}")
        for feat in schema.features:
            if feat.name not in header:
                raise SchemaError(f"{path}: missing feature column {feat.name!r}")
        col_of = {name: header.index(name) for name in header}
        feat_cols = [col_of[f.name] for f in schema.features]
        label_col = col_of[label_column]

        encoded: list[list[float]] = []
        raw_labels: list[str] = []
        dropped = 0
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            cells = [record[c].strip() for c in feat_cols]
            label = record[label_col].strip()
            if label in MISSING_TOKENS or any(c in MISSING_TOKENS for c in cells):
                dropped += 1
                continue
            row = []
            for feat, cell in zip(schema.features, cells):
                if feat.kind == CATEGORICAL:
                    row.append(float(feat.code_of(cell)))
                else:
                    try:
                        row.append(float(cell))
                    except ValueError:
                        raise ParseError(
                            f"{path}: row {lineno}: feature {feat.name!r}: "
                            f"non-numeric value {cell!r}"
                        ) from None
            encoded.append(row)
            raw_labels.append(label)

    if dropped:
        log.info("%s: dropped %d rows with missing values", path.name, dropped)
    if not encoded:
        raise ParseError(f"{path}: no usable data rows")

    label_values = tuple(sorted(set(raw_labels)))
    if len(label_values) < 2:
        raise ParseError(f"{path}: need at least two label values, saw {label_values}")
    label_code = {v: i + 1 for i, v in enumerate(label_values)}
    labels = np.array([label_code[v] for v in raw_labels], dtype=np.int64)
    rows = np.array(encoded, dtype=np.float64)

    ds = Dataset(rows, labels, schema, C=len(label_values), label_values=label_values)
    if standardize:
        ds = apply_standardization(ds, standardization_stats(ds))
    return ds


def standardization_stats(ds: Dataset) -> dict[str, tuple[float, float]]:
    """Per-continuous-feature (mean, std) computed on this dataset."""
    stats = {}
    for i, feat in enumerate(ds.schema.features):
        if feat.kind != CONTINUOUS:
            continue
        col = ds.rows[:, i]
        mean = float(col.mean())
        std = float(col.std())
        if std == 0.0:
            log.warning("feature %s has zero variance; std forced to 1", feat.name)
            std = 1.0
        stats[feat.name] = (mean, std)
    return stats


def apply_standardization(ds: Dataset, stats: dict[str, tuple[float, float]]) -> Dataset:
    """Z-score continuous columns using the supplied statistics."""
    rows = ds.rows.copy()
    for name, (mean, std) in stats.items():
        i = ds.schema.index(name)
        rows[:, i] = (rows[:, i] - mean) / std
    return replace(ds, rows=rows, standardization=dict(stats))


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint, exhaustive, seed-deterministic partition into three parts.

    Sizes follow the fractions by largest-remainder rounding; each part keeps
    rows in their original order.
    """
    if ds.n < 3:
        raise InputError("need at least 3 rows to split")
    fracs = [spec.train_fraction, spec.valid_fraction, spec.test_fraction]
    sizes = _apportion(ds.n, fracs)
    perm = np.random.default_rng(spec.seed).permutation(ds.n)
    parts = []
    start = 0
    for size in sizes:
        idx = np.sort(perm[start : start + size])
        parts.append(ds.with_rows(ds.rows[idx], ds.labels[idx]))
        start += size
    return tuple(parts)


def _apportion(n: int, fracs: list[float]) -> list[int]:
    raw = [f * n for f in fracs]
    sizes = [int(np.floor(r)) for r in raw]
    remainders = [r - s for r, s in zip(raw, sizes)]
    short = n - sum(sizes)
    for i in sorted(range(len(fracs)), key=lambda i: -remainders[i])[:short]:
        sizes[i] += 1
    return sizes


def derive_feature(
    ds: Dataset,
    source: str,
    mapping: dict[str, str],
    new_name: str,
    protected: bool = False,
) -> Dataset:
    """Append a coarse categorical column computed from an existing one.

    The mapping must cover every category of the source feature; new
    categories appear in first-use order over the source category list.
    """
    src_idx = ds.schema.index(source)
    src = ds.schema.features[src_idx]
    if src.kind != CATEGORICAL:
        raise ConfigError(f"derive source {source!r} must be categorical")
    if new_name in ds.schema.names:
        raise ConfigError(f"feature {new_name!r} already exists")
    unmapped = [c for c in src.categories if c not in mapping]
    if unmapped:
        raise ConfigError(f"mapping misses source categories: {unmapped}")

    new_categories: list[str] = []
    for cat in src.categories:
        target = mapping[cat]
        if target not in new_categories:
            new_categories.append(target)
    new_spec = FeatureSpec(
        name=new_name,
        kind=CATEGORICAL,
        categories=tuple(new_categories),
        protected=protected,
    )
    code_map = np.array(
        [new_categories.index(mapping[cat]) for cat in src.categories], dtype=np.float64
    )

    src_col = ds.rows[:, src_idx]
    new_col = np.full(ds.n, new_spec.baseline, dtype=np.float64)
    valid = (src_col >= 0) & (src_col < len(src.categories)) & (src_col == src_col.astype(int))
    new_col[valid] = code_map[src_col[valid].astype(int)]

    schema = FeatureSchema(list(ds.schema.features) + [new_spec])
    rows = np.column_stack([ds.rows, new_col])
    return Dataset(
        rows, ds.labels.copy(), schema, ds.C, ds.label_values,
        dict(ds.standardization) if ds.standardization else None,
    )


def drop_features(ds: Dataset, names: set[str] | list[str]) -> Dataset:
    """Remove the named columns from the matrix and the schema."""
    names = set(names)
    for name in names:
        ds.schema.index(name)  # raises SchemaError on unknowns
    keep = [i for i, f in enumerate(ds.schema.features) if f.name not in names]
    schema = FeatureSchema([ds.schema.features[i] for i in keep])
    stats = None
    if ds.standardization is not None:
        stats = {k: v for k, v in ds.standardization.items() if k not in names}
    return Dataset(ds.rows[:, keep], ds.labels.copy(), schema, ds.C, ds.label_values, stats)


# -- encoded-form persistence ---------------------------------------------


def save_dataset(ds: Dataset, csv_path: str | Path) -> Path:
    """Write the encoded matrix to CSV plus a .meta.json sidecar.

    Values are written with repr so a reload reproduces the matrix bit for
    bit.
    """
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.schema.names + ["__label__"])
        for row, label in zip(ds.rows, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [str(int(label))])
    meta = {
        "schema": ds.schema.to_dict(),
        "C": ds.C,
        "label_values": list(ds.label_values),
        "standardization": ds.standardization,
    }
    meta_path = _meta_path(csv_path)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path


def load_dataset(csv_path: str | Path) -> Dataset:
    """Re-load a dataset written by save_dataset."""
    csv_path = Path(csv_path)
    meta = json.loads(_meta_path(csv_path).read_text(encoding="utf-8"))
    schema = FeatureSchema.from_dict(meta["schema"])
    rows = []
    labels = []
    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for record in reader:
            rows.append([float(v) for v in record[:-1]])
            labels.append(int(record[-1]))
    stats = meta.get("standardization")
    if stats is not None:
        stats = {k: tuple(v) for k, v in stats.items()}
    return Dataset(
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int64),
        schema,
        C=meta["C"],
        label_values=tuple(meta["label_values"]),
        standardization=stats,
    )


def _meta_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".meta.json")
