"""Baseline substitution and the resampling primitives built on it.

substitute keeps the selected coordinates and replaces every other one with
its baseline value; mask_features is the complement view used for
inference-time masking of protected attributes.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable

import numpy as np

from .dataset import Dataset
from .errors import ConfigError
from .schema import ProtectedFamily


def _keep_mask(m: int, indices: Iterable[int]) -> np.ndarray:
    mask = np.zeros(m, dtype=bool)
    idx = list(indices)
    if idx:
        arr = np.asarray(idx, dtype=np.int64)
        if arr.min() < 0 or arr.max() >= m:
            raise IndexError(f"feature index out of range for width {m}")
        mask[arr] = True
    return mask


def substitute(x: np.ndarray, baseline: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Replace every coordinate outside `keep` with its baseline value.

    Works on a single row or on an (N, M) batch.
    """
    x = np.asarray(x, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    mask = _keep_mask(x.shape[-1], keep)
    return np.where(mask, x, baseline)


def mask_features(x: np.ndarray, baseline: np.ndarray, mask: Iterable[int]) -> np.ndarray:
    """Set the coordinates in `mask` to their baselines, keep the rest."""
    x = np.asarray(x, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    drop = _keep_mask(x.shape[-1], mask)
    return np.where(drop, baseline, x)


def subgroup_key(x: np.ndarray, indices: Iterable[int]) -> tuple[float, ...]:
    """Project a row onto the given feature indices (ascending order)."""
    x = np.asarray(x, dtype=np.float64)
    return tuple(float(x[i]) for i in sorted(set(indices)))


def subgroup_keys(rows: np.ndarray, indices: Iterable[int]) -> list[tuple[float, ...]]:
    idx = sorted(set(indices))
    cols = np.asarray(rows, dtype=np.float64)[:, idx]
    return [tuple(row) for row in cols.tolist()]


def upsample(ds: Dataset, indices: Iterable[int], seed: int) -> Dataset:
    """Equalize subgroup counts by resampling each subgroup with replacement.

    Every original row is retained; appended rows duplicate originals of the
    same subgroup until each subgroup reaches the size of the largest one.
    """
    keys = subgroup_keys(ds.rows, indices)
    groups: dict[tuple[float, ...], list[int]] = defaultdict(list)
    for i, key in enumerate(keys):
        groups[key].append(i)
    target = max(len(v) for v in groups.values())
    rng = np.random.default_rng(seed)
    extra: list[int] = []
    for key in sorted(groups):
        members = groups[key]
        short = target - len(members)
        if short > 0:
            picks = rng.integers(0, len(members), size=short)
            extra.extend(members[p] for p in picks)
    if not extra:
        return ds.with_rows(ds.rows.copy(), ds.labels.copy())
    idx = np.concatenate([np.arange(ds.n), np.array(extra, dtype=np.int64)])
    return ds.with_rows(ds.rows[idx], ds.labels[idx])


def augment_for_mi(ds: Dataset, family: ProtectedFamily, seed: int) -> Dataset:
    """Append, per subset, every row substituted down to that subset with a
    uniformly random label.

    Output size is N * (1 + |family|). The appended blocks keep subset order,
    so the result is deterministic given the seed.
    """
    if len(family) == 0:
        raise ConfigError("protected family must be non-empty")
    baseline = ds.schema.baseline_vector()
    rng = np.random.default_rng(seed)
    blocks = [ds.rows]
    labels = [ds.labels]
    for subset in family.subsets:
        blocks.append(substitute(ds.rows, baseline, subset))
        labels.append(rng.integers(1, ds.C + 1, size=ds.n, dtype=np.int64))
    return ds.with_rows(np.concatenate(blocks), np.concatenate(labels))
