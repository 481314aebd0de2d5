"""Pairwise feature-interaction scores via second-order baseline differences.

The score for features (i, j) on row x is
    | f(x) - f(x with i at baseline) - f(x with j at baseline)
      + f(x with both at baseline) |
with f the positive-class probability. Additive models score zero on every
pair; the heatmap aggregates the mean score over a set of rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import AuditError
from .nn import ModelState, predict_proba
from .substitution import subgroup_keys

FUNCTIONAL_NAME = "abs-second-order-baseline-difference"


@dataclass
class InteractionHeatmap:
    matrix: np.ndarray
    feature_names: list[str]
    group_label: str | None
    sample_count: int
    functional: str = FUNCTIONAL_NAME

    def protected_mass(self, indices: list[int]) -> float:
        """Mean of the heatmap entries on the given rows/columns."""
        m = self.matrix
        mask = np.zeros_like(m, dtype=bool)
        for i in indices:
            mask[i, :] = True
            mask[:, i] = True
        np.fill_diagonal(mask, False)
        return float(m[mask].mean())


def _proba_fn(model) -> callable:
    if isinstance(model, ModelState):
        return lambda rows: np.asarray(predict_proba(model, rows), dtype=np.float64)
    if callable(model):
        return lambda rows: np.asarray(model(rows), dtype=np.float64)
    raise TypeError("model must be a ModelState or a callable rows -> probabilities")


def pair_interaction(model, x: np.ndarray, baseline: np.ndarray, i: int, j: int) -> float:
    """Interaction score of features i and j on a single row."""
    if i == j:
        raise ValueError("pair interaction needs two distinct features")
    f = _proba_fn(model)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    variants = np.repeat(x, 4, axis=0)
    variants[1, i] = baseline[i]
    variants[2, j] = baseline[j]
    variants[3, i] = baseline[i]
    variants[3, j] = baseline[j]
    p = f(variants)
    return float(abs(p[0] - p[1] - p[2] + p[3]))


def interaction_heatmap(
    model,
    ds: Dataset,
    group_by: list[int] | None = None,
    group_key: tuple | None = None,
    group_label: str | None = None,
) -> InteractionHeatmap:
    """Mean pairwise interaction over the dataset (optionally one subgroup).

    Symmetric with a zero diagonal by construction. When group_by/group_key
    are given, only rows whose projection onto group_by equals group_key are
    aggregated.
    """
    rows = ds.rows
    if group_by is not None and group_key is not None:
        keys = subgroup_keys(rows, group_by)
        member = np.array([k == tuple(group_key) for k in keys], dtype=bool)
        rows = rows[member]
    if rows.shape[0] == 0:
        raise AuditError("no rows left after subgroup filtering")

    f = _proba_fn(model)
    baseline = ds.schema.baseline_vector()
    n, m = rows.shape
    base = f(rows)
    singles = np.empty((m, n))
    for i in range(m):
        variant = rows.copy()
        variant[:, i] = baseline[i]
        singles[i] = f(variant)

    matrix = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            variant = rows.copy()
            variant[:, i] = baseline[i]
            variant[:, j] = baseline[j]
            both = f(variant)
            score = float(np.mean(np.abs(base - singles[i] - singles[j] + both)))
            matrix[i, j] = score
            matrix[j, i] = score
    return InteractionHeatmap(
        matrix=matrix,
        feature_names=ds.schema.names,
        group_label=group_label,
        sample_count=n,
    )
