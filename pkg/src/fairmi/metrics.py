"""Subgroup fairness metrics and discrete information measures.

Predictions and labels here are 0/1 indicator vectors for the positive
outcome; subgroup membership comes in as a per-row key. Rates follow the
usual confusion-matrix definitions, gaps are max minus min over subgroups
that survive the support filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AuditError, InputError


@dataclass
class SubgroupStats:
    key: tuple
    count: int
    positives: int
    negatives: int
    tp: int
    fp: int
    fn: int
    tn: int
    tpr: float | None
    fpr: float | None
    positive_rate: float
    included: bool


@dataclass
class SubgroupReport:
    groups: list[SubgroupStats]
    min_support: int

    def included(self) -> list[SubgroupStats]:
        return [g for g in self.groups if g.included]

    def by_key(self, key: tuple) -> SubgroupStats:
        for g in self.groups:
            if g.key == tuple(key):
                return g
        raise AuditError(f"no subgroup with key {key}")


@dataclass
class FairnessGaps:
    eo_tpr_gap: float
    eo_fpr_gap: float
    dp_gap: float
    extremes: dict[str, dict[str, tuple]] = field(default_factory=dict)


def enumerate_subgroups(keys: list[tuple]) -> list[tuple]:
    """Distinct observed keys, sorted."""
    return sorted(set(tuple(k) for k in keys))


def subgroup_rates(
    preds,
    labels,
    keys: list[tuple],
    min_support: int = 5,
    positive_label=1,
) -> SubgroupReport:
    """Confusion-matrix rates per subgroup.

    Groups with fewer than min_support rows, no positives, or no negatives
    are flagged excluded but stay in the report.
    """
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape[0] != labels.shape[0] or preds.shape[0] != len(keys):
        raise InputError("preds, labels and keys must have equal length")
    pred_pos = preds == positive_label
    label_pos = labels == positive_label

    groups = []
    for key in enumerate_subgroups(keys):
        members = np.array([k == key for k in keys], dtype=bool)
        count = int(members.sum())
        pp = pred_pos[members]
        lp = label_pos[members]
        tp = int(np.sum(pp & lp))
        fp = int(np.sum(pp & ~lp))
        fn = int(np.sum(~pp & lp))
        tn = int(np.sum(~pp & ~lp))
        positives = tp + fn
        negatives = fp + tn
        tpr = tp / positives if positives else None
        fpr = fp / negatives if negatives else None
        included = count >= min_support and tpr is not None and fpr is not None
        groups.append(
            SubgroupStats(
                key=key,
                count=count,
                positives=positives,
                negatives=negatives,
                tp=tp,
                fp=fp,
                fn=fn,
                tn=tn,
                tpr=tpr,
                fpr=fpr,
                positive_rate=(tp + fp) / count,
                included=included,
            )
        )
    return SubgroupReport(groups=groups, min_support=min_support)


def _extent(values: list[tuple[tuple, float]]) -> tuple[float, tuple, tuple]:
    lo_key, lo = min(values, key=lambda kv: (kv[1], kv[0]))
    hi_key, hi = max(values, key=lambda kv: (kv[1], kv[0]))
    return hi - lo, lo_key, hi_key


def eo_gaps(report: SubgroupReport) -> tuple[float, float]:
    """Max minus min of TPR and of FPR across included subgroups."""
    included = report.included()
    if not included:
        raise AuditError("no subgroup passed the support filter")
    tpr_gap, _, _ = _extent([(g.key, g.tpr) for g in included])
    fpr_gap, _, _ = _extent([(g.key, g.fpr) for g in included])
    return tpr_gap, fpr_gap


def dp_gap(report: SubgroupReport) -> float:
    """Max minus min of the positive-prediction rate across included subgroups."""
    included = report.included()
    if not included:
        raise AuditError("no subgroup passed the support filter")
    gap, _, _ = _extent([(g.key, g.positive_rate) for g in included])
    return gap


def fairness_gaps(report: SubgroupReport) -> FairnessGaps:
    """All three gaps plus the contributing extreme subgroup keys."""
    included = report.included()
    if not included:
        raise AuditError("no subgroup passed the support filter")
    extremes = {}
    out = {}
    for name, values in (
        ("eo_tpr_gap", [(g.key, g.tpr) for g in included]),
        ("eo_fpr_gap", [(g.key, g.fpr) for g in included]),
        ("dp_gap", [(g.key, g.positive_rate) for g in included]),
    ):
        gap, lo, hi = _extent(values)
        out[name] = gap
        extremes[name] = {"min": lo, "max": hi}
    return FairnessGaps(out["eo_tpr_gap"], out["eo_fpr_gap"], out["dp_gap"], extremes)


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape[0] != labels.shape[0]:
        raise InputError("preds and labels must have equal length")
    if preds.shape[0] == 0:
        raise InputError("accuracy of an empty sequence is undefined")
    return float(np.mean(preds == labels))


def entropy(column) -> float:
    """Plug-in entropy of a discrete column, in nats."""
    values = np.asarray(column)
    if values.size == 0:
        raise InputError("entropy of an empty column is undefined")
    _, counts = np.unique(values, return_counts=True)
    p = counts / values.shape[0]
    return float(-np.sum(p * np.log(p)))


def _joint_codes(columns) -> np.ndarray:
    cols = np.asarray(columns)
    if cols.ndim == 1:
        cols = cols[:, None]
    _, codes = np.unique(cols, axis=0, return_inverse=True)
    return codes.reshape(-1)


def mutual_information(columns, y) -> float:
    """Plug-in mutual information between a (joint) discrete column and labels.

    Computed as H(x) + H(y) - H(x, y) over empirical frequencies; symmetric
    and non-negative up to float round-off.
    """
    x_codes = _joint_codes(columns)
    y = np.asarray(y)
    if x_codes.shape[0] != y.shape[0]:
        raise InputError("columns and labels must have equal length")
    if x_codes.shape[0] == 0:
        raise InputError("mutual information of empty columns is undefined")
    y_codes = _joint_codes(y)
    joint = x_codes.astype(np.int64) * (y_codes.max() + 1) + y_codes
    return entropy(x_codes) + entropy(y_codes) - entropy(joint)
