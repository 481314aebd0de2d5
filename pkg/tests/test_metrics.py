import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairmi.errors import AuditError, InputError
from fairmi.metrics import (
    accuracy,
    dp_gap,
    entropy,
    enumerate_subgroups,
    eo_gaps,
    fairness_gaps,
    mutual_information,
    subgroup_rates,
)


# -- straight-line reference implementation (kept free of fairmi calls) ------


def brute_force_rates(preds, labels, keys, min_support):
    groups = {}
    for p, l, k in zip(preds, labels, keys):
        groups.setdefault(k, []).append((p, l))
    out = {}
    for key, rows in groups.items():
        tp = sum(1 for p, l in rows if p == 1 and l == 1)
        fp = sum(1 for p, l in rows if p == 1 and l == 0)
        fn = sum(1 for p, l in rows if p == 0 and l == 1)
        tn = sum(1 for p, l in rows if p == 0 and l == 0)
        tpr = tp / (tp + fn) if (tp + fn) else None
        fpr = fp / (fp + tn) if (fp + tn) else None
        included = len(rows) >= min_support and tpr is not None and fpr is not None
        out[key] = {
            "tpr": tpr,
            "fpr": fpr,
            "rate": (tp + fp) / len(rows),
            "included": included,
        }
    return out


def brute_force_gaps(table):
    inc = [v for v in table.values() if v["included"]]
    if not inc:
        return None
    tprs = [v["tpr"] for v in inc]
    fprs = [v["fpr"] for v in inc]
    rates = [v["rate"] for v in inc]
    return max(tprs) - min(tprs), max(fprs) - min(fprs), max(rates) - min(rates)


def test_enumerate_subgroups_full_cross():
    keys = [(g, r) for g in (0.0, 1.0) for r in (0.0, 1.0, 2.0)] * 2
    assert len(enumerate_subgroups(keys)) == 6


def test_enumerate_subgroups_observed_only():
    keys = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
    groups = enumerate_subgroups(keys)
    assert (1.0, 1.0) not in groups
    assert len(groups) == 3


def test_subgroup_rates_four_sample_confusion():
    report = subgroup_rates([1, 0, 1, 0], [1, 1, 0, 0], [("g",)] * 4, min_support=1)
    g = report.groups[0]
    assert g.tpr == 0.5 and g.fpr == 0.5 and g.positive_rate == 0.5
    assert g.count == 4 and g.positives == 2 and g.negatives == 2


def test_subgroup_no_positives_excluded():
    report = subgroup_rates([0, 1], [0, 0], [("g",), ("g",)], min_support=1)
    g = report.groups[0]
    assert g.tpr is None and not g.included
    assert g.fpr == 0.5


def test_subgroup_below_min_support_excluded_not_dropped():
    preds = [1, 0, 1, 1, 0, 1, 1, 1]
    labels = [1, 0, 1, 0, 1, 1, 0, 1]
    keys = [("big",)] * 6 + [("small",)] * 2
    report = subgroup_rates(preds, labels, keys, min_support=5)
    by_key = {g.key: g for g in report.groups}
    assert by_key[("big",)].included
    assert not by_key[("small",)].included
    assert len(report.groups) == 2


def test_subgroup_rates_match_brute_force_on_random_tables():
    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(5, 60))
        preds = rng.integers(0, 2, n).tolist()
        labels = rng.integers(0, 2, n).tolist()
        keys = [(float(rng.integers(0, 3)), float(rng.integers(0, 2))) for _ in range(n)]
        min_support = int(rng.integers(1, 6))
        report = subgroup_rates(preds, labels, keys, min_support=min_support)
        expected = brute_force_rates(preds, labels, keys, min_support)
        assert len(report.groups) == len(expected)
        for g in report.groups:
            e = expected[g.key]
            assert g.tpr == e["tpr"] and g.fpr == e["fpr"]
            assert g.positive_rate == e["rate"]
            assert g.included == e["included"]
        want = brute_force_gaps(expected)
        if want is None:
            with pytest.raises(AuditError):
                eo_gaps(report)
        else:
            tpr_gap, fpr_gap = eo_gaps(report)
            assert (tpr_gap, fpr_gap, dp_gap(report)) == want


def test_subgroup_counts_total():
    rng = np.random.default_rng(7)
    n = 50
    preds = rng.integers(0, 2, n)
    labels = rng.integers(0, 2, n)
    keys = [(float(k),) for k in rng.integers(0, 4, n)]
    report = subgroup_rates(preds, labels, keys, min_support=1)
    assert sum(g.count for g in report.groups) == n
    for g in report.groups:
        assert g.tp + g.fn == g.positives
        assert g.fp + g.tn == g.negatives


def test_eo_gaps_max_minus_min():
    # three groups with TPRs 0.9, 0.6, 0.8
    preds, labels, keys = [], [], []
    for key, tpr, size in (("a", 0.9, 10), ("b", 0.6, 10), ("c", 0.8, 10)):
        hits = int(tpr * size)
        preds += [1] * hits + [0] * (size - hits) + [0]
        labels += [1] * size + [0]
        keys += [(key,)] * (size + 1)
    report = subgroup_rates(preds, labels, keys, min_support=1)
    tpr_gap, fpr_gap = eo_gaps(report)
    assert tpr_gap == pytest.approx(0.3)
    assert fpr_gap == 0.0


def test_single_subgroup_zero_gaps():
    report = subgroup_rates([1, 0, 1], [1, 0, 0], [("only",)] * 3, min_support=1)
    assert eo_gaps(report) == (0.0, 0.0)
    assert dp_gap(report) == 0.0


def test_no_included_subgroups_is_an_error():
    report = subgroup_rates([1, 1], [1, 1], [("a",), ("b",)], min_support=1)
    with pytest.raises(AuditError):
        eo_gaps(report)
    with pytest.raises(AuditError):
        dp_gap(report)


def test_dp_gap_equal_rates():
    report = subgroup_rates([1, 0, 1, 0], [1, 0, 0, 1], [("a",), ("a",), ("b",), ("b",)],
                            min_support=1)
    assert dp_gap(report) == 0.0


def test_constant_predictor_zero_dp_gap():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 2, 40)
    keys = [(float(k),) for k in rng.integers(0, 4, 40)]
    report = subgroup_rates(np.ones(40, dtype=int), labels, keys, min_support=1)
    included = report.included()
    if included:
        assert dp_gap(report) == 0.0


@given(st.permutations(["a", "b", "c", "d"]))
def test_gaps_invariant_under_subgroup_relabeling(perm):
    rng = np.random.default_rng(11)
    n = 80
    preds = rng.integers(0, 2, n)
    labels = rng.integers(0, 2, n)
    base_keys = [("a", "b", "c", "d")[k] for k in rng.integers(0, 4, n)]
    mapping = dict(zip(["a", "b", "c", "d"], perm))
    r1 = subgroup_rates(preds, labels, [(k,) for k in base_keys], min_support=1)
    r2 = subgroup_rates(preds, labels, [(mapping[k],) for k in base_keys], min_support=1)
    assert fairness_gaps(r1).eo_tpr_gap == fairness_gaps(r2).eo_tpr_gap
    assert fairness_gaps(r1).eo_fpr_gap == fairness_gaps(r2).eo_fpr_gap
    assert fairness_gaps(r1).dp_gap == fairness_gaps(r2).dp_gap


def test_accuracy_basic():
    assert accuracy([1, 2, 1], [1, 2, 1]) == 1.0
    assert accuracy([1, 1], [2, 2]) == 0.0
    assert accuracy([1, 2, 2, 1], [1, 2, 1, 2]) == 0.5
    assert accuracy([1, 2, 2, 2], [1, 2, 2, 1]) == 0.75


def test_accuracy_errors():
    with pytest.raises(InputError):
        accuracy([], [])
    with pytest.raises(InputError):
        accuracy([1], [1, 2])


def test_entropy_closed_forms():
    assert entropy([5, 5, 5]) == 0.0
    assert entropy([0, 1, 0, 1]) == pytest.approx(math.log(2))
    col = [0] * 1 + [1] * 3
    expected = -0.25 * math.log(0.25) - 0.75 * math.log(0.75)
    assert entropy(col) == pytest.approx(expected)


def test_mutual_information_independent_columns():
    rng = np.random.default_rng(13)
    n = 100_000
    x = rng.integers(0, 2, n)
    y = rng.integers(0, 2, n)
    assert mutual_information(x, y) <= 0.001


def test_mutual_information_identical_columns():
    x = np.array([0, 1] * 500)
    assert mutual_information(x, x) == pytest.approx(math.log(2))


def test_mutual_information_from_published_two_by_two_counts():
    # gender x outcome contingency counts: (male-no, male-yes, female-no, female-yes)
    counts = {(0, 0): 524, (0, 1): 10977, (1, 0): 514, (1, 1): 8412}
    n = sum(counts.values())
    # independent plug-in computation with exact fractions
    px = {g: Fraction(counts[(g, 0)] + counts[(g, 1)], n) for g in (0, 1)}
    py = {c: Fraction(counts[(0, c)] + counts[(1, c)], n) for c in (0, 1)}
    expected = 0.0
    for (g, c), cnt in counts.items():
        pxy = Fraction(cnt, n)
        expected += float(pxy) * math.log(float(pxy) / float(px[g] * py[c]))

    gender = np.concatenate([np.full(v, g) for (g, c), v in sorted(counts.items())])
    labels = np.concatenate([np.full(v, c) for (g, c), v in sorted(counts.items())])
    assert mutual_information(gender, labels) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.000370, abs=5e-6)


def test_mutual_information_symmetry_and_bounds():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = 400
        x = rng.integers(0, 3, n)
        y = np.where(rng.random(n) < 0.3, x % 2, rng.integers(0, 2, n))
        mi_xy = mutual_information(x, y)
        mi_yx = mutual_information(y, x)
        assert abs(mi_xy - mi_yx) <= 1e-12
        assert mi_xy >= -1e-12
        assert mi_xy <= min(entropy(x), entropy(y)) + 1e-12


def test_mutual_information_joint_columns():
    rng = np.random.default_rng(19)
    n = 2000
    a = rng.integers(0, 2, n)
    b = rng.integers(0, 2, n)
    y = (a ^ b)  # y depends on the pair, not on either column alone
    joint = mutual_information(np.column_stack([a, b]), y)
    assert joint == pytest.approx(math.log(2), rel=0.01)
    assert mutual_information(a, y) <= 0.01


def test_mutual_information_errors():
    with pytest.raises(InputError):
        mutual_information([1, 2], [1])
    with pytest.raises(InputError):
        mutual_information([], [])
