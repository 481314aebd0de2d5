"""Synthetic benchmark tables with realistic intersectional structure.

Each generator reproduces the exact joint (gender, race, label) counts of a
well-known tabular benchmark and synthesizes the remaining columns from a
per-row latent "merit" score whose distribution varies by subgroup. The
parameter tables below were calibrated so that the shipped experiment
configs land near the published behavior of small MLP classifiers on the
real datasets: a biased baseline with a large subgroup TPR spread, strong
sensitivity to masking protected attributes, and an effective response to
the substitution regularizer.

All generators are deterministic given their seed and write a CSV plus a
schema JSON next to it.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .schema import CATEGORICAL, CONTINUOUS, FeatureSchema, FeatureSpec

log = logging.getLogger(__name__)

# per (gender, race) cell: (negatives, positives). Cell sizes follow the
# published breakdown of the real dataset; the label split within each cell
# is calibrated (see module docstring).
LSAC_CELLS = {
    ("Male", "White"): (425, 8075),
    ("Female", "White"): (448, 7022),
    ("Male", "Asian"): (26, 104),
    ("Female", "Asian"): (26, 94),
    ("Male", "Hispanic"): (243, 397),
    ("Female", "Hispanic"): (224, 336),
    ("Male", "Black"): (624, 676),
    ("Female", "Black"): (750, 750),
    ("Male", "Other"): (44, 66),
    ("Female", "Other"): (44, 53),
}

# per cell: amb = share of positives in the weak-evidence region, n0 = share
# of negatives there, hard = share of negatives overlapping clear positives.
# Inside the weak region the feature distribution is identical across cells,
# so only the protected codes separate them; the per-cell weak-region label
# rate then decides which groups a code-aware model writes off. The negative
# mixture is uniform across cells so a group-blind model produces nearly
# identical per-group false-positive rates.
LSAC_TEXTURE = {
    ("Male", "White"): (0.190, 0.70, 0.12),
    ("Female", "White"): (0.200, 0.70, 0.12),
    ("Male", "Asian"): (0.200, 0.70, 0.12),
    ("Female", "Asian"): (0.220, 0.70, 0.12),
    ("Male", "Hispanic"): (0.340, 0.70, 0.12),
    ("Female", "Hispanic"): (0.360, 0.70, 0.12),
    ("Male", "Black"): (0.540, 0.66, 0.12),
    ("Female", "Black"): (0.580, 0.66, 0.12),
    ("Male", "Other"): (0.440, 0.70, 0.12),
    ("Female", "Other"): (0.480, 0.70, 0.12),
}

ADULT_CELLS = {
    ("Male", "White"): (18423, 8277),
    ("Female", "White"): (10052, 1569),
    ("Male", "Black"): (1737, 407),
    ("Female", "Black"): (1896, 188),
    ("Male", "Asian-Pac-Isl"): (581, 286),
    ("Female", "Asian-Pac-Isl"): (358, 78),
    ("Male", "Amer-Ind-Esk"): (328, 72),
    ("Female", "Amer-Ind-Esk"): (290, 60),
    ("Male", "Other"): (259, 61),
    ("Female", "Other"): (240, 60),
}

# per cell (amb, n0, hard), same semantics as LSAC_TEXTURE
ADULT_TEXTURE = {
    ("Male", "White"): (0.12, 0.30, 0.10),
    ("Female", "White"): (0.14, 0.30, 0.10),
    ("Male", "Asian-Pac-Isl"): (0.10, 0.30, 0.10),
    ("Female", "Asian-Pac-Isl"): (0.12, 0.30, 0.10),
    ("Male", "Black"): (0.30, 0.30, 0.10),
    ("Female", "Black"): (0.30, 0.30, 0.10),
    ("Male", "Other"): (0.30, 0.30, 0.10),
    ("Female", "Other"): (0.30, 0.30, 0.10),
    ("Male", "Amer-Ind-Esk"): (0.32, 0.30, 0.10),
    ("Female", "Amer-Ind-Esk"): (0.34, 0.30, 0.10),
}

COMPAS_CELLS = {
    ("Male", "Caucasian"): (968, 652),
    ("Male", "Not-Caucasian"): (1630, 1744),
    ("Female", "Caucasian"): (310, 170),
    ("Female", "Not-Caucasian"): (450, 230),
}

# merit bands for the evidence regions; "weak" rows form the contested band
# between the clear clusters where group membership decides outcomes
_LSAC_REGIONS = {
    "clear_pos": (1.55, 0.80),
    "weak": (-0.20, 0.50),
    "clear_neg": (-1.60, 0.75),
    "hard_neg": (0.40, 0.35),
}

# no per-cell feature shifts: within each evidence region the features are
# identically distributed across cells, so the group signal is carried only
# by the codes (and is therefore removable by the regularizer)
LSAC_SHIFT = {cell: 0.0 for cell in LSAC_CELLS}

_LSAC_INC_SHIFT = {"White": 0.8, "Asian": 0.4, "Hispanic": -0.3, "Black": -0.5, "Other": -0.2}


def _round_col(values: np.ndarray, decimals: int) -> np.ndarray:
    return np.round(values, decimals)


def _regions(
    rng: np.random.Generator, n: int, positive: bool, amb: float, n0: float, hard: float
) -> np.ndarray:
    """Region tags per row: 0 clear-pos, 1 weak, 2 clear-neg, 3 hard-neg."""
    u = rng.random(n)
    if positive:
        return np.where(u < amb, 1, 0)
    tags = np.full(n, 2)
    tags[u < n0] = 1
    tags[(u >= n0) & (u < n0 + hard)] = 3
    return tags


def _merit_views(
    rng: np.random.Generator,
    tags: np.ndarray,
    regions: dict[str, tuple[float, float]],
    weights: list[float],
    noises: list[float],
    shift: float = 0.0,
) -> np.ndarray:
    """Feature matrix: weighted noisy views of the per-region merit draw."""
    n = tags.shape[0]
    merit = np.full(n, shift)
    for tag, key in ((0, "clear_pos"), (1, "weak"), (2, "clear_neg"), (3, "hard_neg")):
        mask = tags == tag
        mu, sd = regions[key]
        merit[mask] += rng.normal(mu, sd, size=int(mask.sum()))
    views = np.empty((n, len(weights)))
    for j, (w, s) in enumerate(zip(weights, noises)):
        views[:, j] = w * merit + s * rng.normal(size=n)
    return views


def _shuffle_and_write(
    path: Path, header: list[str], columns: list[np.ndarray], rng: np.random.Generator
) -> None:
    n = columns[0].shape[0]
    order = rng.permutation(n)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in order:
            writer.writerow([col[i] for col in columns])


def lsac_schema() -> FeatureSchema:
    return FeatureSchema(
        [
            FeatureSpec("gender", CATEGORICAL, ("Female", "Male"), protected=True),
            FeatureSpec(
                "race", CATEGORICAL, ("Other", "Black", "Hispanic", "Asian", "White"),
                protected=True,
            ),
            FeatureSpec("lsat", CONTINUOUS, baseline=0.0),
            FeatureSpec("ugpa", CONTINUOUS, baseline=0.0),
            FeatureSpec("zgpa", CONTINUOUS, baseline=0.0),
            FeatureSpec("zfygpa", CONTINUOUS, baseline=0.0),
            FeatureSpec("age", CONTINUOUS, baseline=0.0),
            FeatureSpec("fam_inc", CONTINUOUS, baseline=0.0),
        ]
    )


_LSAC_VIEW_WEIGHTS = [0.30, 0.18, 0.28, 0.26, 0.11, 0.09]
_LSAC_VIEW_NOISES = [1.00, 1.00, 1.00, 1.00, 1.00, 1.00]


def generate_lsac(out_dir: str | Path, seed: int = 7) -> dict[str, Path]:
    """Bar-passage style table: 20427 rows, ~84% positive labels."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    genders, races, labels, view_parts = [], [], [], []
    for (gender, race), (n_neg, n_pos) in sorted(LSAC_CELLS.items()):
        amb, n0, hard = LSAC_TEXTURE[(gender, race)]
        for positive, count in ((False, n_neg), (True, n_pos)):
            tags = _regions(rng, count, positive, amb, n0, hard)
            views = _merit_views(rng, tags, _LSAC_REGIONS,
                                 _LSAC_VIEW_WEIGHTS, _LSAC_VIEW_NOISES,
                                 shift=LSAC_SHIFT[(gender, race)])
            view_parts.append(views)
            genders.extend([gender] * count)
            races.extend([race] * count)
            labels.extend([int(positive)] * count)

    views = np.concatenate(view_parts)
    n = views.shape[0]
    gender_arr = np.array(genders)
    race_arr = np.array(races)
    label_arr = np.array(labels)

    # raw-unit affine transforms; z-scoring in the pipeline undoes them
    lsat = _round_col(151.0 + 8.8 * views[:, 0], 1)
    ugpa = _round_col(3.15 + 0.38 * views[:, 1], 2)
    zgpa = _round_col(views[:, 2], 3)
    zfygpa = _round_col(views[:, 3], 3)
    age = _round_col(24.5 + 4.8 * views[:, 4], 1)
    inc_shift = np.array([_LSAC_INC_SHIFT[r] for r in races])
    fam_inc = _round_col(3.0 + 0.12 * inc_shift + 0.75 * views[:, 5], 1)

    csv_path = out_dir / "lsac.csv"
    _shuffle_and_write(
        csv_path,
        ["gender", "race", "lsat", "ugpa", "zgpa", "zfygpa", "age", "fam_inc", "pass_bar"],
        [gender_arr, race_arr, lsat, ugpa, zgpa, zfygpa, age, fam_inc, label_arr],
        rng,
    )
    schema_path = lsac_schema().save(out_dir / "lsac.schema.json")
    log.info("wrote %s (%d rows)", csv_path, n)
    return {"csv": csv_path, "schema": schema_path, "label_column": "pass_bar"}


def adult_schema() -> FeatureSchema:
    return FeatureSchema(
        [
            FeatureSpec("gender", CATEGORICAL, ("Male", "Female"), protected=True),
            FeatureSpec(
                "race", CATEGORICAL,
                ("Asian-Pac-Isl", "White", "Other", "Black", "Amer-Ind-Esk"),
                protected=True,
            ),
            FeatureSpec("age", CONTINUOUS, baseline=0.0),
            FeatureSpec("education_num", CONTINUOUS, baseline=0.0),
            FeatureSpec("married_years", CONTINUOUS, baseline=0.0),
            FeatureSpec("hours_per_week", CONTINUOUS, baseline=0.0),
            FeatureSpec("capital_gain", CONTINUOUS, baseline=0.0),
        ]
    )


_ADULT_REGIONS = {
    "clear_pos": (1.70, 0.70),
    "weak": (-0.35, 0.45),
    "clear_neg": (-1.60, 0.80),
    "hard_neg": (1.10, 0.50),
}

ADULT_SHIFT = {cell: 0.0 for cell in ADULT_CELLS}
_ADULT_VIEW_WEIGHTS = [0.20, 0.45, 0.32, 0.32, 0.40]
_ADULT_VIEW_NOISES = [1.00, 1.00, 1.00, 1.00, 1.00]


def generate_adult(out_dir: str | Path, seed: int = 11) -> dict[str, Path]:
    """Census income style table: 45222 rows, ~24.5% positive labels."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    genders, races, labels, view_parts = [], [], [], []
    for (gender, race), (n_neg, n_pos) in sorted(ADULT_CELLS.items()):
        amb, n0, hard = ADULT_TEXTURE[(gender, race)]
        for positive, count in ((False, n_neg), (True, n_pos)):
            tags = _regions(rng, count, positive, amb, n0, hard)
            view_parts.append(
                _merit_views(rng, tags, _ADULT_REGIONS,
                             _ADULT_VIEW_WEIGHTS, _ADULT_VIEW_NOISES,
                             shift=ADULT_SHIFT[(gender, race)])
            )
            genders.extend([gender] * count)
            races.extend([race] * count)
            labels.extend([int(positive)] * count)

    views = np.concatenate(view_parts)
    n = views.shape[0]
    label_arr = np.array(labels)

    age = np.clip(np.round(38.5 + 11.0 * views[:, 0]), 17, 90)
    education = np.clip(np.round(10.2 + 2.6 * views[:, 1]), 1, 16)
    married = _round_col(np.clip(8.0 + 6.5 * views[:, 2], 0.0, 45.0), 1)
    hours = np.clip(np.round(41.0 + 10.0 * views[:, 3]), 5, 99)
    gain = _round_col(np.clip(900.0 + 2600.0 * views[:, 4], 0.0, 99999.0), 0)

    csv_path = out_dir / "adult.csv"
    _shuffle_and_write(
        csv_path,
        ["gender", "race", "age", "education_num", "married_years",
         "hours_per_week", "capital_gain", "income"],
        [np.array(genders), np.array(races), age.astype(int), education.astype(int),
         married, hours.astype(int), gain.astype(int),
         np.where(label_arr == 1, ">50K", "<=50K")],
        rng,
    )
    schema_path = adult_schema().save(out_dir / "adult.schema.json")
    log.info("wrote %s (%d rows)", csv_path, n)
    return {"csv": csv_path, "schema": schema_path, "label_column": "income"}


def _merit(
    rng: np.random.Generator,
    n: int,
    positive: bool,
    shift: float,
    amb_frac: float,
    hard_neg_frac: float,
    pos_mu: float,
    pos_sd: float,
    amb_mu: float,
    amb_sd: float,
    neg_mu: float,
    neg_sd: float,
    hard_mu: float,
    hard_sd: float,
) -> np.ndarray:
    if positive:
        weak = rng.random(n) < amb_frac
        merit = rng.normal(pos_mu + shift, pos_sd, size=n)
        merit[weak] = rng.normal(amb_mu + 0.4 * shift, amb_sd, size=int(weak.sum()))
    else:
        hard = rng.random(n) < hard_neg_frac
        merit = rng.normal(neg_mu + 0.5 * shift, neg_sd, size=n)
        merit[hard] = rng.normal(hard_mu + 0.3 * shift, hard_sd, size=int(hard.sum()))
    return merit


def compas_schema() -> FeatureSchema:
    return FeatureSchema(
        [
            FeatureSpec("gender", CATEGORICAL, ("Male", "Female"), protected=True),
            FeatureSpec("race", CATEGORICAL, ("Caucasian", "Not-Caucasian"), protected=True),
            FeatureSpec("age", CONTINUOUS, baseline=0.0),
            FeatureSpec("priors_count", CONTINUOUS, baseline=0.0),
            FeatureSpec("charge_degree", CATEGORICAL, ("M", "F")),
            FeatureSpec("length_of_stay", CONTINUOUS, baseline=0.0),
        ]
    )


def generate_compas(out_dir: str | Path, seed: int = 5) -> dict[str, Path]:
    """Recidivism style table: 6154 rows, roughly balanced labels."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    genders, races, labels, merits = [], [], [], []
    for (gender, race), (n_neg, n_pos) in sorted(COMPAS_CELLS.items()):
        shift = (0.15 if race == "Not-Caucasian" else -0.15) + (0.1 if gender == "Male" else -0.1)
        for positive, count in ((False, n_neg), (True, n_pos)):
            merits.append(
                _merit(
                    rng, count, positive, shift, 0.25, 0.25,
                    pos_mu=1.0, pos_sd=0.9, amb_mu=-0.2, amb_sd=0.5,
                    neg_mu=-1.0, neg_sd=0.9, hard_mu=0.1, hard_sd=0.5,
                )
            )
            genders.extend([gender] * count)
            races.extend([race] * count)
            labels.extend([int(positive)] * count)

    merit = np.concatenate(merits)
    n = merit.shape[0]
    label_arr = np.array(labels)

    age = np.clip(np.round(32.0 - 6.0 * (0.5 * merit) + 9.0 * rng.normal(size=n)), 18, 80)
    priors = np.clip(np.round(np.exp(0.55 * merit + 0.8 + 0.55 * rng.normal(size=n)) - 1.0), 0, 38)
    degree = np.where(rng.random(n) < 0.35 + 0.2 * label_arr, "F", "M")
    stay = np.clip(np.round(np.exp(1.4 + 0.45 * merit + 0.9 * rng.normal(size=n))), 0, 700)

    csv_path = out_dir / "compas.csv"
    _shuffle_and_write(
        csv_path,
        ["gender", "race", "age", "priors_count", "charge_degree", "length_of_stay",
         "two_year_recid"],
        [np.array(genders), np.array(races), age.astype(int), priors.astype(int),
         degree, stay.astype(int), label_arr],
        rng,
    )
    schema_path = compas_schema().save(out_dir / "compas.schema.json")
    log.info("wrote %s (%d rows)", csv_path, n)
    return {"csv": csv_path, "schema": schema_path, "label_column": "two_year_recid"}


def toy_schema() -> FeatureSchema:
    return FeatureSchema(
        [
            FeatureSpec("grp", CATEGORICAL, ("P", "Q"), protected=True),
            FeatureSpec("sex", CATEGORICAL, ("A", "B"), protected=True),
            FeatureSpec("f1", CONTINUOUS, baseline=0.0),
            FeatureSpec("f2", CONTINUOUS, baseline=0.0),
        ]
    )


def generate_toy(out_dir: str | Path, seed: int = 3, n: int = 600) -> dict[str, Path]:
    """Small two-protected-feature table for quick runs and CLI tests."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    grp = np.where(rng.random(n) < 0.6, "P", "Q")
    sex = np.where(rng.random(n) < 0.5, "A", "B")
    f1 = rng.normal(size=n)
    f2 = rng.normal(size=n)
    logit = 1.2 * f1 + 0.9 * f2 + 0.9 * (sex == "B") + 0.5 * (grp == "Q") - 0.4
    label = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)

    csv_path = out_dir / "toy.csv"
    _shuffle_and_write(
        csv_path,
        ["grp", "sex", "f1", "f2", "outcome"],
        [grp, sex, _round_col(f1, 4), _round_col(f2, 4), label],
        rng,
    )
    schema_path = toy_schema().save(out_dir / "toy.schema.json")
    return {"csv": csv_path, "schema": schema_path, "label_column": "outcome"}


GENERATORS = {
    "lsac": generate_lsac,
    "adult": generate_adult,
    "compas": generate_compas,
    "toy": generate_toy,
}


def generate(name: str, out_dir: str | Path, seed: int | None = None) -> dict[str, Path]:
    if name not in GENERATORS:
        raise ConfigError(f"unknown synthetic dataset {name!r}; options: {sorted(GENERATORS)}")
    if seed is None:
        return GENERATORS[name](out_dir)
    return GENERATORS[name](out_dir, seed=seed)
