import numpy as np
import pytest

from fairmi import datagen
from fairmi.dataset import load_csv
from fairmi.errors import ConfigError
from fairmi.schema import FeatureSchema


@pytest.fixture(scope="module")
def lsac(tmp_path_factory):
    out = tmp_path_factory.mktemp("lsac")
    paths = datagen.generate_lsac(out)
    schema = FeatureSchema.load(paths["schema"])
    return load_csv(paths["csv"], schema, paths["label_column"])


def test_lsac_row_count(lsac):
    assert lsac.n == 20427
    assert lsac.C == 2


def test_lsac_cell_counts_match_table(lsac):
    gi = lsac.schema.index("gender")
    ri = lsac.schema.index("race")
    genders = lsac.schema.feature("gender").categories
    races = lsac.schema.feature("race").categories
    for (gname, rname), (n_neg, n_pos) in datagen.LSAC_CELLS.items():
        mask = (lsac.rows[:, gi] == genders.index(gname)) & (
            lsac.rows[:, ri] == races.index(rname)
        )
        assert int(mask.sum()) == n_neg + n_pos
        assert int(np.sum(mask & (lsac.labels == 2))) == n_pos


def test_lsac_ten_subgroups_observed(lsac):
    gi = lsac.schema.index("gender")
    ri = lsac.schema.index("race")
    combos = {(g, r) for g, r in lsac.rows[:, [gi, ri]].tolist()}
    assert len(combos) == 10


def test_generator_deterministic(tmp_path):
    a = datagen.generate_lsac(tmp_path / "a")
    b = datagen.generate_lsac(tmp_path / "b")
    assert a["csv"].read_bytes() == b["csv"].read_bytes()
    assert a["schema"].read_bytes() == b["schema"].read_bytes()


def test_generator_seed_changes_rows(tmp_path):
    a = datagen.generate_toy(tmp_path / "a", seed=1)
    b = datagen.generate_toy(tmp_path / "b", seed=2)
    assert a["csv"].read_bytes() != b["csv"].read_bytes()


def test_adult_counts(tmp_path):
    paths = datagen.generate_adult(tmp_path)
    schema = FeatureSchema.load(paths["schema"])
    ds = load_csv(paths["csv"], schema, paths["label_column"])
    assert ds.n == sum(a + b for a, b in datagen.ADULT_CELLS.values())
    assert ds.label_values == ("<=50K", ">50K")
    positives = int(np.sum(ds.labels == 2))
    assert positives == sum(b for _, b in datagen.ADULT_CELLS.values())


def test_compas_loads(tmp_path):
    paths = datagen.generate_compas(tmp_path)
    schema = FeatureSchema.load(paths["schema"])
    ds = load_csv(paths["csv"], schema, paths["label_column"])
    assert ds.n == sum(a + b for a, b in datagen.COMPAS_CELLS.values())
    assert len(schema) == 6


def test_unknown_generator_name(tmp_path):
    with pytest.raises(ConfigError):
        datagen.generate("nope", tmp_path)
