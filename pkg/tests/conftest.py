import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fairmi.schema import CATEGORICAL, CONTINUOUS, FeatureSchema, FeatureSpec

settings.register_profile(
    "ci",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def toy_schema():
    return FeatureSchema(
        [
            FeatureSpec("g", CATEGORICAL, ("a", "b"), protected=True),
            FeatureSpec("r", CATEGORICAL, ("x", "y", "z"), protected=True),
            FeatureSpec("f1", CONTINUOUS),
            FeatureSpec("f2", CONTINUOUS),
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def toy_csv(tmp_path, toy_schema):
    rows = [
        ["a", "x", 0.5, -1.2, 1],
        ["a", "y", 1.5, 0.3, 0],
        ["b", "x", -0.5, 2.2, 1],
        ["b", "z", 0.0, 0.0, 1],
        ["a", "z", 2.5, -0.7, 0],
        ["b", "y", -1.5, 1.1, 1],
    ]
    return write_csv(tmp_path / "toy.csv", ["g", "r", "f1", "f2", "label"], rows)
