"""Feature schemas: per-feature metadata plus the protected-attribute family.

A schema fixes the feature order, how categoricals are encoded (integer codes
in declared category order) and the per-feature baseline value used by
substitution and masking. Default baselines are -1 for categoricals and -2
for continuous features; both live outside the valid value range so a
substituted cell is recognizable as "absent".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EncodingError, SchemaError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"

DEFAULT_BASELINE = {CATEGORICAL: -1.0, CONTINUOUS: -2.0}


@dataclass(frozen=True)
class FeatureSpec:
    """One column: name, kind, categories (categorical only), baseline, protected flag."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    baseline: float | None = None
    protected: bool = False

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ConfigError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise ConfigError(f"categorical feature {self.name!r} needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise ConfigError(f"feature {self.name!r}: duplicate categories")
        elif self.categories:
            raise ConfigError(f"continuous feature {self.name!r} must not list categories")
        if self.baseline is None:
            object.__setattr__(self, "baseline", DEFAULT_BASELINE[self.kind])

    def code_of(self, value: str) -> int:
        try:
            return self.categories.index(value)
        except ValueError:
            raise EncodingError(
                f"feature {self.name!r}: {value!r} is not a known category"
            ) from None


class FeatureSchema:
    """Ordered feature list shared by every dataset built from it."""

    def __init__(self, features: list[FeatureSpec]):
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate feature names in schema")
        self.features: tuple[FeatureSpec, ...] = tuple(features)
        self._index = {f.name: i for i, f in enumerate(self.features)}

    def __len__(self) -> int:
        return len(self.features)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSchema) and self.features == other.features

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        if name not in self._index:
            raise SchemaError(f"unknown feature {name!r}")
        return self._index[name]

    def feature(self, name: str) -> FeatureSpec:
        return self.features[self.index(name)]

    def baseline_vector(self) -> np.ndarray:
        return np.array([f.baseline for f in self.features], dtype=np.float64)

    def protected_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.protected]

    def decode(self, index: int, value: float) -> str:
        """Human-readable form of an encoded cell (baselines shown as-is)."""
        spec = self.features[index]
        if spec.kind == CATEGORICAL:
            code = int(value)
            if 0 <= code < len(spec.categories) and code == value:
                return spec.categories[code]
        return repr(float(value))

    # -- persistence ------------------------------------------------------

    def to_dict(self) -> dict:
        out = []
        for f in self.features:
            entry: dict = {"name": f.name, "kind": f.kind}
            if f.kind == CATEGORICAL:
                entry["categories"] = list(f.categories)
            entry["baseline"] = f.baseline
            entry["protected"] = f.protected
            out.append(entry)
        return {"features": out}

    @classmethod
    def from_dict(cls, data: dict) -> FeatureSchema:
        if not isinstance(data, dict) or "features" not in data:
            raise ConfigError("schema file must contain a 'features' list")
        feats = []
        for entry in data["features"]:
            try:
                feats.append(
                    FeatureSpec(
                        name=entry["name"],
                        kind=entry["kind"],
                        categories=tuple(entry.get("categories", ())),
                        baseline=entry.get("baseline"),
                        protected=bool(entry.get("protected", False)),
                    )
                )
            except KeyError as exc:
                raise ConfigError(f"schema entry missing field: {exc}") from None
        return cls(feats)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> FeatureSchema:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"schema file {path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)


@dataclass(frozen=True)
class ProtectedFamily:
    """Collection of protected feature-index subsets the regularizer targets."""

    subsets: tuple[tuple[int, ...], ...]
    names: tuple[tuple[str, ...], ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.subsets:
            raise ConfigError("protected family must contain at least one subset")
        seen = set()
        for subset in self.subsets:
            if not subset:
                raise ConfigError("protected family subsets must be non-empty")
            if subset in seen:
                raise ConfigError(f"duplicate subset {subset} in protected family")
            seen.add(subset)

    def __len__(self) -> int:
        return len(self.subsets)

    def union(self) -> tuple[int, ...]:
        out: set[int] = set()
        for subset in self.subsets:
            out.update(subset)
        return tuple(sorted(out))

    @classmethod
    def from_names(cls, schema: FeatureSchema, groups: list[list[str]]) -> ProtectedFamily:
        subsets = []
        names = []
        for group in groups:
            idx = []
            for name in group:
                i = schema.index(name)
                if not schema.features[i].protected:
                    raise ConfigError(
                        f"feature {name!r} is not flagged protected in the schema"
                    )
                idx.append(i)
            subsets.append(tuple(sorted(idx)))
            names.append(tuple(group))
        return cls(subsets=tuple(subsets), names=tuple(names))

    def subset_label(self, k: int) -> str:
        if self.names and k < len(self.names):
            return "+".join(self.names[k])
        return "+".join(str(i) for i in self.subsets[k])
