"""Feature schema, dataset container, and numeric encoding for classifiers.

The default schema feeds thirteen of the fifteen features to the
classifiers: the verification verdict stays out because it aggregates
several of the other signals, and raw validity days stay out in favor of
the three-year boolean.  Each schema has a stable fingerprint so persisted
models can refuse vectors from a different feature layout.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateDataset, SchemaError
from ..features import (
    BOOLEAN_FEATURES,
    CATEGORICAL_FEATURES,
    FEATURE_NAMES,
    LABEL_NEGATIVE,
    LABEL_POSITIVE,
    FeatureVector,
)

KIND_BOOLEAN = "boolean"
KIND_CATEGORICAL = "categorical"
KIND_INTEGER = "integer"
KIND_REAL = "real"

_KIND_BY_NAME = {name: KIND_BOOLEAN for name in BOOLEAN_FEATURES}
_KIND_BY_NAME.update({name: KIND_CATEGORICAL for name in CATEGORICAL_FEATURES})
_KIND_BY_NAME.update({"f13": KIND_INTEGER, "f14": KIND_INTEGER, "f15": KIND_REAL})

_DEFAULT_EXCLUDED = frozenset({"f5", "f13"})


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    kind: str
    included: bool


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[FeatureColumn, ...]

    def included(self) -> tuple[FeatureColumn, ...]:
        return tuple(c for c in self.columns if c.included)

    def fingerprint(self) -> str:
        text = ";".join(
            f"{c.name}:{c.kind}:{int(c.included)}" for c in self.columns
        )
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


def default_schema() -> FeatureSchema:
    return FeatureSchema(
        tuple(
            FeatureColumn(name, _KIND_BY_NAME[name], name not in _DEFAULT_EXCLUDED)
            for name in FEATURE_NAMES
        )
    )


def canonical_key(fv: FeatureVector) -> tuple[str, ...]:
    """Content-based sort key making row order independent of input order."""
    parts = [fv.domain]
    for name in FEATURE_NAMES:
        value = fv.value(name)
        if isinstance(value, bool):
            parts.append("1" if value else "0")
        elif isinstance(value, float):
            parts.append(f"{value:.17g}")
        else:
            parts.append(str(value))
    parts.append(fv.label or "")
    return tuple(parts)


@dataclass
class Dataset:
    """Feature vectors plus the schema describing which columns train."""

    rows: list[FeatureVector]
    schema: FeatureSchema = field(default_factory=default_schema)

    def __len__(self) -> int:
        return len(self.rows)

    def labels(self) -> list[str | None]:
        return [fv.label for fv in self.rows]

    def class_counts(self) -> dict[str, int]:
        counts = {LABEL_POSITIVE: 0, LABEL_NEGATIVE: 0}
        for fv in self.rows:
            if fv.label in counts:
                counts[fv.label] += 1
        return counts

    def require_labeled(self) -> None:
        unlabeled = sum(1 for fv in self.rows if fv.label is None)
        if unlabeled:
            raise DegenerateDataset(f"{unlabeled} rows have no label")
        counts = self.class_counts()
        missing = [label for label, n in counts.items() if n == 0]
        if missing:
            raise DegenerateDataset(f"no rows labeled {', '.join(missing)}")

    def canonical_order(self) -> list[int]:
        """Row indices sorted by content, ties by original position."""
        return sorted(range(len(self.rows)), key=lambda i: (canonical_key(self.rows[i]), i))


class Encoder:
    """Maps feature vectors onto a float matrix for the learners.

    Booleans become 0/1.  Categorical values get integer codes from a
    vocabulary built over the training rows (sorted lexically); values
    never seen in training encode as -1, which matches no trained code.
    Numerics pass through unchanged.
    """

    def __init__(self, schema: FeatureSchema, rows: Sequence[FeatureVector]):
        self.schema = schema
        self.columns = schema.included()
        self.vocabs: dict[str, dict[str, int]] = {}
        for col in self.columns:
            if col.kind == KIND_CATEGORICAL:
                values = sorted({fv.value(col.name) for fv in rows})
                self.vocabs[col.name] = {v: i for i, v in enumerate(values)}

    def encode_value(self, col: FeatureColumn, value) -> float:
        if col.kind == KIND_BOOLEAN:
            return 1.0 if value else 0.0
        if col.kind == KIND_CATEGORICAL:
            return float(self.vocabs[col.name].get(value, -1))
        return float(value)

    def encode_rows(self, rows: Sequence[FeatureVector]) -> np.ndarray:
        matrix = np.empty((len(rows), len(self.columns)), dtype=np.float64)
        for j, col in enumerate(self.columns):
            matrix[:, j] = [self.encode_value(col, fv.value(col.name)) for fv in rows]
        return matrix

    def decode_value(self, col: FeatureColumn, encoded: float):
        if col.kind == KIND_BOOLEAN:
            return bool(encoded)
        if col.kind == KIND_CATEGORICAL:
            for value, code in self.vocabs[col.name].items():
                if code == int(encoded):
                    return value
            raise SchemaError(f"code {encoded} has no value in {col.name}")
        if col.kind == KIND_INTEGER:
            return encoded
        return encoded


def encode_labels(rows: Sequence[FeatureVector]) -> np.ndarray:
    return np.array(
        [1.0 if fv.label == LABEL_POSITIVE else 0.0 for fv in rows], dtype=np.float64
    )


def column_arrays(
    columns: Sequence[FeatureColumn], rows: Sequence[FeatureVector]
) -> dict[str, np.ndarray]:
    """Per-feature arrays over raw values, for batch prediction."""
    out: dict[str, np.ndarray] = {}
    for col in columns:
        values = [fv.value(col.name) for fv in rows]
        if col.kind == KIND_CATEGORICAL:
            out[col.name] = np.array(values, dtype=object)
        else:
            out[col.name] = np.array(values, dtype=np.float64)
    return out
