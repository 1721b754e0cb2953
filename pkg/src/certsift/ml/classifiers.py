"""The four classifiers: single tree, bagged trees, random forest, k-NN.

All models predict a (label, score) pair where score is the fraction of
positive votes (ensembles), the leaf positive fraction (single tree), or
the positive fraction among the k nearest training rows (k-NN).  Training
is deterministic for a given dataset content and seed: rows are put in a
content-defined canonical order before any randomness is drawn, so input
file order never matters.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ..errors import SchemaError
from ..features import LABEL_NEGATIVE, LABEL_POSITIVE, FeatureVector
from .schema import (
    KIND_BOOLEAN,
    KIND_CATEGORICAL,
    Dataset,
    Encoder,
    FeatureSchema,
    column_arrays,
    encode_labels,
)
from .tree import column_tests, decode_tree, grow_tree, leaf_fraction, leaf_fractions

DEFAULT_SEED = 17

KIND_TREE = "tree"
KIND_BAGGING = "bagging"
KIND_FOREST = "forest"
KIND_KNN = "knn"

MODEL_KINDS = (KIND_TREE, KIND_BAGGING, KIND_FOREST, KIND_KNN)

DEFAULT_HYPERPARAMETERS: dict[str, dict[str, int]] = {
    KIND_TREE: {"max_depth": 12, "min_leaf": 2},
    KIND_BAGGING: {"n_trees": 50, "max_depth": 12, "min_leaf": 2},
    KIND_FOREST: {"n_trees": 100, "max_depth": 12, "min_leaf": 2},
    KIND_KNN: {"k": 5},
}


def _label(score: float) -> str:
    return LABEL_POSITIVE if score >= 0.5 else LABEL_NEGATIVE


def resolve_hyperparameters(kind: str, overrides: dict | None) -> dict[str, int]:
    if kind not in DEFAULT_HYPERPARAMETERS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    merged = dict(DEFAULT_HYPERPARAMETERS[kind])
    for key, value in (overrides or {}).items():
        if key not in merged:
            raise ValueError(f"unknown hyperparameter {key!r} for {kind}")
        value = int(value)
        if value < 1:
            raise ValueError(f"hyperparameter {key} must be positive, got {value}")
        merged[key] = value
    return merged


class DecisionTreeModel:
    kind = KIND_TREE

    def __init__(self, root: dict, schema: FeatureSchema, hyperparameters: dict, seed: int):
        self.root = root
        self.schema = schema
        self.hyperparameters = dict(hyperparameters)
        self.seed = seed

    def predict(self, fv: FeatureVector) -> tuple[str, float]:
        score = leaf_fraction(self.root, fv)
        return _label(score), score

    def predict_batch(self, rows: Sequence[FeatureVector]) -> tuple[list[str], np.ndarray]:
        columns = column_arrays(self.schema.included(), rows)
        scores = leaf_fractions(self.root, columns, len(rows))
        return [_label(s) for s in scores], scores


class TreeEnsembleModel:
    """Shared behavior of bagged trees and random forests.

    Every member tree casts one vote (its leaf majority); the ensemble
    score is the fraction of positive votes and the label follows the
    majority.
    """

    kind = "ensemble"

    def __init__(
        self,
        members: list[dict],
        schema: FeatureSchema,
        hyperparameters: dict,
        seed: int,
    ):
        self.members = members
        self.schema = schema
        self.hyperparameters = dict(hyperparameters)
        self.seed = seed

    def predict(self, fv: FeatureVector) -> tuple[str, float]:
        votes = sum(leaf_fraction(root, fv) >= 0.5 for root in self.members)
        score = votes / len(self.members)
        return _label(score), score

    def predict_batch(self, rows: Sequence[FeatureVector]) -> tuple[list[str], np.ndarray]:
        columns = column_arrays(self.schema.included(), rows)
        votes = np.zeros(len(rows), dtype=np.float64)
        for root in self.members:
            votes += leaf_fractions(root, columns, len(rows)) >= 0.5
        scores = votes / len(self.members)
        return [_label(s) for s in scores], scores


class BaggedTreesModel(TreeEnsembleModel):
    kind = KIND_BAGGING


class RandomForestModel(TreeEnsembleModel):
    kind = KIND_FOREST


class NearestNeighborModel:
    """k nearest training rows under a mean per-feature mismatch distance.

    Boolean and categorical features contribute 0 on match and 1 on
    mismatch; numeric features contribute the absolute difference after
    min-max scaling to [0, 1] over the training rows (values outside the
    training range clamp to the edges, and a constant training column
    contributes 0).  Equidistant neighbors at the cut resolve by training
    row order, which is canonical.
    """

    kind = KIND_KNN

    def __init__(
        self,
        schema: FeatureSchema,
        hyperparameters: dict,
        seed: int,
        vocabs: dict[str, dict[str, int]],
        ranges: dict[str, tuple[float, float]],
        matrix: np.ndarray,
        labels: np.ndarray,
    ):
        self.schema = schema
        self.hyperparameters = dict(hyperparameters)
        self.seed = seed
        self.vocabs = vocabs
        self.ranges = ranges
        self.matrix = matrix
        self.labels = labels
        self._columns = schema.included()
        self._is_eq = np.array(
            [col.kind in (KIND_BOOLEAN, KIND_CATEGORICAL) for col in self._columns]
        )

    def _encode_row(self, fv: FeatureVector) -> np.ndarray:
        out = np.empty(len(self._columns), dtype=np.float64)
        for j, col in enumerate(self._columns):
            value = fv.value(col.name)
            if col.kind == KIND_BOOLEAN:
                out[j] = 1.0 if value else 0.0
            elif col.kind == KIND_CATEGORICAL:
                out[j] = float(self.vocabs[col.name].get(value, -1))
            else:
                lo, hi = self.ranges[col.name]
                if hi == lo:
                    out[j] = 0.0
                else:
                    out[j] = min(max((float(value) - lo) / (hi - lo), 0.0), 1.0)
        return out

    def _distances(self, encoded: np.ndarray) -> np.ndarray:
        per_feature = np.empty_like(self.matrix)
        eq = self._is_eq
        per_feature[:, eq] = (self.matrix[:, eq] != encoded[eq]).astype(np.float64)
        per_feature[:, ~eq] = np.abs(self.matrix[:, ~eq] - encoded[~eq])
        return per_feature.mean(axis=1)

    def distance(self, a: FeatureVector, b: FeatureVector) -> float:
        """Distance between two vectors under this model's fitted scaling."""
        ea, eb = self._encode_row(a), self._encode_row(b)
        eq = self._is_eq
        parts = np.where(eq, (ea != eb).astype(np.float64), np.abs(ea - eb))
        return float(parts.mean())

    def _score(self, encoded: np.ndarray) -> float:
        dists = self._distances(encoded)
        k = min(self.hyperparameters["k"], dists.size)
        nearest = np.argsort(dists, kind="stable")[:k]
        return float(self.labels[nearest].mean())

    def predict(self, fv: FeatureVector) -> tuple[str, float]:
        score = self._score(self._encode_row(fv))
        return _label(score), score

    def predict_batch(self, rows: Sequence[FeatureVector]) -> tuple[list[str], np.ndarray]:
        scores = np.array([self._score(self._encode_row(fv)) for fv in rows])
        return [_label(s) for s in scores], scores


TrainedModel = DecisionTreeModel | BaggedTreesModel | RandomForestModel | NearestNeighborModel


def _canonical_rows(dataset: Dataset) -> list[FeatureVector]:
    return [dataset.rows[i] for i in dataset.canonical_order()]


def _grow_ensemble(
    X: np.ndarray,
    y: np.ndarray,
    tests: list[str],
    hp: dict,
    seed: int,
    subsample_features: bool,
) -> list[dict]:
    n, d = X.shape
    n_sample = math.ceil(math.sqrt(d)) if subsample_features else None
    members = []
    for child_seed in np.random.SeedSequence(seed).spawn(hp["n_trees"]):
        rng = np.random.default_rng(child_seed)
        boot = rng.integers(0, n, size=n)
        members.append(
            grow_tree(
                X[boot],
                y[boot],
                tests,
                hp["max_depth"],
                hp["min_leaf"],
                rng=rng if subsample_features else None,
                n_sample_features=n_sample,
            )
        )
    return members


def train(
    dataset: Dataset,
    kind: str,
    hyperparameters: dict | None = None,
    seed: int = DEFAULT_SEED,
) -> TrainedModel:
    """Fit one classifier on a fully labeled dataset.

    Raises DegenerateDataset when rows are unlabeled or a class is absent,
    and ValueError for an unknown kind or hyperparameter.
    """
    hp = resolve_hyperparameters(kind, hyperparameters)
    dataset.require_labeled()
    rows = _canonical_rows(dataset)
    schema = dataset.schema
    encoder = Encoder(schema, rows)
    X = encoder.encode_rows(rows)
    y = encode_labels(rows)
    tests = column_tests(encoder)

    if kind == KIND_TREE:
        root = grow_tree(X, y, tests, hp["max_depth"], hp["min_leaf"])
        return DecisionTreeModel(decode_tree(root, encoder), schema, hp, seed)
    if kind in (KIND_BAGGING, KIND_FOREST):
        subsample = kind == KIND_FOREST
        members = _grow_ensemble(X, y, tests, hp, seed, subsample)
        decoded = [decode_tree(m, encoder) for m in members]
        cls = RandomForestModel if subsample else BaggedTreesModel
        return cls(decoded, schema, hp, seed)
    # k-NN: scale numeric columns to [0, 1] over the training rows
    ranges: dict[str, tuple[float, float]] = {}
    matrix = X.copy()
    for j, col in enumerate(encoder.columns):
        if col.kind in (KIND_BOOLEAN, KIND_CATEGORICAL):
            continue
        lo, hi = float(X[:, j].min()), float(X[:, j].max())
        ranges[col.name] = (lo, hi)
        matrix[:, j] = 0.0 if hi == lo else (X[:, j] - lo) / (hi - lo)
    return NearestNeighborModel(
        schema, hp, seed, encoder.vocabs, ranges, matrix, y
    )


def predict(
    model: TrainedModel, fv: FeatureVector, schema: FeatureSchema | None = None
) -> tuple[str, float]:
    """Predict one vector; rejects a schema that differs from training."""
    if schema is not None and schema.fingerprint() != model.schema.fingerprint():
        raise SchemaError(
            "feature schema does not match the one the model was trained on"
        )
    return model.predict(fv)
