"""Stratified k-fold cross-validation and the four-metric report.

Folds are assigned per class by round-robin over a seeded shuffle, so
class proportions differ by at most one row between folds and the
assignment is reproducible from (labels, k, seed) alone.  Metrics are
computed from the confusion matrix summed over all folds: recall and
precision of the positive class and of the negative class.  A ratio whose
denominator is zero is reported as None and rendered as "undefined".
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import TooFewRows
from ..features import LABEL_NEGATIVE, LABEL_POSITIVE
from .classifiers import DEFAULT_SEED, resolve_hyperparameters, train
from .schema import Dataset


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            self.tp + other.tp,
            self.fp + other.fp,
            self.tn + other.tn,
            self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float | None:
        return _ratio(self.tp + self.tn, self.total)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def stratified_fold_indices(
    labels: Sequence[str], k: int, seed: int = DEFAULT_SEED
) -> list[list[int]]:
    """Assign row positions to k folds, stratified by label.

    Within each label (labels visited in sorted order) the positions are
    shuffled with a generator seeded from `seed`, then dealt round-robin
    to folds 0..k-1.  Raises TooFewRows if k < 2 or any class has fewer
    than k rows.
    """
    if k < 2:
        raise TooFewRows(f"need at least 2 folds, got {k}")
    by_label: dict[str, list[int]] = {}
    for i, label in enumerate(labels):
        by_label.setdefault(label, []).append(i)
    for label, positions in sorted(by_label.items()):
        if len(positions) < k:
            raise TooFewRows(
                f"class {label!r} has {len(positions)} rows, fewer than {k} folds"
            )
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for label in sorted(by_label):
        positions = np.array(by_label[label], dtype=np.int64)
        shuffled = positions[rng.permutation(positions.size)]
        for slot, position in enumerate(shuffled):
            folds[slot % k].append(int(position))
    return [sorted(fold) for fold in folds]


@dataclass(frozen=True)
class EvalReport:
    """Cross-validation outcome: summed confusion plus the four metrics."""

    kind: str
    k: int
    seed: int
    hyperparameters: dict
    confusion: Confusion
    per_fold: tuple[Confusion, ...]

    @property
    def positive_recall(self) -> float | None:
        return _ratio(self.confusion.tp, self.confusion.tp + self.confusion.fn)

    @property
    def positive_precision(self) -> float | None:
        return _ratio(self.confusion.tp, self.confusion.tp + self.confusion.fp)

    @property
    def negative_recall(self) -> float | None:
        return _ratio(self.confusion.tn, self.confusion.tn + self.confusion.fp)

    @property
    def negative_precision(self) -> float | None:
        return _ratio(self.confusion.tn, self.confusion.tn + self.confusion.fn)

    @property
    def accuracy(self) -> float | None:
        return self.confusion.accuracy

    def metrics(self) -> dict[str, float | None]:
        return {
            "positive_recall": self.positive_recall,
            "positive_precision": self.positive_precision,
            "negative_recall": self.negative_recall,
            "negative_precision": self.negative_precision,
            "accuracy": self.accuracy,
        }

    def to_json(self) -> str:
        doc = {
            "classifier": self.kind,
            "folds": self.k,
            "seed": self.seed,
            "hyperparameters": self.hyperparameters,
            "rows": self.confusion.total,
            "confusion": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "tn": self.confusion.tn,
                "fn": self.confusion.fn,
            },
            "metrics": self.metrics(),
            "per_fold": [
                {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn} for c in self.per_fold
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    def to_table(self) -> str:
        def cell(value: float | None) -> str:
            return "undefined" if value is None else f"{value:.3f}"

        header = (
            f"{'classifier':<12}{'pos_recall':>12}{'pos_precision':>15}"
            f"{'neg_recall':>12}{'neg_precision':>15}"
        )
        row = (
            f"{self.kind:<12}{cell(self.positive_recall):>12}"
            f"{cell(self.positive_precision):>15}{cell(self.negative_recall):>12}"
            f"{cell(self.negative_precision):>15}"
        )
        return header + "\n" + row + "\n"


def _confusion_from_predictions(
    truth: Sequence[str], predicted: Sequence[str]
) -> Confusion:
    tp = fp = tn = fn = 0
    for want, got in zip(truth, predicted):
        if want == LABEL_POSITIVE:
            if got == LABEL_POSITIVE:
                tp += 1
            else:
                fn += 1
        else:
            if got == LABEL_NEGATIVE:
                tn += 1
            else:
                fp += 1
    return Confusion(tp, fp, tn, fn)


def cross_validate(
    dataset: Dataset,
    kind: str,
    k: int = 10,
    hyperparameters: dict | None = None,
    seed: int = DEFAULT_SEED,
) -> EvalReport:
    """k-fold cross-validation of one classifier kind over a labeled dataset.

    Rows are put in canonical order before fold assignment, so the same
    data in a different file order produces the same folds.  Each fold's
    model trains on the other k-1 folds with the same seed; the report
    aggregates the per-fold confusion matrices.
    """
    resolved = resolve_hyperparameters(kind, hyperparameters)
    dataset.require_labeled()
    order = dataset.canonical_order()
    rows = [dataset.rows[i] for i in order]
    labels = [fv.label for fv in rows]
    folds = stratified_fold_indices(labels, k, seed)

    per_fold: list[Confusion] = []
    for test_positions in folds:
        test_set = set(test_positions)
        train_rows = [fv for i, fv in enumerate(rows) if i not in test_set]
        test_rows = [rows[i] for i in test_positions]
        model = train(Dataset(train_rows, dataset.schema), kind, hyperparameters, seed)
        predicted, _ = model.predict_batch(test_rows)
        per_fold.append(
            _confusion_from_predictions([fv.label for fv in test_rows], predicted)
        )

    total = Confusion()
    for fold in per_fold:
        total = total + fold
    return EvalReport(
        kind=kind,
        k=k,
        seed=seed,
        hyperparameters=resolved,
        confusion=total,
        per_fold=tuple(per_fold),
    )
