"""Model-level performance metrics and calibration (reliability) data.

Accuracy alone hides the error type that matters here: calling an at-risk
person "low risk" (a false negative) costs more than the reverse, so recall,
false negative rate and false omission rate are first-class citizens.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

from .cart import DecisionTree, _predict_values
from .errors import (
    EmptyDataset,
    EmptyInput,
    ScoreOutOfRange,
    SchemaMismatch,
    UndefinedMetric,
)
from .tabular import Dataset


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with 'positive' = the schema's designated high-risk label."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def evaluate(tree: DecisionTree, test: Dataset) -> ConfusionMatrix:
    """One prediction per row, tallied against the true labels."""
    if test.n == 0:
        raise EmptyDataset("empty test set")
    if test.schema != tree.schema:
        raise SchemaMismatch("test schema differs from the model's schema")
    positive = tree.schema.target.positive
    tp = fp = tn = fn = 0
    for values, truth in zip(test.rows, test.labels):
        predicted = _predict_values(tree, values).label
        if predicted == positive:
            if truth == positive:
                tp += 1
            else:
                fp += 1
        else:
            if truth == positive:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise UndefinedMetric("accuracy undefined: no observations")
    return (m.tp + m.tn) / m.total


def recall(m: ConfusionMatrix) -> float:
    if m.tp + m.fn == 0:
        raise UndefinedMetric("recall undefined: no positive observations")
    return m.tp / (m.tp + m.fn)


def false_negative_rate(m: ConfusionMatrix) -> float:
    if m.tp + m.fn == 0:
        raise UndefinedMetric("false negative rate undefined: no positive observations")
    return m.fn / (m.tp + m.fn)


def false_omission_rate(m: ConfusionMatrix) -> float:
    if m.fn + m.tn == 0:
        raise UndefinedMetric("false omission rate undefined: no negative predictions")
    return m.fn / (m.fn + m.tn)


# --- reliability ---------------------------------------------------------------

@dataclass(frozen=True)
class ReliabilityBin:
    lo: float
    hi: float
    mean_confidence: float
    observed_accuracy: float
    count: int


@dataclass(frozen=True)
class ReliabilityDiagram:
    bins: tuple[ReliabilityBin, ...]

    def to_csv(self) -> str:
        lines = ["bin_lo,bin_hi,mean_confidence,observed_accuracy,count"]
        for b in self.bins:
            lines.append(
                f"{b.lo!r},{b.hi!r},{b.mean_confidence!r},{b.observed_accuracy!r},{b.count}"
            )
        return "\n".join(lines) + "\n"


def reliability(scored, n_bins: int) -> ReliabilityDiagram:
    """Bin (confidence score, correct) pairs into equal-width bins over [0.5, 1].

    The score is the leaf majority fraction max(counts)/samples, a
    probability-of-correctness-like quantity, so bins start at 0.5 for a
    binary model. Bins are right-open except the last.
    """
    scored = list(scored)
    if not scored:
        raise EmptyInput("no scored predictions")
    if n_bins < 2:
        raise EmptyInput(f"n_bins must be >= 2, got {n_bins}")
    # edges as small rationals so a score equal to an edge lands in the upper bin
    edges = [(n_bins + i) / (2 * n_bins) for i in range(n_bins + 1)]
    sums = [0.0] * n_bins
    hits = [0] * n_bins
    counts = [0] * n_bins
    for score, correct in scored:
        if not (0.5 <= score <= 1.0):
            raise ScoreOutOfRange(f"score {score} outside [0.5, 1.0]", score=score)
        idx = min(bisect_right(edges, score) - 1, n_bins - 1)
        sums[idx] += score
        counts[idx] += 1
        if correct:
            hits[idx] += 1
    bins = []
    for i in range(n_bins):
        lo = edges[i]
        hi = edges[i + 1]
        c = counts[i]
        bins.append(ReliabilityBin(
            lo=lo,
            hi=hi,
            mean_confidence=sums[i] / c if c else 0.0,
            observed_accuracy=hits[i] / c if c else 0.0,
            count=c,
        ))
    return ReliabilityDiagram(bins=tuple(bins))


def score_predictions(tree: DecisionTree, dataset: Dataset) -> list[tuple[float, bool]]:
    """(majority fraction, was the prediction correct) per row, for reliability()."""
    if dataset.n == 0:
        raise EmptyDataset("empty dataset")
    if dataset.schema != tree.schema:
        raise SchemaMismatch("dataset schema differs from the model's schema")
    out = []
    for values, truth in zip(dataset.rows, dataset.labels):
        p = _predict_values(tree, values)
        out.append((p.majority_fraction, p.label == truth))
    return out
