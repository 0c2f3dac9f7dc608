import pytest

from riskweave import cart
from riskweave.errors import EmptyInput, ScoreOutOfRange, SchemaMismatch, UndefinedMetric
from riskweave.metrics import (
    ConfusionMatrix,
    accuracy,
    evaluate,
    false_negative_rate,
    false_omission_rate,
    recall,
    reliability,
    score_predictions,
)
from riskweave.prng import SplitMix64
from riskweave.tabular import Dataset, FeatureSpec, Schema, TargetSpec

# a constructed matrix consistent with the 0.92-accuracy regime: 420/456 correct
PAPERLIKE = ConfusionMatrix(tp=10, fp=2, tn=410, fn=34)


class TestConfusionMetrics:
    def test_paperlike_accuracy(self):
        assert accuracy(PAPERLIKE) == pytest.approx(420 / 456)
        assert accuracy(PAPERLIKE) == pytest.approx(0.921, abs=1e-3)

    def test_error_type_metrics_by_hand(self):
        # high accuracy can hide poor recall: 10/44 by direct arithmetic
        assert recall(PAPERLIKE) == pytest.approx(10 / 44)
        assert false_negative_rate(PAPERLIKE) == pytest.approx(34 / 44)
        assert false_omission_rate(PAPERLIKE) == pytest.approx(34 / 444)

    def test_fnr_complements_recall(self):
        for m in (PAPERLIKE, ConfusionMatrix(5, 0, 3, 0), ConfusionMatrix(1, 2, 3, 4)):
            assert recall(m) + false_negative_rate(m) == pytest.approx(1.0)

    def test_no_false_negatives(self):
        m = ConfusionMatrix(tp=7, fp=3, tn=20, fn=0)
        assert false_negative_rate(m) == 0.0
        assert recall(m) == 1.0

    def test_undefined_metrics_raise(self):
        no_positives = ConfusionMatrix(tp=0, fp=2, tn=5, fn=0)
        with pytest.raises(UndefinedMetric):
            recall(no_positives)
        with pytest.raises(UndefinedMetric):
            false_negative_rate(no_positives)
        all_positive_predictions = ConfusionMatrix(tp=3, fp=4, tn=0, fn=0)
        with pytest.raises(UndefinedMetric):
            false_omission_rate(all_positive_predictions)

    def test_accuracy_symmetric_recall_not(self):
        m = ConfusionMatrix(tp=10, fp=2, tn=410, fn=34)
        swapped = ConfusionMatrix(tp=m.tn, fp=m.fn, tn=m.tp, fn=m.fp)
        assert accuracy(m) == pytest.approx(accuracy(swapped))
        assert recall(m) != pytest.approx(recall(swapped))


def _tiny_tree_and_data():
    schema = Schema(
        features=(FeatureSpec("x", "numeric", unit=""),),
        target=TargetSpec("y", ("low", "high"), "high"),
    )
    train_ds = Dataset(schema, ((1.0,), (2.0,), (9.0,), (10.0,)),
                       ("low", "low", "high", "high"))
    tree = cart.train(train_ds, cart.TrainParams(min_samples_leaf=1,
                                                 min_impurity_decrease=0.0))
    return schema, tree


class TestEvaluate:
    def test_all_negative_leaf(self):
        schema = Schema(
            features=(FeatureSpec("x", "numeric", unit=""),),
            target=TargetSpec("y", ("low", "high"), "high"),
        )
        ds = Dataset(schema, ((1.0,), (2.0,)), ("low", "low"))
        tree = cart.train(ds, cart.TrainParams(min_samples_leaf=1))
        m = evaluate(tree, ds)
        assert (m.fn, m.fp, m.tn, m.tp) == (0, 0, 2, 0)

    def test_permutation_invariant(self):
        schema, tree = _tiny_tree_and_data()
        ds = Dataset(schema, ((1.5,), (9.5,), (0.5,)), ("low", "high", "high"))
        reversed_ds = Dataset(schema, ds.rows[::-1], ds.labels[::-1])
        assert evaluate(tree, ds) == evaluate(tree, reversed_ds)

    def test_schema_mismatch(self, chd_tree):
        schema, tree = _tiny_tree_and_data()
        ds = Dataset(schema, ((1.0,),), ("low",))
        with pytest.raises(SchemaMismatch):
            evaluate(chd_tree, ds)

    def test_chd_holdout_quality(self, chd_tree, chd_split):
        _, test_set = chd_split
        m = evaluate(chd_tree, test_set)
        assert m.total == 456
        assert accuracy(m) >= 0.9


class TestReliability:
    def test_all_top_scores(self):
        diagram = reliability([(1.0, True)] * 5, n_bins=5)
        assert diagram.bins[-1].count == 5
        assert diagram.bins[-1].observed_accuracy == 1.0
        assert all(b.count == 0 for b in diagram.bins[:-1])

    def test_counts_partition_input(self):
        rng = SplitMix64(3)
        scored = [(0.5 + 0.5 * rng.next_double(), rng.next_below(2) == 0)
                  for _ in range(997)]
        diagram = reliability(scored, n_bins=7)
        assert sum(b.count for b in diagram.bins) == 997

    def test_bin_edges_partition_half_to_one(self):
        diagram = reliability([(0.75, True)], n_bins=10)
        assert diagram.bins[0].lo == 0.5
        assert diagram.bins[-1].hi == 1.0
        for a, b in zip(diagram.bins, diagram.bins[1:]):
            assert a.hi == b.lo

    def test_calibrated_scorer_within_tolerance(self):
        rng = SplitMix64(20)
        scored = []
        for _ in range(10_000):
            score = 0.5 + 0.5 * rng.next_double()
            scored.append((score, rng.next_double() < score))
        diagram = reliability(scored, n_bins=10)
        for b in diagram.bins:
            if b.count:
                assert abs(b.observed_accuracy - b.mean_confidence) <= 0.05

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            reliability([], n_bins=5)

    def test_score_out_of_range(self):
        with pytest.raises(ScoreOutOfRange):
            reliability([(0.3, True)], n_bins=5)

    def test_csv_five_columns(self):
        diagram = reliability([(0.91, True), (0.97, False)], n_bins=2)
        lines = diagram.to_csv().strip().split("\n")
        assert lines[0] == "bin_lo,bin_hi,mean_confidence,observed_accuracy,count"
        assert len(lines) == 3
        assert all(len(line.split(",")) == 5 for line in lines)

    def test_score_predictions_majority_fraction(self, chd_tree, chd_split):
        _, test_set = chd_split
        scored = score_predictions(chd_tree, test_set)
        assert len(scored) == test_set.n
        assert all(0.5 <= s <= 1.0 for s, _ in scored)
