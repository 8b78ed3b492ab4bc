"""
Unit tests for classification metrics, checkpoint evaluation and single-image prediction.
"""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctclassifier.data.dataset import LabeledDataset, scan_dataset
from ctclassifier.errors import DatasetError, DecodeError, UndefinedMetricError
from ctclassifier.models.checkpoint import Checkpoint, params_equal
from ctclassifier.models.network import Network
from ctclassifier.models.zoo import ModelSpec
from ctclassifier.nn import layers as L
from ctclassifier.nn.params import ParamSet
from ctclassifier.train.evaluation import classify, evaluate, predict
from ctclassifier.train.metrics import (
    ConfusionMatrix,
    MetricsReport,
    accuracy,
    compute_auc,
    f1_score,
    precision,
    recall,
)


def brightness_network(slope=20.0, cut=0.49):
    """Global mean intensity above `cut` reads as covid; separates the toy dataset perfectly."""
    spec = ModelSpec("small-cnn", (8, 8, 1), (L.globalavgpool(), L.dense(2), L.softmax_layer()), dtype="float64")
    params = ParamSet([{}, {"weights": np.array([[-slope, slope]]), "bias": np.array([slope * cut, -slope * cut])}, {}])
    return Network(spec, params)


def test_accuracy_example():
    assert accuracy(ConfusionMatrix(tp=50, tn=40, fp=5, fn=5)) == pytest.approx(0.90)


def test_precision_recall_f1_example():
    cm = ConfusionMatrix(tp=8, tn=0, fp=2, fn=2)
    assert precision(cm) == pytest.approx(0.8)
    assert recall(cm) == pytest.approx(0.8)
    assert f1_score(precision(cm), recall(cm)) == pytest.approx(0.8)


def test_zero_denominator_conventions():
    cm = ConfusionMatrix(tp=0, tn=10, fp=0, fn=0)
    assert precision(cm) == 0.0
    assert recall(cm) == 0.0
    assert f1_score(0.0, 0.0) == 0.0
    with pytest.raises(UndefinedMetricError):
        accuracy(ConfusionMatrix())
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)


@settings(max_examples=1000, deadline=None)
@given(tp=st.integers(0, 500), tn=st.integers(0, 500), fp=st.integers(0, 500), fn=st.integers(0, 500))
def test_metrics_match_exact_rationals(tp, tn, fp, fn):
    cm = ConfusionMatrix(tp, tn, fp, fn)
    if cm.total:
        assert accuracy(cm) == pytest.approx(float(Fraction(tp + tn, cm.total)), abs=1e-12)
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    assert precision(cm) == pytest.approx(float(p), abs=1e-12)
    assert recall(cm) == pytest.approx(float(r), abs=1e-12)
    assert f1_score(precision(cm), recall(cm)) == pytest.approx(float(f1), abs=1e-12)


def test_confusion_from_predictions():
    cm = ConfusionMatrix.from_predictions([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (2, 1, 1, 1)


def test_auc_examples():
    assert compute_auc([(0.9, 1), (0.8, 1), (0.3, 0), (0.1, 0)]) == 1.0
    assert compute_auc([(0.9, 1), (0.4, 1), (0.5, 0), (0.1, 0)]) == 0.75
    assert compute_auc([(0.5, 1), (0.5, 0)]) == 0.5
    assert compute_auc([(0.1, 1), (0.9, 0)]) == 0.0


def test_auc_single_class_undefined():
    with pytest.raises(UndefinedMetricError):
        compute_auc([(0.9, 1), (0.2, 1)])


def brute_force_auc(pairs):
    positives = [p for p, y in pairs if y == 1]
    negatives = [p for p, y in pairs if y == 0]
    doubled = sum(2 if sp > sn else 1 if sp == sn else 0 for sp, sn in product(positives, negatives))
    return Fraction(doubled, 2 * len(positives) * len(negatives))


def check_auc_against_pairs(pairs):
    if {y for _, y in pairs} != {0, 1}:
        with pytest.raises(UndefinedMetricError):
            compute_auc(pairs)
        return
    assert compute_auc(pairs) == float(brute_force_auc(pairs))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]), st.integers(0, 1)),
                min_size=2, max_size=40))
def test_auc_matches_pairwise_count_with_ties(pairs):
    check_auc_against_pairs(pairs)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 1.0, allow_nan=False), st.integers(0, 1)), min_size=2, max_size=200))
def test_auc_matches_pairwise_count_continuous(pairs):
    check_auc_against_pairs(pairs)


def test_report_text_format():
    cm = ConfusionMatrix(tp=3, tn=4, fp=1, fn=2)
    report = MetricsReport.from_confusion(cm, 0.8125, 0.25)
    lines = report.to_text().splitlines()
    assert lines[0] == "accuracy 0.700000"
    assert "auc 0.812500" in lines
    assert lines[-4:] == ["tp 3", "tn 4", "fp 1", "fn 2"]
    parsed = MetricsReport.from_text(report.to_text())
    assert parsed.confusion == cm
    assert parsed.auc == pytest.approx(0.8125)


def test_report_omits_undefined_auc():
    report = MetricsReport.from_confusion(ConfusionMatrix(tp=0, tn=5), None, 0.1)
    assert not any(line.startswith("auc") for line in report.to_lines())
    assert MetricsReport.from_text(report.to_text()).auc is None


def test_evaluate_perfect_classifier(toy_dataset):
    ds = scan_dataset(toy_dataset)
    network = brightness_network()
    before = network.params.copy()
    report = evaluate(network, ds, batch_size=7)
    assert report.accuracy == 1.0
    assert report.auc == 1.0
    assert (report.confusion.tp, report.confusion.tn) == (10, 10)
    assert params_equal(network.params, before)


def test_evaluate_accepts_checkpoint(toy_dataset):
    network = brightness_network()
    report = evaluate(Checkpoint(network.spec, network.params), scan_dataset(toy_dataset))
    assert report.f1 == 1.0


def test_evaluate_single_class_omits_auc(dataset_factory):
    ds = scan_dataset(dataset_factory("only_covid", n_covid=4, n_normal=0))
    report = evaluate(brightness_network(), ds)
    assert report.auc is None
    assert report.recall == 1.0


def test_evaluate_empty_dataset():
    with pytest.raises(DatasetError):
        evaluate(brightness_network(), LabeledDataset(()))


def test_predict_is_deterministic(toy_dataset):
    network = brightness_network()
    image = toy_dataset / "covid" / "covid_000.png"
    first = predict(network, image)
    assert first == predict(network, image)
    assert first.label == "covid"
    assert 0.5 < first.covid_probability <= 1.0
    assert predict(network, toy_dataset / "normal" / "normal_000.png").label == "normal"
    assert first.to_line().startswith("covid\t")


def test_predict_probabilities_sum_to_one():
    network = brightness_network()
    pixels = np.stack([np.full((8, 8, 1), v) for v in (0.1, 0.49, 0.9)])
    np.testing.assert_allclose(network.predict_proba(pixels).sum(axis=1), 1.0, atol=1e-12)


def test_predict_rejects_undecodable(tmp_path):
    bad = tmp_path / "scan.png"
    bad.write_bytes(b"nope")
    with pytest.raises(DecodeError, match="scan.png"):
        predict(brightness_network(), bad)


def test_threshold_classification():
    assert classify(0.93) == "covid"
    assert classify(0.5) == "covid"
    assert classify(0.49) == "normal"
    assert classify(0.93, threshold=0.95) == "normal"
