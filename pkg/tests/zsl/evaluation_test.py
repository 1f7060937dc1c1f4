import csv
import logging

import numpy as np
import pytest

from tests.setup import PROPERTY_CASES
from zsl.funcs.classifier import fit, predict_batch
from zsl.funcs.evaluation import build_report, evaluate, harmonic_mean, mean_accuracy, per_class_top1, \
    report_table, topk_accuracy, truth_ranks, write_predictions
from zsl.models.distributions import StudentT
from zsl.models.errors import EmptyInput, InvalidArgument
from zsl.models.hyperparams import Hyperparams
from zsl.models.model import ClassPpd, EvalReport, MetaClassMap, Model, Prediction

# rows whose true class ranks 3rd, 1st, 0th, 3rd and 0th in their score rows
HAND_SCORES = np.array([
    [0.1, 0.5, 0.3, 0.2, 0.0],
    [0.9, 0.8, 0.1, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.5, 0.4, 0.3, 0.2, 0.1],
    [0.2, 0.1, 0.0, 0.0, 0.3],
])
HAND_TRUTHS = np.arange(5)


# ==== per-class accuracy ====
def test_per_class_top1_macro():
    preds = [0, 0, 0, 1, 1, 0]
    truths = [0, 0, 0, 0, 1, 1]
    per_class = per_class_top1(preds, truths, [0, 1])
    assert per_class == {0: 0.75, 1: 0.5}
    assert mean_accuracy(per_class) == 0.625


def test_per_class_top1_predictions():
    preds = [Prediction(c, {c: 0.}) for c in (2, 3, 3)]
    assert per_class_top1(preds, [2, 3, 3], [2, 3]) == {2: 1., 3: 1.}


def test_per_class_top1_counting_oracle():
    rng = np.random.default_rng(0)
    truths = rng.integers(0, 8, size=500)
    preds = np.where(rng.random(500) < 0.6, truths, rng.integers(0, 8, size=500))
    pool = [1, 3, 4, 7]
    per_class = per_class_top1(preds, truths, pool)
    for c in pool:
        hits = total = 0
        for p, t in zip(preds, truths):
            if t == c:
                total += 1
                hits += int(p == c)
        assert per_class[c] == hits / total


def test_per_class_top1_excludes_empty(caplog):
    with caplog.at_level(logging.WARNING):
        per_class = per_class_top1([0, 1], [0, 1], [0, 1, 2])
    assert per_class == {0: 1., 1: 1.}
    assert "[2]" in caplog.text


def test_per_class_top1_errors():
    with pytest.raises(EmptyInput):
        per_class_top1([0], [0], [])
    with pytest.raises(InvalidArgument):
        per_class_top1([0, 1], [0], [0, 1])


def test_mean_accuracy_empty():
    assert mean_accuracy({}) == 0.


# ==== harmonic mean ====
def test_harmonic_mean():
    assert round(harmonic_mean(75.1, 37.1), 1) == 49.7
    assert harmonic_mean(75.1, 37.1) == pytest.approx(49.66, abs=0.01)
    assert harmonic_mean(0.4, 0.4) == pytest.approx(0.4)
    assert harmonic_mean(0.8, 0.) == 0.
    assert harmonic_mean(0., 0.) == 0.


def test_harmonic_mean_bounds():
    rng = np.random.default_rng(1)
    for _ in range(PROPERTY_CASES):
        tr, ts = rng.random(2)
        h = harmonic_mean(tr, ts)
        assert h <= 2 * min(tr, ts) + 1e-12
        assert min(tr, ts) - 1e-12 <= h <= max(tr, ts) + 1e-12
        assert h <= 1.


# ==== top-k ====
def test_topk_hand_ranked():
    assert list(truth_ranks(HAND_SCORES, HAND_TRUTHS, np.arange(5))) == [3, 1, 0, 3, 0]
    out = topk_accuracy(HAND_SCORES, HAND_TRUTHS, [1, 3, 5], range(5))
    assert out[1] == pytest.approx(0.4)
    assert out[3] == pytest.approx(0.6)
    assert out[5] == 1.
    micro = topk_accuracy(HAND_SCORES, HAND_TRUTHS, [3], range(5), micro=True)
    assert micro[3] == pytest.approx(0.6)


def test_topk_pool_restricts_rows():
    out = topk_accuracy(HAND_SCORES, HAND_TRUTHS, [1, 2], [1, 2])
    assert out == {1: 0.5, 2: 1.}


def test_topk_ties_rank_lower_id_first():
    scores = np.array([[1., 1., 1.], [1., 1., 1.]])
    assert list(truth_ranks(scores, [0, 2], [0, 1, 2])) == [0, 2]


def test_topk_matches_top1():
    rng = np.random.default_rng(2)
    scores = rng.normal(size=(300, 6))
    truths = rng.integers(0, 6, size=300)
    class_ids = np.arange(6)
    preds = class_ids[np.argmax(scores, axis=1)]
    pool = [0, 2, 5]
    top1 = topk_accuracy(scores, truths, [1], pool)[1]
    assert top1 == pytest.approx(mean_accuracy(per_class_top1(preds, truths, pool)))


def test_topk_properties():
    rng = np.random.default_rng(3)
    for _ in range(PROPERTY_CASES // 10):
        c = int(rng.integers(2, 8))
        scores = rng.normal(size=(40, c))
        truths = rng.integers(0, c, size=40)
        out = topk_accuracy(scores, truths, range(1, c + 1), range(c))
        values = [out[k] for k in range(1, c + 1)]
        assert np.all(np.diff(values) >= 0)
        assert values[-1] == 1.

        # row order does not matter
        order = rng.permutation(40)
        assert topk_accuracy(scores[order], truths[order], range(1, c + 1), range(c)) == out


def test_topk_errors():
    with pytest.raises(InvalidArgument):
        topk_accuracy(HAND_SCORES, HAND_TRUTHS, [6], range(5))
    with pytest.raises(InvalidArgument):
        topk_accuracy(HAND_SCORES, HAND_TRUTHS, [0], range(5))
    with pytest.raises(EmptyInput):
        topk_accuracy(HAND_SCORES, HAND_TRUTHS, [1], [])
    with pytest.raises(InvalidArgument):
        truth_ranks(HAND_SCORES, [0, 1, 2, 3, 9], np.arange(5))


# ==== reports ====
def _point_model():
    ppds = [ClassPpd(0, StudentT([0.], [[1.]], 5.), True),
            ClassPpd(1, StudentT([50.], [[1.]], 5.), True),
            ClassPpd(2, StudentT([100.], [[1.]], 5.), False),
            ClassPpd(3, StudentT([150.], [[1.]], 5.), False)]
    return Model('unconstrained', Hyperparams(), ppds, MetaClassMap({}, {}, 0))


def test_build_report():
    model = _point_model()
    X = np.array([[0.], [1.], [48.], [149.], [151.], [99.]])
    truths = np.array([0, 0, 1, 3, 3, 3])
    preds, scores = predict_batch(model, X)
    assert list(preds) == [0, 0, 1, 3, 3, 2]
    report = build_report(model, truths, preds, scores, ks=(1, 2))
    assert report.tr == 1.
    assert report.ts == pytest.approx(2 / 3)
    assert report.H == pytest.approx(harmonic_mean(1., 2 / 3))
    assert report.excluded == [2]
    assert report.topk[1] == pytest.approx(2 / 3)
    # the row at 99 ranks class 2 (distance 1) and class 1 (distance 49) ahead of class 3 (distance 51)
    assert report.topk[2] == pytest.approx(2 / 3)
    assert report.topk_micro[1] == pytest.approx(2 / 3)


def test_build_report_without_unseen_rows(caplog):
    model = _point_model()
    X = np.array([[0.], [50.]])
    preds, scores = predict_batch(model, X)
    with caplog.at_level(logging.WARNING):
        report = build_report(model, [0, 1], preds, scores)
    assert report.ts == 0.
    assert report.H == 0.
    assert report.topk == {}
    assert "ts is reported as 0" in caplog.text


def test_evaluate(small_dataset, small_splits, hp):
    model = fit(small_dataset, small_splits, hp, threads=1)
    rows = small_splits.test_rows(small_dataset.labels)
    report = evaluate(model, small_dataset, rows, ks=(1, 2))
    assert 0 <= report.ts <= 1
    assert 0 <= report.tr <= 1
    assert report.H == pytest.approx(harmonic_mean(report.tr, report.ts))
    assert set(report.per_class_acc) == set(small_splits.all_classes)
    assert report.topk[1] <= report.topk[2]

    # metrics do not depend on row order
    shuffled = evaluate(model, small_dataset, np.random.default_rng(0).permutation(rows), ks=(1, 2))
    assert shuffled.to_dict() == report.to_dict()

    with pytest.raises(EmptyInput):
        evaluate(model, small_dataset, [])


def test_report_dict():
    report = EvalReport({0: 1., 3: 0.5}, 0.5, 1., harmonic_mean(1., 0.5), {1: 0.5}, {1: 0.25}, [7])
    d = report.to_dict()
    assert d['per_class_acc'] == {"0": 1., "3": 0.5}
    again = EvalReport.from_dict(d)
    assert again.to_dict() == d


def test_report_table():
    a = EvalReport({}, 0.371, 0.751, harmonic_mean(0.751, 0.371))
    table = report_table([("unconstrained", a), ("ablation_v1", EvalReport({}, 0., 0.9, 0.))])
    lines = table.splitlines()
    assert lines[0].split() == ["run", "ts", "tr", "H"]
    assert set(lines[1].replace(" ", "")) == {"-"}
    assert lines[2].split() == ["unconstrained", "0.3710", "0.7510", "0.4967"]
    assert lines[3].split()[0] == "ablation_v1"
    # numeric columns are right-aligned
    assert len(lines[2]) == len(lines[3])


def test_write_predictions(tmp_path):
    path = tmp_path / "predictions.csv"
    write_predictions(path, [4, 9], [1, 2], [1, 3], [-1.5, -2.25])
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    assert rows == [["row_index", "predicted_class", "true_class", "log_score"],
                    ["4", "1", "1", "-1.5"], ["9", "2", "3", "-2.25"]]
