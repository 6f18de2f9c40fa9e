import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilepath.errors import DataError, UndefinedRateError
from tilepath.evaluation import (REPORT_KEYS, acc_sen_spe, confusion_csv, confusion_matrix, normalize_confusion,
                                 read_scored_csv, roc_curve, youden_best_threshold)

from oracles import mann_whitney_auc, rates_by_count, roc_by_enumeration


def _labelled(pos, neg):
    return np.array(list(pos) + list(neg)), np.array([True] * len(pos) + [False] * len(neg))


def test_perfect_separation():
    roc = roc_curve(*_labelled([0.9, 0.8], [0.3, 0.1]))
    assert roc.auc == 1.0
    assert roc.youden_j == 1.0
    assert (roc.acc, roc.sen, roc.spe) == (1.0, 1.0, 1.0)


def test_three_of_four_pairs():
    s, p = _labelled([0.8, 0.4], [0.6, 0.2])
    assert mann_whitney_auc(s, p) == 0.75
    assert roc_curve(s, p).auc == pytest.approx(0.75, abs=1e-12)


def test_single_class_rejected():
    with pytest.raises(UndefinedRateError):
        roc_curve([0.1, 0.2], [True, True])
    with pytest.raises(UndefinedRateError):
        acc_sen_spe([0.1, 0.2], [False, False], 0.5)


def test_endpoints_and_monotone():
    rng = np.random.default_rng(1)
    s = rng.random(50)
    p = rng.random(50) < 0.4
    roc = roc_curve(s, p)
    assert (roc.fpr[0], roc.tpr[0]) == (0.0, 0.0)
    assert (roc.fpr[-1], roc.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(roc.fpr) >= 0) and np.all(np.diff(roc.tpr) >= 0)
    assert np.isinf(roc.thresholds[0])


def _instances():
    scores = st.lists(st.sampled_from([i / 10 for i in range(11)]) | st.floats(0, 1), min_size=2, max_size=200)
    return scores.flatmap(lambda s: st.tuples(st.just(s), st.lists(st.booleans(), min_size=len(s),
                                                                      max_size=len(s))))


@settings(max_examples=150, deadline=None)
@given(_instances())
def test_auc_equals_mann_whitney(inst):
    s, p = inst
    if all(p) or not any(p):
        return
    assert roc_curve(s, p).auc == pytest.approx(mann_whitney_auc(s, p), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(_instances())
def test_points_match_enumeration(inst):
    s, p = inst
    if all(p) or not any(p):
        return
    roc = roc_curve(s, p)
    expected = roc_by_enumeration(s, p)
    assert len(expected) == len(roc.thresholds)
    for (t, tpr, fpr), t2, tpr2, fpr2 in zip(expected, roc.thresholds, roc.tpr, roc.fpr):
        assert t == t2 and tpr == pytest.approx(tpr2, abs=1e-12) and fpr == pytest.approx(fpr2, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(_instances())
def test_youden_properties(inst):
    s, p = inst
    if all(p) or not any(p):
        return
    roc = roc_curve(s, p)
    assert roc.youden_j == pytest.approx(np.max(roc.tpr - roc.fpr), abs=1e-12)
    _, sen, spe = acc_sen_spe(s, p, roc.best_threshold)
    assert sen + spe - 1 == pytest.approx(roc.youden_j, abs=1e-12)
    # no higher threshold reaches the same J
    higher = roc.thresholds[1:] > roc.best_threshold
    assert np.all((roc.tpr[1:] - roc.fpr[1:])[higher] < roc.youden_j - 1e-12)


def _grid_instances():
    scores = st.lists(st.integers(0, 1000).map(lambda i: i / 1000), min_size=2, max_size=200)
    return scores.flatmap(lambda s: st.tuples(st.just(s), st.lists(st.booleans(), min_size=len(s),
                                                                      max_size=len(s))))


@settings(max_examples=60, deadline=None)
@given(_grid_instances())
def test_auc_invariances(inst):
    s, p = inst
    if all(p) or not any(p):
        return
    s = np.array(s)
    base = roc_curve(s, p).auc
    assert roc_curve(np.exp(3 * s) - 7, p).auc == pytest.approx(base, abs=1e-12)
    assert roc_curve(1 - s, ~np.array(p)).auc == pytest.approx(base, abs=1e-12)


def test_random_labels_near_chance():
    rng = np.random.default_rng(20190917)
    s = rng.random(10_000)
    p = rng.permutation(np.arange(10_000) % 2 == 0)
    roc = roc_curve(s, p)
    assert abs(roc.auc - 0.5) < 0.03
    assert roc.youden_j < 0.05


def test_acc_sen_spe_hand_count():
    # 3 TP, 1 FN, 4 TN, 2 FP at t = 0.5
    s = [0.9, 0.8, 0.7, 0.1, 0.2, 0.3, 0.4, 0.45, 0.6, 0.95]
    p = [True, True, True, True, False, False, False, False, False, False]
    assert rates_by_count(s, p, 0.5)[:4] == (3, 1, 4, 2)
    acc, sen, spe = acc_sen_spe(s, p, 0.5)
    assert (acc, sen) == (0.7, 0.75)
    assert spe == pytest.approx(2 / 3, abs=1e-15)


def test_acc_sen_spe_trivial():
    s, p = _labelled([0.9, 0.7], [0.2, 0.1])
    assert acc_sen_spe(s, p, 0.5) == (1.0, 1.0, 1.0)
    _, sen, spe = acc_sen_spe(s, p, 0.0)
    assert (sen, spe) == (1.0, 0.0)
    assert acc_sen_spe([0.5, 0.5], [True, False], 0.5)[1:] == (1.0, 0.0)  # inclusive comparison


def test_report_keys():
    d = roc_curve(*_labelled([0.9], [0.1])).to_dict()
    assert tuple(d) == REPORT_KEYS


def test_youden_tie_prefers_higher_threshold():
    # thresholds 0.8 and 0.4 both give J = 0.5
    s, p = _labelled([0.8, 0.4], [0.6, 0.2])
    roc = roc_curve(s, p)
    j, t = youden_best_threshold(roc)
    assert j == 0.5 and t == 0.8


def test_confusion_matrix():
    assert np.array_equal(confusion_matrix([0, 1, 2], [0, 1, 2], 3), np.eye(3, dtype=int))
    cm = confusion_matrix([5], [2], 7)
    assert cm[2, 5] == 1 and cm.sum() == 1
    rng = np.random.default_rng(0)
    act = rng.integers(0, 7, 300)
    pred = rng.integers(0, 7, 300)
    cm = confusion_matrix(pred, act, 7)
    assert cm.sum() == 300
    np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(act, minlength=7))
    with pytest.raises(DataError):
        confusion_matrix([7], [0], 7)
    with pytest.raises(DataError):
        confusion_matrix([0], [-1], 7)


def test_normalize_confusion():
    norm = normalize_confusion(np.diag([3, 1, 2]))
    np.testing.assert_array_equal(norm.matrix, np.eye(3))
    cm = np.zeros((7, 7), dtype=int)
    cm[0, :2] = 2
    cm[3, 3] = 5
    norm = normalize_confusion(cm)
    assert norm.matrix[0].tolist() == [0.5, 0.5, 0, 0, 0, 0, 0]
    assert norm.empty_rows.tolist() == [False, True, True, False, True, True, True]
    assert not norm.matrix[norm.empty_rows].any()
    np.testing.assert_allclose(norm.matrix[~norm.empty_rows].sum(axis=1), 1.0, atol=1e-12)


def test_confusion_csv():
    text = confusion_csv(np.array([[1, 0], [2, 3]]), ["a", "b"])
    assert text == "actual/predicted,a,b\na,1,0\nb,2,3\n"


def test_read_scored_csv(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("score,label\n0.9,positive\n0.2,0\n0.4,neg\n")
    s, p = read_scored_csv(f)
    assert s.tolist() == [0.9, 0.2, 0.4] and p.tolist() == [True, False, False]
    f.write_text("0.9,maybe\n")
    with pytest.raises(DataError):
        read_scored_csv(f)
