import numpy as np
import pytest

from pktembed.evaluate import (evaluate_scores, f1_score, operating_points,
                               pr_curve, roc_curve, summary_line,
                               write_pr_csv, write_roc_csv)


def mann_whitney_auc(scores, labels):
    """Independent pairwise oracle: P(random positive outscores a random
    negative), ties counted half."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        wins += (p > neg).sum() + 0.5 * (p == neg).sum()
    return wins / (len(pos) * len(neg))


def confusion_at(scores, labels, thr):
    pred = scores >= thr
    tp = int((pred & (labels == 1)).sum())
    fp = int((pred & (labels == 0)).sum())
    fn = int((~pred & (labels == 1)).sum())
    return tp, fp, fn


def test_perfect_separation():
    scores = np.array([0.9, 0.8, 0.7, 0.2, 0.1])
    labels = np.array([1, 1, 1, 0, 0])
    assert roc_curve(scores, labels).auc == 1.0
    assert pr_curve(scores, labels).auc == 1.0


def test_reverse_separation():
    scores = np.array([0.1, 0.2, 0.9, 0.95])
    labels = np.array([1, 1, 0, 0])
    assert roc_curve(scores, labels).auc == 0.0


def test_random_scores_auc_near_half():
    rng = np.random.default_rng(0)
    scores = rng.random(4000)
    labels = (rng.random(4000) < 0.3).astype(np.int8)
    assert abs(roc_curve(scores, labels).auc - 0.5) < 0.05


def test_auc_equals_mann_whitney_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(10, 80))
        # quantized scores force plenty of ties
        scores = np.round(rng.random(n), 1)
        labels = (rng.random(n) < 0.4).astype(np.int8)
        if labels.sum() in (0, n):
            continue
        got = roc_curve(scores, labels).auc
        assert abs(got - mann_whitney_auc(scores, labels)) < 1e-9


def test_roc_curve_shape_invariants():
    rng = np.random.default_rng(2)
    scores = rng.random(200)
    labels = (rng.random(200) < 0.5).astype(np.int8)
    curve = roc_curve(scores, labels)
    assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
    assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0
    assert (np.diff(curve.fpr) >= 0).all()
    assert len(curve.fpr) <= len(np.unique(scores)) + 2


def test_pr_endpoint_convention():
    scores = np.array([0.7, 0.7, 0.2])
    labels = np.array([1, 0, 1])
    curve = pr_curve(scores, labels)
    assert (curve.recall[0], curve.precision[0]) == (0.0, 1.0)


def test_pr_all_scores_equal_single_point():
    scores = np.full(10, 0.5)
    labels = np.array([1, 0, 0, 0, 1, 0, 0, 0, 0, 0])
    curve = pr_curve(scores, labels)
    assert len(curve.recall) == 2
    assert curve.recall[1] == 1.0
    assert curve.precision[1] == pytest.approx(0.2)


def test_pr_points_match_confusion_matrix_oracle():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(5, 60))
        scores = np.round(rng.random(n), 1)
        labels = (rng.random(n) < 0.5).astype(np.int8)
        if labels.sum() == 0:
            continue
        curve = pr_curve(scores, labels)
        for thr, rec, prec in zip(curve.thresholds[1:], curve.recall[1:],
                                  curve.precision[1:]):
            tp, fp, fn = confusion_at(scores, labels, thr)
            assert prec == pytest.approx(tp / (tp + fp), abs=1e-12)
            assert rec == pytest.approx(tp / (tp + fn), abs=1e-12)


def test_monotone_transform_invariance():
    rng = np.random.default_rng(4)
    scores = rng.random(300)
    labels = (rng.random(300) < 0.3).astype(np.int8)
    base_roc = roc_curve(scores, labels)
    base_pr = pr_curve(scores, labels)
    warped = 1 / (1 + np.exp(-(5 * scores - 2)))   # strictly increasing
    warp_roc = roc_curve(warped, labels)
    warp_pr = pr_curve(warped, labels)
    np.testing.assert_allclose(warp_roc.fpr, base_roc.fpr, atol=0)
    np.testing.assert_allclose(warp_roc.tpr, base_roc.tpr, atol=0)
    assert warp_roc.auc == pytest.approx(base_roc.auc, abs=1e-12)
    np.testing.assert_allclose(warp_pr.recall, base_pr.recall, atol=0)
    np.testing.assert_allclose(warp_pr.precision, base_pr.precision, atol=0)
    assert warp_pr.auc == pytest.approx(base_pr.auc, abs=1e-12)


def test_single_class_errors():
    with pytest.raises(ValueError):
        roc_curve(np.array([0.1, 0.2]), np.array([1, 1]))
    with pytest.raises(ValueError):
        roc_curve(np.array([0.1, 0.2]), np.array([0, 0]))
    with pytest.raises(ValueError):
        pr_curve(np.array([0.1, 0.2]), np.array([0, 0]))


def test_f1_from_precision_recall_pairs():
    assert f1_score(0.504, 0.951) == pytest.approx(0.659, abs=0.0005)
    assert f1_score(0.417, 0.937) == pytest.approx(0.577, abs=0.0005)
    assert f1_score(0.0, 0.0) == 0.0


def test_operating_points_consistency():
    rng = np.random.default_rng(5)
    scores = rng.random(100)
    labels = (rng.random(100) < 0.4).astype(np.int8)
    pts = operating_points(scores, labels, [0.25, 0.5, 0.75])
    for pt in pts:
        tp, fp, fn = confusion_at(scores, labels, pt.threshold)
        expected_p = tp / (tp + fp) if tp + fp else 0.0
        expected_r = tp / (tp + fn) if tp + fn else 0.0
        assert pt.precision == pytest.approx(expected_p, abs=1e-12)
        assert pt.recall == pytest.approx(expected_r, abs=1e-12)
        assert pt.f1 == pytest.approx(f1_score(expected_p, expected_r),
                                      abs=1e-12)
    with pytest.raises(ValueError):
        operating_points(scores, labels, [])


def test_evaluate_scores_bundle():
    scores = np.array([0.9, 0.6, 0.4, 0.1])
    labels = np.array([1, 0, 1, 0])
    curves = evaluate_scores(scores, labels)
    assert 0.0 <= curves.auc_roc <= 1.0
    assert 0.0 <= curves.auc_pr <= 1.0
    assert len(curves.operating_points) == 4


def test_csv_export_and_summary(tmp_path):
    scores = np.array([0.9, 0.6, 0.4, 0.1])
    labels = np.array([1, 0, 1, 0])
    roc = roc_curve(scores, labels)
    pr = pr_curve(scores, labels)
    write_roc_csv(roc, tmp_path / "roc.csv")
    write_pr_csv(pr, tmp_path / "pr.csv")
    rows = [line.split(",") for line in
            (tmp_path / "roc.csv").read_text().splitlines()]
    assert len(rows) == len(roc.fpr)
    assert all(len(r) == 3 for r in rows)
    assert float(rows[1][1]) == pytest.approx(roc.fpr[1])
    line = summary_line(0.99625, 0.60442)
    assert line == "auc_roc=0.996250,auc_pr=0.604420"
