import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covtriage import (ValidationError, auprc, auroc, best_youden, bootstrap,
                       confusion_at, dca_curve, evaluate_report, net_benefit)
from covtriage.evaluate import (_bootstrap_stats, _interval_from_stats,
                                format_metric_block)

RNG = np.random.default_rng(99)


def pairwise_auroc_oracle(scores, labels):
    """O(n^2) concordance count."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    pos = s[y == 1]
    neg = s[y == 0]
    diff = pos[:, None] - neg[None, :]
    return (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / (len(pos) * len(neg))


def average_precision_oracle(scores, labels):
    """Step integral recomputed per threshold through confusion_at."""
    thresholds = np.unique(scores)[::-1]
    ap = 0.0
    prev_recall = 0.0
    for t in thresholds:
        c = confusion_at(scores, labels, t)
        ap += (c.recall - prev_recall) * c.precision
        prev_recall = c.recall
    return ap


def youden_scan_oracle(scores, labels):
    best_j, best_t = -np.inf, None
    for t in np.unique(scores):
        c = confusion_at(scores, labels, t)
        if c.youden_j > best_j or (c.youden_j == best_j and t > best_t):
            best_j, best_t = c.youden_j, t
    return best_t


def random_instance(rng, n=None):
    n = n or int(rng.integers(10, 400))
    scores = np.round(rng.random(n), 2)  # coarse grid forces ties
    labels = (rng.random(n) < 0.3).astype(int)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == n:
        labels[0] = 0
    return scores, labels


class TestAuroc:
    def test_perfect(self):
        assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auroc([0.5] * 6, [0, 1, 0, 1, 0, 1]) == 0.5

    def test_worked_example(self):
        assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75, abs=1e-15)

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            auroc([0.1, 0.2], [1, 1])

    def test_matches_pairwise_oracle(self):
        for _ in range(40):
            s, y = random_instance(RNG)
            assert auroc(s, y) == pytest.approx(pairwise_auroc_oracle(s, y), abs=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_negation_complement_when_tie_free(self, seed):
        rng = np.random.default_rng(seed)
        s = rng.permutation(np.linspace(0.01, 0.99, 40))  # distinct scores
        y = (rng.random(40) < 0.4).astype(int)
        if y.sum() in (0, 40):
            return
        assert auroc(s, y) + auroc(-s, y) == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_monotone_transform_invariant(self, seed):
        rng = np.random.default_rng(seed)
        s, y = random_instance(rng, n=60)
        t = np.exp(3.0 * s)  # strictly increasing
        assert auroc(s, y) == pytest.approx(auroc(t, y), abs=1e-12)
        assert auprc(s, y) == pytest.approx(auprc(t, y), abs=1e-12)
        ja = confusion_at(s, y, best_youden(s, y)).youden_j
        jb = confusion_at(t / (1 + t.max()), y, best_youden(t / (1 + t.max()), y)).youden_j
        assert ja == pytest.approx(jb, abs=1e-12)


class TestAuprc:
    def test_perfect(self):
        assert auprc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_worked_example(self):
        # ranks: pos, neg, pos, neg -> (1 + 2/3) / 2
        assert auprc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == pytest.approx((1 + 2 / 3) / 2, abs=1e-12)

    def test_no_positives_rejected(self):
        with pytest.raises(ValidationError):
            auprc([0.1, 0.2], [0, 0])

    def test_matches_threshold_oracle(self):
        for _ in range(40):
            s, y = random_instance(RNG)
            assert auprc(s, y) == pytest.approx(average_precision_oracle(s, y), abs=1e-12)

    def test_random_scores_baseline_is_prevalence(self):
        rng = np.random.default_rng(7)
        n, prev = 3000, 0.013
        vals = []
        for _ in range(60):
            y = (rng.random(n) < prev).astype(int)
            if y.sum() == 0:
                y[0] = 1
            vals.append(auprc(rng.random(n), y))
        assert abs(np.mean(vals) - prev) < 0.006


class TestConfusion:
    def test_threshold_zero(self):
        c = confusion_at([0.2, 0.7], [1, 0], 0.0)
        assert c.recall == 1.0 and c.specificity == 0.0

    def test_threshold_above_max(self):
        c = confusion_at([0.2, 0.7], [1, 0], 1.0)
        assert c.recall == 0.0 and c.specificity == 1.0

    def test_closed_threshold_rule(self):
        c = confusion_at([0.5, 0.49], [1, 0], 0.5)
        assert c.tp == 1 and c.fp == 0

    def test_reported_operating_point_identities(self):
        # recall 0.807 and specificity 0.933 built exactly from counts
        scores = np.concatenate([
            np.full(807, 0.9), np.full(193, 0.1),   # positives
            np.full(67, 0.9), np.full(933, 0.1),    # negatives
        ])
        labels = np.concatenate([np.ones(1000, int), np.zeros(1000, int)])
        c = confusion_at(scores, labels, 0.5)
        assert c.recall == pytest.approx(0.807, abs=1e-12)
        assert c.specificity == pytest.approx(0.933, abs=1e-12)
        assert c.youden_j == pytest.approx(0.740, abs=1e-12)
        assert abs(c.youden_j - 0.739) <= 0.0015  # rounded-report comparison
        assert c.f1 == pytest.approx(2 * c.precision * c.recall / (c.precision + c.recall), abs=1e-15)

    @given(st.integers(0, 10_000), st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_count_identities(self, seed, thr):
        rng = np.random.default_rng(seed)
        s, y = random_instance(rng, n=80)
        c = confusion_at(s, y, thr)
        assert c.tp + c.fn == int(y.sum())
        assert c.tn + c.fp == len(y) - int(y.sum())
        assert c.youden_j == pytest.approx(c.recall + c.specificity - 1.0, abs=1e-15)


class TestBestYouden:
    def test_separable_reaches_one(self):
        t = best_youden([0.8, 0.9, 0.1, 0.2], [1, 1, 0, 0])
        assert t == 0.8
        assert confusion_at([0.8, 0.9, 0.1, 0.2], [1, 1, 0, 0], t).youden_j == 1.0

    def test_all_equal_scores(self):
        t = best_youden([0.4] * 6, [1, 0, 1, 0, 1, 0])
        assert confusion_at([0.4] * 6, [1, 0, 1, 0, 1, 0], t).youden_j == 0.0

    def test_tie_breaks_to_larger_threshold(self):
        scores = [0.9, 0.5, 0.5, 0.1]
        labels = [1, 1, 0, 0]
        assert best_youden(scores, labels) == 0.9

    def test_matches_scan_oracle(self):
        for _ in range(25):
            s, y = random_instance(RNG, n=200)
            assert best_youden(s, y) == youden_scan_oracle(s, y)


class TestBootstrap:
    def test_constant_metric_degenerate_intervals(self):
        scores = np.concatenate([np.full(30, 0.9), np.full(30, 0.1)])
        labels = np.concatenate([np.ones(30, int), np.zeros(30, int)])
        r = bootstrap(auroc, scores, labels, B=200, seed=5)
        assert (r.ti_low, r.ti_high) == (1.0, 1.0)
        assert (r.ci_low, r.ci_high) == (1.0, 1.0)

    def test_ti_wider_than_ci(self):
        s, y = random_instance(RNG, n=300)
        r = bootstrap(auroc, s, y, B=200, seed=5)
        assert (r.ti_high - r.ti_low) >= (r.ci_high - r.ci_low)
        assert r.ti_low <= r.mean <= r.ti_high
        assert r.ci_low <= r.mean <= r.ci_high

    def test_deterministic(self):
        s, y = random_instance(RNG, n=150)
        assert bootstrap(auroc, s, y, B=150, seed=3) == bootstrap(auroc, s, y, B=150, seed=3)
        assert bootstrap(auroc, s, y, B=150, seed=3) != bootstrap(auroc, s, y, B=150, seed=4)

    def test_ti_is_order_statistics(self):
        s, y = random_instance(RNG, n=200)
        B, level = 400, 0.95
        stats = np.sort(_bootstrap_stats(auroc, s, np.asarray(y), B, seed=11))
        r = _interval_from_stats(stats, point=auroc(s, y), level=level)
        k_lo = int(np.floor(0.025 * (B - 1)))
        k_hi = int(np.ceil(0.975 * (B - 1)))
        assert r.ti_low == stats[k_lo]
        assert r.ti_high == stats[k_hi]
        assert r.mean == pytest.approx(stats.mean(), abs=1e-15)

    def test_too_few_resamples_rejected(self):
        s, y = random_instance(RNG, n=50)
        with pytest.raises(ValidationError):
            bootstrap(auroc, s, y, B=50)


class TestDca:
    def test_formula_example(self):
        # N=10: TP=2, FP=1 at p_t=0.2 -> 0.2 - 0.1 * 0.25
        scores = [0.3, 0.25, 0.21] + [0.1] * 7
        labels = [1, 1, 0, 0, 0, 0, 0, 0, 0, 1]
        # third positive scores below threshold: TP=2, FP=1
        assert net_benefit(scores, labels, 0.2) == pytest.approx(0.175, abs=1e-12)

    def test_zero_threshold_equals_prevalence(self):
        s, y = random_instance(RNG, n=100)
        assert net_benefit(s, y, 0.0) == pytest.approx(y.mean(), abs=1e-15)

    def test_threshold_one_rejected(self):
        with pytest.raises(ValidationError):
            net_benefit([0.5], [1], 1.0)

    def test_curves(self):
        s, y = random_instance(RNG, n=200)
        curve = dca_curve(s, y)
        assert np.all(curve.treat_none == 0.0)
        assert curve.treat_all[0] == y.mean()  # exact at p_t = 0
        assert curve.thresholds[0] == 0.0 and curve.thresholds[-1] <= 0.5

    def test_grid_validation(self):
        s, y = random_instance(RNG, n=50)
        with pytest.raises(ValidationError):
            dca_curve(s, y, [0.2, 0.1])
        with pytest.raises(ValidationError):
            dca_curve(s, y, [0.1, 0.6])


class TestReport:
    def test_structure_and_format(self):
        s, y = random_instance(RNG, n=400)
        rep = evaluate_report(s, y, B=120, seed=2)
        assert set(rep.metrics) == {"auroc", "auprc", "precision", "recall",
                                    "specificity", "f1", "youden_j"}
        assert rep.n == 400
        block = format_metric_block(rep)
        assert "AUROC" in block and "95% TI" in block and "95% CI" in block
        doc = rep.to_dict()
        assert doc["chosen_threshold"] == rep.chosen_threshold

    def test_deterministic(self):
        s, y = random_instance(RNG, n=300)
        assert evaluate_report(s, y, B=120, seed=6).to_dict() == \
            evaluate_report(s, y, B=120, seed=6).to_dict()
