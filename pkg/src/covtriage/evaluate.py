"""Imbalanced-classification evaluation: ROC/PR areas, threshold metrics,
Youden operating-point selection, bootstrap tolerance/confidence intervals,
and decision-curve analysis.

Conventions fixed across the module: a case is predicted positive iff its
score is >= the threshold (closed rule), and PR area is average precision
(step integral with tied scores collapsed into one step), never trapezoidal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import ValidationError


def _as_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValidationError("scores", "scores and labels must be 1-D and equal length")
    y = y.astype(np.int64)
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels", "labels must be 0 or 1")
    return s, y


def _require_both_classes(y: np.ndarray) -> None:
    if y.sum() == 0 or y.sum() == len(y):
        raise ValidationError("labels", "need both classes present")


def auroc(scores, labels) -> float:
    """Pairwise concordance P(score_pos > score_neg) + 0.5 P(tie), via ranks."""
    s, y = _as_arrays(scores, labels)
    _require_both_classes(y)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    ranks = rankdata(s)  # average ranks handle ties
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: sum of precision * recall-increment over the
    descending-score sweep, tied scores grouped into a single step."""
    s, y = _as_arrays(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValidationError("labels", "average precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    ends = np.append(np.flatnonzero(np.diff(ss) != 0), len(ss) - 1)
    tp = np.cumsum(ys)[ends].astype(np.float64)
    predicted = (ends + 1).astype(np.float64)
    precision = tp / predicted
    recall = tp / n_pos
    d_recall = np.diff(recall, prepend=0.0)
    return float((precision * d_recall).sum())


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    specificity: float
    f1: float
    youden_j: float


def confusion_at(scores, labels, threshold: float) -> Confusion:
    """Counts and rates at one operating point (positive iff score >= threshold).
    Rates with an empty denominator are reported as 0."""
    if not (0.0 <= threshold <= 1.0):
        raise ValidationError("threshold", f"must be in [0,1], got {threshold}")
    s, y = _as_arrays(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    specificity = tn / (tn + fp) if tn + fp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Confusion(tp, fp, tn, fn, precision, recall, specificity, f1,
                     youden_j=recall + specificity - 1.0)


def best_youden(scores, labels) -> float:
    """Threshold (a distinct observed score) maximizing J = recall +
    specificity - 1; ties resolve to the largest threshold."""
    s, y = _as_arrays(scores, labels)
    _require_both_classes(y)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    ends = np.append(np.flatnonzero(np.diff(ss) != 0), len(ss) - 1)
    tp = np.cumsum(ys)[ends].astype(np.float64)
    fp = (ends + 1) - tp
    j = tp / n_pos - fp / n_neg
    best = int(np.argmax(j))  # thresholds descending: first max is the largest
    return float(ss[ends[best]])


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    mean: float
    ti_low: float
    ti_high: float
    ci_low: float
    ci_high: float
    level: float
    n_resamples: int


def _resample_indices(rng: np.random.Generator, y: np.ndarray, max_tries: int = 1000) -> np.ndarray:
    n = len(y)
    for _ in range(max_tries):
        idx = rng.integers(0, n, n)
        picked = y[idx]
        if 0 < picked.sum() < n:
            return idx
    raise ValidationError("labels", "could not draw a two-class resample; data too degenerate")


def _interval_from_stats(stats: np.ndarray, point: float, level: float) -> BootstrapResult:
    alpha = 1.0 - level
    ti_low = float(np.quantile(stats, alpha / 2, method="lower"))
    ti_high = float(np.quantile(stats, 1.0 - alpha / 2, method="higher"))
    mean = float(stats.mean())
    sd = float(stats.std(ddof=1)) if len(stats) > 1 else 0.0
    z = float(norm.ppf(0.5 + level / 2.0))
    half = z * sd / math.sqrt(len(stats))
    return BootstrapResult(point=point, mean=mean, ti_low=ti_low, ti_high=ti_high,
                           ci_low=mean - half, ci_high=mean + half,
                           level=level, n_resamples=len(stats))


def _bootstrap_stats(metric: Callable, s: np.ndarray, y: np.ndarray,
                     B: int, seed: int) -> np.ndarray:
    """The B resampled metric values; resample b uses child seed b of `seed`."""
    children = np.random.SeedSequence(seed).spawn(B)
    stats = np.empty(B, dtype=np.float64)
    for b in range(B):
        idx = _resample_indices(np.random.default_rng(children[b]), y)
        stats[b] = metric(s[idx], y[idx])
    return stats


def bootstrap(metric: Callable[[np.ndarray, np.ndarray], float], scores, labels,
              B: int = 1000, level: float = 0.95, seed: int = 0) -> BootstrapResult:
    """Resample rows with replacement B times (single-class draws are redrawn).

    TI: (alpha/2, 1-alpha/2) order statistics of the B resampled metric values.
    CI: bootstrap mean +- z(level) * sd(resampled values) / sqrt(B).
    Deterministic: resample b draws from a child seed spawned off `seed`.
    """
    if B < 100:
        raise ValidationError("B", f"need at least 100 resamples, got {B}")
    if not (0.0 < level < 1.0):
        raise ValidationError("level", f"must be in (0,1), got {level}")
    s, y = _as_arrays(scores, labels)
    _require_both_classes(y)
    stats = _bootstrap_stats(metric, s, y, B, seed)
    return _interval_from_stats(stats, point=float(metric(s, y)), level=level)


def bootstrap_many(metrics: dict[str, Callable], scores, labels,
                   B: int = 1000, level: float = 0.95, seed: int = 0) -> dict[str, BootstrapResult]:
    """Bootstrap several metrics over one shared set of resamples; each
    result uses the construction of `bootstrap` on its own statistic."""
    if B < 100:
        raise ValidationError("B", f"need at least 100 resamples, got {B}")
    if not (0.0 < level < 1.0):
        raise ValidationError("level", f"must be in (0,1), got {level}")
    s, y = _as_arrays(scores, labels)
    _require_both_classes(y)
    children = np.random.SeedSequence(seed).spawn(B)
    stats = {name: np.empty(B, dtype=np.float64) for name in metrics}
    for b in range(B):
        idx = _resample_indices(np.random.default_rng(children[b]), y)
        sb, yb = s[idx], y[idx]
        for name, fn in metrics.items():
            stats[name][b] = fn(sb, yb)
    return {name: _interval_from_stats(stats[name], point=float(fn(s, y)), level=level)
            for name, fn in metrics.items()}


def net_benefit(scores, labels, p_t: float) -> float:
    """NB(p_t) = TP/N - (FP/N) * p_t / (1 - p_t), positive iff score >= p_t."""
    if not (0.0 <= p_t < 1.0):
        raise ValidationError("p_t", f"threshold probability must be in [0,1), got {p_t}")
    s, y = _as_arrays(scores, labels)
    pred = s >= p_t
    n = len(y)
    tp = float(np.sum(pred & (y == 1)))
    fp = float(np.sum(pred & (y == 0)))
    return tp / n - (fp / n) * p_t / (1.0 - p_t)


@dataclass(frozen=True)
class DcaCurve:
    thresholds: np.ndarray
    model: np.ndarray
    treat_all: np.ndarray
    treat_none: np.ndarray  # identically zero, kept explicit for export


def dca_curve(scores, labels, grid: Optional[Sequence[float]] = None) -> DcaCurve:
    """Net-benefit curves for the model, treat-all and treat-none policies."""
    if grid is None:
        grid = np.arange(0.0, 0.5 + 1e-12, 0.005)
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or len(g) < 1:
        raise ValidationError("grid", "grid must be a non-empty 1-D sequence")
    if np.any(np.diff(g) <= 0):
        raise ValidationError("grid", "grid must be strictly increasing")
    if g[0] < 0.0 or g[-1] > 0.5:
        raise ValidationError("grid", "grid must lie within [0, 0.5]")
    s, y = _as_arrays(scores, labels)
    prevalence = float(y.mean())
    model = np.array([net_benefit(s, y, float(p)) for p in g])
    treat_all = prevalence - (1.0 - prevalence) * g / (1.0 - g)
    return DcaCurve(thresholds=g, model=model, treat_all=treat_all,
                    treat_none=np.zeros_like(g))


@dataclass(frozen=True)
class EvalReport:
    n: int
    n_positive: int
    chosen_threshold: float
    metrics: dict[str, BootstrapResult]
    roc_curve: list[tuple[float, float, float]]  # (fpr, tpr, threshold)
    pr_curve: list[tuple[float, float, float]]   # (recall, precision, threshold)
    bootstrap_b: int
    level: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_positive": self.n_positive,
            "chosen_threshold": self.chosen_threshold,
            "bootstrap_b": self.bootstrap_b,
            "level": self.level,
            "seed": self.seed,
            "metrics": {k: vars(v) for k, v in self.metrics.items()},
            "roc_curve": [list(p) for p in self.roc_curve],
            "pr_curve": [list(p) for p in self.pr_curve],
        }


def _roc_points(s: np.ndarray, y: np.ndarray) -> list[tuple[float, float, float]]:
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    ends = np.append(np.flatnonzero(np.diff(ss) != 0), len(ss) - 1)
    tp = np.cumsum(ys)[ends]
    fp = (ends + 1) - tp
    pts = [(0.0, 0.0, float("inf"))]
    pts += [(float(fp[i] / n_neg), float(tp[i] / n_pos), float(ss[ends[i]]))
            for i in range(len(ends))]
    return pts


def _pr_points(s: np.ndarray, y: np.ndarray) -> list[tuple[float, float, float]]:
    n_pos = int(y.sum())
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    ends = np.append(np.flatnonzero(np.diff(ss) != 0), len(ss) - 1)
    tp = np.cumsum(ys)[ends]
    predicted = ends + 1
    pts = [(0.0, 1.0, float("inf"))]
    pts += [(float(tp[i] / n_pos), float(tp[i] / predicted[i]), float(ss[ends[i]]))
            for i in range(len(ends))]
    return pts


def evaluate_report(scores, labels, B: int = 1000, level: float = 0.95,
                    seed: int = 0) -> EvalReport:
    """Full report: AUROC/AUPRC plus operating-point metrics at the
    Youden-optimal threshold of the original sample, all with bootstrap
    TI and CI over shared resamples."""
    s, y = _as_arrays(scores, labels)
    _require_both_classes(y)
    thr = best_youden(s, y)

    def at_threshold(name: str):
        def fn(sb, yb):
            return getattr(confusion_at(sb, yb, thr), name)
        return fn

    metric_fns: dict[str, Callable] = {
        "auroc": auroc,
        "auprc": auprc,
        "precision": at_threshold("precision"),
        "recall": at_threshold("recall"),
        "specificity": at_threshold("specificity"),
        "f1": at_threshold("f1"),
        "youden_j": at_threshold("youden_j"),
    }
    results = bootstrap_many(metric_fns, s, y, B=B, level=level, seed=seed)
    return EvalReport(
        n=len(y),
        n_positive=int(y.sum()),
        chosen_threshold=thr,
        metrics=results,
        roc_curve=_roc_points(s, y),
        pr_curve=_pr_points(s, y),
        bootstrap_b=B,
        level=level,
        seed=seed,
    )


def format_metric_block(report: EvalReport) -> str:
    """Human-readable metric block with TI and CI per metric."""
    pct = int(round(report.level * 100))
    lines = [f"n={report.n}  positives={report.n_positive}  "
             f"threshold={report.chosen_threshold:.6g} (Youden-optimal)"]
    label = {"auroc": "AUROC", "auprc": "AUPRC", "precision": "precision",
             "recall": "recall", "f1": "F1-score", "youden_j": "Youden J",
             "specificity": "specificity"}
    for key in ("auroc", "auprc", "precision", "recall", "f1", "youden_j", "specificity"):
        r = report.metrics[key]
        lines.append(
            f"{label[key]:<12} {r.point:0.3f}  "
            f"[{pct}% TI {r.ti_low:0.3f}-{r.ti_high:0.3f} | "
            f"{pct}% CI {r.ci_low:0.3f}-{r.ci_high:0.3f}]")
    return "\n".join(lines)
