"""Shapley attribution for tree ensembles, in margin (log-odds) space.

`shap_values` runs the polynomial path-dependent traversal; `brute_shap` is
the exponential subset-enumeration oracle with identical conditional-
expectation semantics (cover-weighted expectations over split paths), kept
independent so the two can check each other.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ValidationError
from .gbdt import TreeEnsemble, _as_matrix, _check_width, predict_margin

BRUTE_MAX_FEATURES = 12


@dataclass(frozen=True)
class Attribution:
    """Per-feature contributions; base_value + phi.sum() equals the margin."""

    base_value: float
    phi: np.ndarray
    predicted_margin: float


def expected_margin(model: TreeEnsemble) -> float:
    """Cover-weighted expected prediction (the attribution base value)."""
    if not model.trees:
        return model.base_score
    return model.base_score + model.learning_rate * _kernels.expected_leaf_sum(model.packed())


def shap_values(model: TreeEnsemble, vector) -> Attribution:
    """Exact path-dependent Shapley attribution for one input row."""
    X = _as_matrix(vector)
    _check_width(model, X)
    x = np.ascontiguousarray(X[0])
    phi = np.zeros(model.n_features, dtype=np.float64)
    if model.trees:
        _kernels.shap_single(model.packed(), x, model.learning_rate, phi)
    return Attribution(
        base_value=expected_margin(model),
        phi=phi,
        predicted_margin=predict_margin(model, x),
    )


def shap_matrix(model: TreeEnsemble, rows) -> tuple[np.ndarray, float]:
    """Attribution matrix (n, n_features) plus the shared base value."""
    X = _as_matrix(rows)
    _check_width(model, X)
    out = np.zeros((X.shape[0], model.n_features), dtype=np.float64)
    if model.trees:
        _kernels.shap_batch(model.packed(), X, model.learning_rate, out)
    return out, expected_margin(model)


def active_features(model: TreeEnsemble) -> list[int]:
    """Indices of features used by at least one split."""
    used: set[int] = set()
    for tree in model.trees:
        used.update(int(f) for f in tree.feature[tree.feature >= 0])
    return sorted(used)


def _cond_value(model: TreeEnsemble, x: np.ndarray, known: np.ndarray) -> float:
    """Cover-weighted conditional expectation with the features in `known`
    routed by x (missing values follow the learned default direction)."""
    total = 0.0
    for tree in model.trees:
        def rec(i: int) -> float:
            f = tree.feature[i]
            if f < 0:
                return float(tree.value[i])
            if known[f]:
                xv = x[f]
                go_left = bool(tree.default_left[i]) if np.isnan(xv) else xv < tree.threshold[i]
                return rec(int(tree.left[i] if go_left else tree.right[i]))
            li, ri = int(tree.left[i]), int(tree.right[i])
            c = float(tree.cover[i])
            return (tree.cover[li] * rec(li) + tree.cover[ri] * rec(ri)) / c
        total += rec(0)
    return model.base_score + model.learning_rate * total


def brute_shap(model: TreeEnsemble, vector) -> Attribution:
    """Subset-enumeration Shapley oracle (guarded to small active sets)."""
    X = _as_matrix(vector)
    _check_width(model, X)
    x = X[0]
    active = active_features(model)
    m = len(active)
    if m > BRUTE_MAX_FEATURES:
        raise ValidationError(
            "model", f"brute_shap supports <= {BRUTE_MAX_FEATURES} active features, got {m}")

    known = np.zeros(model.n_features, dtype=bool)
    values = np.empty(1 << m, dtype=np.float64)
    for mask in range(1 << m):
        known[:] = False
        for j in range(m):
            if mask >> j & 1:
                known[active[j]] = True
        values[mask] = _cond_value(model, x, known)

    fact = [math.factorial(i) for i in range(m + 1)]
    phi = np.zeros(model.n_features, dtype=np.float64)
    for j in range(m):
        acc = 0.0
        for mask in range(1 << m):
            if mask >> j & 1:
                continue
            s = bin(mask).count("1")
            weight = fact[s] * fact[m - s - 1] / fact[m]
            acc += weight * (values[mask | (1 << j)] - values[mask])
        phi[active[j]] = acc
    return Attribution(
        base_value=float(values[0]),
        phi=phi,
        predicted_margin=float(values[(1 << m) - 1]),
    )


@dataclass(frozen=True)
class AttributionSummary:
    """Per-row attribution matrix plus ranking metadata for beeswarm plots."""

    feature_names: tuple[str, ...]
    row_ids: tuple[str, ...]
    phi: np.ndarray             # (n, n_features)
    feature_values: np.ndarray  # (n, n_features), NaN where missing
    base_value: float
    mean_abs: np.ndarray
    max_abs: np.ndarray
    rank_by: str                # "mean_abs" | "max_abs"
    ranking: tuple[int, ...]    # feature indices, most important first


def summary(model: TreeEnsemble, rows, row_ids: Optional[Sequence[str]] = None,
            rank_by: str = "mean_abs") -> AttributionSummary:
    """Attribution distributions over a batch, ranked for display."""
    X = _as_matrix(rows)
    if X.shape[0] < 1:
        raise ValidationError("rows", "summary needs at least one row")
    if rank_by not in ("mean_abs", "max_abs"):
        raise ValidationError("rank_by", f"must be 'mean_abs' or 'max_abs', got {rank_by!r}")
    phi, base = shap_matrix(model, X)
    mean_abs = np.abs(phi).mean(axis=0)
    max_abs = np.abs(phi).max(axis=0)
    key = mean_abs if rank_by == "mean_abs" else max_abs
    ranking = tuple(int(i) for i in np.argsort(-key, kind="stable"))
    if row_ids is None:
        row_ids = tuple(str(i) for i in range(X.shape[0]))
    return AttributionSummary(
        feature_names=model.feature_names,
        row_ids=tuple(row_ids),
        phi=phi,
        feature_values=X,
        base_value=base,
        mean_abs=mean_abs,
        max_abs=max_abs,
        rank_by=rank_by,
        ranking=ranking,
    )


def write_summary(s: AttributionSummary, csv_path, ranking_path) -> None:
    """Long-format CSV (row id, feature, feature_value, phi) + ranking JSON."""
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row_id", "feature", "feature_value", "phi"])
        for r, rid in enumerate(s.row_ids):
            for f, name in enumerate(s.feature_names):
                v = s.feature_values[r, f]
                w.writerow([rid, name, "" if np.isnan(v) else repr(float(v)),
                            repr(float(s.phi[r, f]))])
    doc = {
        "rank_by": s.rank_by,
        "base_value": s.base_value,
        "ranking": [
            {
                "feature": s.feature_names[i],
                "mean_abs_phi": float(s.mean_abs[i]),
                "max_abs_phi": float(s.max_abs[i]),
            }
            for i in s.ranking
        ],
    }
    with open(ranking_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
