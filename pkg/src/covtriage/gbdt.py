"""Gradient-boosted binary decision trees with a logistic objective.

Exact greedy split search over sorted unique values (no histograms), with
second-order gain, L2 leaf regularization, and learned default directions
for missing values: at every split, rows with a missing feature are tried on
both sides and the better side is stored, so any input, including an
all-missing row, routes to exactly one leaf per tree.

Training is fully deterministic for fixed data and config: features are
scanned in index order and ties broken toward the lower feature index, the
lower threshold, and the left default direction, in that order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ModelFormatError, ModelVersionError, ValidationError

MODEL_VERSION = "1"


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters. `seed` is recorded for provenance; the
    trainer itself is deterministic and draws no random numbers."""

    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    l2_lambda: float = 1.0
    min_split_gain: float = 0.0
    min_child_hessian: float = 1.0
    positive_class_weight: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ValidationError("n_trees", f"must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValidationError("max_depth", f"must be >= 1, got {self.max_depth}")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValidationError("learning_rate", f"must be in (0,1], got {self.learning_rate}")
        if self.l2_lambda < 0:
            raise ValidationError("l2_lambda", f"must be >= 0, got {self.l2_lambda}")
        if self.min_split_gain < 0:
            raise ValidationError("min_split_gain", f"must be >= 0, got {self.min_split_gain}")
        if self.min_child_hessian < 0:
            raise ValidationError("min_child_hessian", f"must be >= 0, got {self.min_child_hessian}")
        if self.positive_class_weight <= 0:
            raise ValidationError("positive_class_weight", f"must be > 0, got {self.positive_class_weight}")


@dataclass
class Tree:
    """One binary tree as parallel node arrays (node 0 is the root).

    feature[i] == -1 marks a leaf; `value` holds the unscaled leaf weight
    (the ensemble's learning rate is applied at prediction time), `cover`
    the number of training rows that reached the node, and `gain` the split
    gain recorded when the node was split.
    """

    feature: np.ndarray      # int32
    threshold: np.ndarray    # float64
    default_left: np.ndarray  # bool
    left: np.ndarray         # int32, -1 for leaves
    right: np.ndarray        # int32
    value: np.ndarray        # float64
    cover: np.ndarray        # float64
    gain: np.ndarray         # float64

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        out = 0
        for i in range(self.n_nodes):  # children follow parents in preorder
            if self.feature[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
                out = max(out, d[i] + 1)
        return out


@dataclass
class TreeEnsemble:
    """Trained boosted model. Treat instances as immutable after training;
    concurrent prediction from a shared ensemble is safe."""

    base_score: float
    learning_rate: float
    trees: list[Tree]
    feature_names: tuple[str, ...]
    train_config: TrainConfig
    metrics: dict = field(default_factory=dict)
    version: str = MODEL_VERSION

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def max_depth(self) -> int:
        return max((t.depth() for t in self.trees), default=0)

    _packed = None
    _digest = None

    def packed(self) -> "PackedEnsemble":
        if self._packed is None:
            self._packed = _pack(self)
        return self._packed

    def digest(self) -> str:
        """Content hash identifying this exact model (schema version + trees)."""
        if self._digest is None:
            h = hashlib.sha256()
            h.update(repr((self.version, self.base_score, self.learning_rate,
                           self.feature_names)).encode())
            for t in self.trees:
                for arr in (t.feature, t.threshold, t.default_left.astype(np.uint8),
                            t.left, t.right, t.value, t.cover):
                    h.update(arr.tobytes())
            self._digest = f"{self.version}:{h.hexdigest()[:12]}"
        return self._digest


@dataclass
class PackedEnsemble:
    """Flat concatenated node arrays for the fast traversal kernels."""

    offsets: np.ndarray       # int64, len n_trees+1; tree t spans [offsets[t], offsets[t+1])
    feature: np.ndarray       # int32, -1 leaf
    threshold: np.ndarray     # float64
    default_left: np.ndarray  # uint8
    left: np.ndarray          # int32, global node ids
    right: np.ndarray         # int32
    value: np.ndarray         # float64
    cover: np.ndarray         # float64
    max_depth: int


def _pack(model: TreeEnsemble) -> PackedEnsemble:
    offsets = np.zeros(len(model.trees) + 1, dtype=np.int64)
    for i, t in enumerate(model.trees):
        offsets[i + 1] = offsets[i] + t.n_nodes
    total = int(offsets[-1])
    feature = np.empty(total, dtype=np.int32)
    threshold = np.empty(total, dtype=np.float64)
    default_left = np.empty(total, dtype=np.uint8)
    left = np.empty(total, dtype=np.int32)
    right = np.empty(total, dtype=np.int32)
    value = np.empty(total, dtype=np.float64)
    cover = np.empty(total, dtype=np.float64)
    for i, t in enumerate(model.trees):
        o = offsets[i]
        feature[o:o + t.n_nodes] = t.feature
        threshold[o:o + t.n_nodes] = t.threshold
        default_left[o:o + t.n_nodes] = t.default_left.astype(np.uint8)
        left[o:o + t.n_nodes] = np.where(t.left >= 0, t.left + o, -1)
        right[o:o + t.n_nodes] = np.where(t.right >= 0, t.right + o, -1)
        value[o:o + t.n_nodes] = t.value
        cover[o:o + t.n_nodes] = t.cover
    return PackedEnsemble(offsets, feature, threshold, default_left, left, right,
                          value, cover, model.max_depth())


def split_train_test(records: Sequence, ratio: float, seed: int,
                     labels: Optional[Sequence[int]] = None):
    """Stratified deterministic split; train gets exactly floor(n * ratio) items."""
    if not (0.0 < ratio < 1.0):
        raise ValidationError("ratio", f"must be in (0,1), got {ratio}")
    if labels is None:
        labels = [getattr(r, "label") for r in records]
        if any(lb is None for lb in labels):
            raise ValidationError("outcome", "split requires labeled records")
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(records):
        raise ValidationError("labels", "labels and records differ in length")
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) < 2 or len(neg) < 2:
        raise ValidationError("outcome", "need at least 2 labeled examples of each class")
    rng = np.random.default_rng(seed)
    pos = rng.permutation(pos)
    neg = rng.permutation(neg)
    n_train = int(math.floor(len(y) * ratio))
    n_train_pos = int(math.floor(len(pos) * ratio))
    n_train_neg = n_train - n_train_pos
    if n_train_pos < 1 or n_train_neg < 1 or n_train_pos >= len(pos) or n_train_neg >= len(neg):
        raise ValidationError("ratio", "split leaves an empty class on one side")
    train_idx = np.sort(np.concatenate([pos[:n_train_pos], neg[:n_train_neg]]))
    test_idx = np.sort(np.concatenate([pos[n_train_pos:], neg[n_train_neg:]]))
    train = [records[i] for i in train_idx]
    test = [records[i] for i in test_idx]
    return train, test


def _as_matrix(rows) -> np.ndarray:
    if hasattr(rows, "as_row"):
        return np.asarray(rows.as_row(), dtype=np.float64)[None, :]
    if isinstance(rows, np.ndarray):
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        return X
    return np.stack([r.as_row() if hasattr(r, "as_row") else np.asarray(r, dtype=np.float64)
                     for r in rows])


class _Grower:
    """Grows one tree from per-row gradients/hessians using globally
    presorted per-feature row lists (restricted to present values)."""

    def __init__(self, X: np.ndarray, cfg: TrainConfig, presorted: list[np.ndarray]):
        self.X = X
        self.cfg = cfg
        self.presorted = presorted
        self.side = np.zeros(X.shape[0], dtype=np.int8)  # partition scratch

    def grow(self, g: np.ndarray, h: np.ndarray):
        self.g = g
        self.h = h
        self.nodes_feature: list[int] = []
        self.nodes_threshold: list[float] = []
        self.nodes_default_left: list[bool] = []
        self.nodes_left: list[int] = []
        self.nodes_right: list[int] = []
        self.nodes_value: list[float] = []
        self.nodes_cover: list[float] = []
        self.nodes_gain: list[float] = []
        self.leaf_assignments: list[tuple[np.ndarray, float]] = []
        all_rows = np.arange(self.X.shape[0], dtype=np.int64)
        self._build(all_rows, self.presorted, depth=0)
        tree = Tree(
            feature=np.asarray(self.nodes_feature, dtype=np.int32),
            threshold=np.asarray(self.nodes_threshold, dtype=np.float64),
            default_left=np.asarray(self.nodes_default_left, dtype=bool),
            left=np.asarray(self.nodes_left, dtype=np.int32),
            right=np.asarray(self.nodes_right, dtype=np.int32),
            value=np.asarray(self.nodes_value, dtype=np.float64),
            cover=np.asarray(self.nodes_cover, dtype=np.float64),
            gain=np.asarray(self.nodes_gain, dtype=np.float64),
        )
        return tree, self.leaf_assignments

    def _alloc(self) -> int:
        self.nodes_feature.append(-1)
        self.nodes_threshold.append(0.0)
        self.nodes_default_left.append(True)
        self.nodes_left.append(-1)
        self.nodes_right.append(-1)
        self.nodes_value.append(0.0)
        self.nodes_cover.append(0.0)
        self.nodes_gain.append(0.0)
        return len(self.nodes_feature) - 1

    def _build(self, rows: np.ndarray, sorted_lists: list[np.ndarray], depth: int) -> int:
        cfg = self.cfg
        node = self._alloc()
        G = float(self.g[rows].sum())
        H = float(self.h[rows].sum())
        self.nodes_cover[node] = float(len(rows))
        if depth < cfg.max_depth and len(rows) >= 2:
            best = self._best_split(sorted_lists, G, H)
        else:
            best = None
        if best is None:
            self.nodes_value[node] = -G / (H + cfg.l2_lambda)
            self.leaf_assignments.append((rows, self.nodes_value[node]))
            return node

        f, thr, default_left, gain = best
        xv = self.X[rows, f]
        miss = np.isnan(xv)
        go_left = np.where(miss, default_left, xv < thr)
        left_rows = rows[go_left]
        right_rows = rows[~go_left]
        self.side[left_rows] = 1
        self.side[right_rows] = 2
        left_lists = []
        right_lists = []
        for sl in sorted_lists:
            s = self.side[sl]
            left_lists.append(sl[s == 1])
            right_lists.append(sl[s == 2])

        self.nodes_feature[node] = f
        self.nodes_threshold[node] = thr
        self.nodes_default_left[node] = default_left
        self.nodes_gain[node] = gain
        self.nodes_left[node] = self._build(left_rows, left_lists, depth + 1)
        self.nodes_right[node] = self._build(right_rows, right_lists, depth + 1)
        return node

    def _best_split(self, sorted_lists: list[np.ndarray], G: float, H: float):
        cfg = self.cfg
        lam = cfg.l2_lambda
        parent_score = G * G / (H + lam)
        best_gain = -np.inf
        best = None
        for f in range(self.X.shape[1]):
            sl = sorted_lists[f]
            m = len(sl)
            if m < 1:
                continue
            vals = self.X[sl, f]
            bnd = np.flatnonzero(np.diff(vals) > 0)
            if bnd.size == 0:
                continue
            gs = self.g[sl]
            hs = self.h[sl]
            cg = np.cumsum(gs)
            ch = np.cumsum(hs)
            G_miss = G - cg[-1]
            H_miss = H - ch[-1]
            GLp = cg[bnd]
            HLp = ch[bnd]
            thr = 0.5 * (vals[bnd] + vals[bnd + 1])
            valid_thr = thr > vals[bnd]  # guard midpoint collapse onto the left value

            GL_l = GLp + G_miss
            HL_l = HLp + H_miss
            GR_l = G - GL_l
            HR_l = H - HL_l
            gains_l = 0.5 * (GL_l * GL_l / (HL_l + lam) + GR_l * GR_l / (HR_l + lam) - parent_score)
            ok_l = valid_thr & (HL_l >= cfg.min_child_hessian) & (HR_l >= cfg.min_child_hessian)
            gains_l[~ok_l] = -np.inf

            GL_r = GLp
            HL_r = HLp
            GR_r = G - GL_r
            HR_r = H - HL_r
            gains_r = 0.5 * (GL_r * GL_r / (HL_r + lam) + GR_r * GR_r / (HR_r + lam) - parent_score)
            ok_r = valid_thr & (HL_r >= cfg.min_child_hessian) & (HR_r >= cfg.min_child_hessian)
            gains_r[~ok_r] = -np.inf

            go_left = gains_l >= gains_r  # prefer the left default on ties
            gains = np.where(go_left, gains_l, gains_r)
            k = int(np.argmax(gains))  # first max: lowest threshold wins ties
            if gains[k] > best_gain:
                best_gain = float(gains[k])
                best = (f, float(thr[k]), bool(go_left[k]), best_gain)
        if best is None or best_gain <= 0.0 or best_gain < cfg.min_split_gain:
            return None
        return best


def _weighted_logloss(margins: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    per = np.logaddexp(0.0, margins) - y * margins
    return float((w * per).sum() / w.sum())


def train(rows, labels, config: TrainConfig = TrainConfig(),
          feature_names: Optional[Sequence[str]] = None) -> TreeEnsemble:
    """Fit the boosted ensemble. NaN in a row means 'missing'; any other
    non-finite value is rejected."""
    config.validate()
    X = _as_matrix(rows)
    y = np.asarray(labels, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ValidationError("labels", f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValidationError("labels", "labels must be 0 or 1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise ValidationError("labels", "need at least one example of each class")
    if np.isinf(X).any():
        raise ValidationError("rows", "feature values must be finite or NaN (missing)")

    n, F = X.shape
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(F))
    feature_names = tuple(feature_names)
    if len(feature_names) != F:
        raise ValidationError("feature_names", f"{len(feature_names)} names for {F} columns")

    w = np.where(y == 1.0, config.positive_class_weight, 1.0)
    base_score = float(np.log((w * y).sum() / (w * (1.0 - y)).sum()))

    presorted = []
    for f in range(F):
        col = X[:, f]
        present = np.flatnonzero(~np.isnan(col))
        order = np.argsort(col[present], kind="stable")
        presorted.append(present[order].astype(np.int64))

    grower = _Grower(X, config, presorted)
    margins = np.full(n, base_score, dtype=np.float64)
    loss_curve = [_weighted_logloss(margins, y, w)]
    trees: list[Tree] = []
    for _ in range(config.n_trees):
        p = 1.0 / (1.0 + np.exp(-margins))
        g = w * (p - y)
        h = w * p * (1.0 - p)
        tree, leaf_assignments = grower.grow(g, h)
        trees.append(tree)
        for rows_at_leaf, value in leaf_assignments:
            margins[rows_at_leaf] += config.learning_rate * value
        loss_curve.append(_weighted_logloss(margins, y, w))

    metrics = {
        "n_train": n,
        "n_positive": n_pos,
        "train_loss": loss_curve,
    }
    return TreeEnsemble(
        base_score=base_score,
        learning_rate=config.learning_rate,
        trees=trees,
        feature_names=feature_names,
        train_config=config,
        metrics=metrics,
    )


def _check_width(model: TreeEnsemble, X: np.ndarray) -> None:
    if X.shape[-1] != model.n_features:
        raise ValidationError(
            "rows", f"expected {model.n_features} feature slots, got {X.shape[-1]}")


def _route_leaf_sum(model: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Sum of routed leaf values per row (unscaled by learning rate)."""
    n = X.shape[0]
    total = np.zeros(n, dtype=np.float64)
    rows_idx = np.arange(n)
    for tree in model.trees:
        if tree.n_nodes == 1:
            total += tree.value[0]
            continue
        node = np.zeros(n, dtype=np.int64)
        depth = tree.depth()
        for _ in range(depth):
            feat = tree.feature[node]
            active = feat >= 0
            if not active.any():
                break
            f = np.where(active, feat, 0)
            xv = X[rows_idx, f]
            miss = np.isnan(xv)
            go_left = np.where(miss, tree.default_left[node], xv < tree.threshold[node])
            nxt = np.where(go_left, tree.left[node], tree.right[node])
            node = np.where(active, nxt, node)
        total += tree.value[node]
    return total


def predict_margin(model: TreeEnsemble, rows):
    """Log-odds prediction; accepts one FeatureVector/1-D row or a matrix."""
    single = hasattr(rows, "as_row") or (isinstance(rows, np.ndarray) and rows.ndim == 1)
    X = _as_matrix(rows)
    _check_width(model, X)
    if single:
        leaf_sum = _kernels.leaf_sum_single(model.packed(), np.ascontiguousarray(X[0])) \
            if model.trees else 0.0
        return float(model.base_score + model.learning_rate * leaf_sum)
    margins = model.base_score + model.learning_rate * _route_leaf_sum(model, X)
    return margins


def predict_proba(model: TreeEnsemble, rows):
    m = predict_margin(model, rows)
    return 1.0 / (1.0 + np.exp(-np.asarray(m))) if isinstance(m, np.ndarray) else 1.0 / (1.0 + math.exp(-m))


def gain_importance(model: TreeEnsemble) -> np.ndarray:
    """Total split gain accumulated per feature (zeros for unused features)."""
    scores = np.zeros(model.n_features, dtype=np.float64)
    for tree in model.trees:
        internal = tree.feature >= 0
        np.add.at(scores, tree.feature[internal], tree.gain[internal])
    return scores


def save_model(model: TreeEnsemble, path) -> None:
    """Write the versioned JSON artifact (deterministic: no timestamps)."""
    doc = {
        "version": model.version,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_names": list(model.feature_names),
        "train_config": asdict(model.train_config),
        "metrics_snapshot": model.metrics,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "default_left": t.default_left.astype(int).tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
                "cover": t.cover.tolist(),
                "gain": t.gain.tolist(),
            }
            for t in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> TreeEnsemble:
    """Read a model artifact; refuses unknown versions, reports parse errors."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"cannot parse model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise ModelFormatError(f"model file {path} lacks a version field")
    if doc["version"] != MODEL_VERSION:
        raise ModelVersionError(
            f"model version {doc['version']!r} unsupported (current: {MODEL_VERSION!r})")
    try:
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                default_left=np.asarray(t["default_left"], dtype=bool),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                value=np.asarray(t["value"], dtype=np.float64),
                cover=np.asarray(t["cover"], dtype=np.float64),
                gain=np.asarray(t["gain"], dtype=np.float64),
            )
            for t in doc["trees"]
        ]
        model = TreeEnsemble(
            base_score=float(doc["base_score"]),
            learning_rate=float(doc["learning_rate"]),
            trees=trees,
            feature_names=tuple(doc["feature_names"]),
            train_config=TrainConfig(**doc["train_config"]),
            metrics=doc.get("metrics_snapshot", {}),
            version=doc["version"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"model file {path} is malformed: {exc}") from exc
    return model
