"""Native warm-start classifiers over packet feature matrices.

Both classifiers follow the scikit-learn estimator API (get_params via
BaseEstimator, fit/partial_fit/predict/predict_proba) but are implemented
here, not delegated. The per-file training step is ``fit_file``:

* WarmStartForestClassifier appends n_estimators_per_file new trees per
  file that contains at least one positive label; files without positives
  leave the model untouched. Existing trees are never retrained.
* StreamingGaussianNB merges per-file sufficient statistics (count, mean,
  sum of squared deviations per class and feature), so any file order
  yields the same model.

``fit(X, y)`` resets the model and then fits the one batch, matching the
usual scikit-learn contract; ``partial_fit`` is an alias for ``fit_file``.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import FormatError, TruncatedError
from .validation import check_binary_labels, check_feature_array

MODEL_MAGIC = b"P2VMODL1"
_TAG_FOREST = 1
_TAG_GNB = 2


@dataclass
class DecisionTree:
    """Flat array form of a binary decision tree.

    feature[i] < 0 marks a leaf; value[i] is the class-1 probability
    estimate at node i (meaningful at leaves).
    """
    feature: np.ndarray    # int32
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    value: np.ndarray      # float64

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


def _build_tree(X, y, rng, max_depth, min_samples_leaf, max_features):
    """Grow one tree on (X, y): Gini impurity, max_features random
    candidates per split, thresholds midway between distinct values."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        y_node = y[idx]
        n_node = len(idx)
        pos = int(y_node.sum())
        value[node] = pos / n_node
        if (pos == 0 or pos == n_node
                or (max_depth is not None and depth >= max_depth)
                or n_node < 2 * min_samples_leaf):
            continue

        candidates = rng.choice(X.shape[1], size=max_features, replace=False)
        best = None  # (score, feature, threshold, sorted index split)
        for f in candidates:
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            xs = col[order]
            cum_pos = np.cumsum(y_node[order])
            n_left = np.arange(1, n_node)
            boundary_ok = xs[:-1] < xs[1:]
            if min_samples_leaf > 1:
                boundary_ok &= ((n_left >= min_samples_leaf)
                                & (n_node - n_left >= min_samples_leaf))
            if not boundary_ok.any():
                continue
            lp = cum_pos[:-1].astype(np.float64)
            rp = pos - lp
            rn = (n_node - n_left).astype(np.float64)
            ln = n_left.astype(np.float64)
            # Weighted child Gini (times n_node, constant per node).
            score = 2.0 * (lp * (ln - lp) / ln + rp * (rn - rp) / rn)
            score[~boundary_ok] = np.inf
            i = int(np.argmin(score))
            if best is None or score[i] < best[0]:
                thr = (float(xs[i]) + float(xs[i + 1])) / 2.0
                best = (float(score[i]), int(f), thr, order, i)

        if best is None:
            continue
        _, f, thr, order, i = best
        left_idx = idx[order[:i + 1]]
        right_idx = idx[order[i + 1:]]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((left[node], left_idx, depth + 1))
        stack.append((right[node], right_idx, depth + 1))

    return DecisionTree(feature=np.array(feature, dtype=np.int32),
                        threshold=np.array(threshold, dtype=np.float64),
                        left=np.array(left, dtype=np.int32),
                        right=np.array(right, dtype=np.int32),
                        value=np.array(value, dtype=np.float64))


def _tree_scores(tree: DecisionTree, X) -> np.ndarray:
    """Class-1 leaf probability for every row of X."""
    out = np.empty(len(X))
    if len(X) == 0:
        return out
    stack = [(0, np.arange(len(X)))]
    while stack:
        node, rows = stack.pop()
        f = tree.feature[node]
        if f < 0:
            out[rows] = tree.value[node]
            continue
        go_left = X[rows, f] <= tree.threshold[node]
        stack.append((tree.left[node], rows[go_left]))
        stack.append((tree.right[node], rows[~go_left]))
    return out


class WarmStartForestClassifier(BaseEstimator, ClassifierMixin):
    """Random forest grown file by file.

    Each call to fit_file on a file with at least one positive label adds
    n_estimators_per_file trees, trained on a bootstrap sample with
    sqrt(d) feature candidates per split and Gini impurity. After k
    positive-containing files the forest holds k * n_estimators_per_file
    trees.
    """

    def __init__(self, n_estimators_per_file=10, max_depth=None,
                 min_samples_leaf=1, random_state=0):
        self.n_estimators_per_file = n_estimators_per_file
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state
        self._reset()

    def _reset(self):
        self.trees_ = []
        self.n_features_in_ = None
        self.files_fitted_ = 0
        self.classes_ = np.array([0, 1])

    def fit_file(self, X, y):
        X = check_feature_array(X, self.n_features_in_, dtype=np.float32)
        y = check_binary_labels(y, X.shape[0])
        if self.n_features_in_ is None:
            self.n_features_in_ = X.shape[1]
        if y.sum() == 0:
            return self
        max_features = max(1, int(np.sqrt(X.shape[1])))
        base = len(self.trees_)
        for j in range(self.n_estimators_per_file):
            rng = np.random.default_rng(
                np.random.SeedSequence(self.random_state,
                                       spawn_key=(base + j,)))
            boot = rng.integers(0, X.shape[0], X.shape[0])
            self.trees_.append(_build_tree(
                X[boot], y[boot], rng, self.max_depth,
                self.min_samples_leaf, max_features))
        self.files_fitted_ += 1
        return self

    partial_fit = fit_file

    def fit(self, X, y):
        self._reset()
        return self.fit_file(X, y)

    def predict_proba(self, X):
        if not self.trees_:
            raise NotFittedError("forest has no trees; no positive-containing "
                                 "file has been fitted")
        X = check_feature_array(X, self.n_features_in_, dtype=np.float32)
        scores = np.zeros(X.shape[0])
        for tree in self.trees_:
            scores += _tree_scores(tree, X)
        scores /= len(self.trees_)
        return np.column_stack([1.0 - scores, scores])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int8)


class StreamingGaussianNB(BaseEstimator, ClassifierMixin):
    """Gaussian naive Bayes fitted from per-file sufficient statistics.

    Per class c and feature j the model keeps count, mean and the sum of
    squared deviations; file batches merge exactly (Chan's parallel
    update), so training order does not matter. Variances are population
    variances floored at var_floor_scale times the largest observed
    variance (or var_floor_scale itself if all variances vanish).
    """

    def __init__(self, var_floor_scale=1e-9):
        self.var_floor_scale = var_floor_scale
        self._reset()

    def _reset(self):
        self.n_features_in_ = None
        self.class_count_ = np.zeros(2)
        self.theta_ = None     # (2, d) per-class means
        self.m2_ = None        # (2, d) per-class sums of squared deviations
        self.classes_ = np.array([0, 1])

    def fit_file(self, X, y):
        X = check_feature_array(X, self.n_features_in_)
        y = check_binary_labels(y, X.shape[0])
        if self.n_features_in_ is None:
            self.n_features_in_ = X.shape[1]
            self.theta_ = np.zeros((2, X.shape[1]))
            self.m2_ = np.zeros((2, X.shape[1]))
        for c in (0, 1):
            rows = X[y == c]
            n_new = rows.shape[0]
            if n_new == 0:
                continue
            mean_new = rows.mean(axis=0)
            m2_new = ((rows - mean_new) ** 2).sum(axis=0)
            n_old = self.class_count_[c]
            if n_old == 0:
                self.theta_[c] = mean_new
                self.m2_[c] = m2_new
            else:
                total = n_old + n_new
                delta = mean_new - self.theta_[c]
                self.theta_[c] += delta * (n_new / total)
                self.m2_[c] += m2_new + delta ** 2 * (n_old * n_new / total)
            self.class_count_[c] += n_new
        return self

    partial_fit = fit_file

    def fit(self, X, y):
        self._reset()
        return self.fit_file(X, y)

    def class_variances(self) -> np.ndarray:
        """Floored per-class population variances, shape (2, d)."""
        if self.theta_ is None or (self.class_count_ == 0).any():
            raise NotFittedError("both classes need at least one sample")
        var = self.m2_ / self.class_count_[:, None]
        max_var = float(var.max())
        floor = self.var_floor_scale * (max_var if max_var > 0 else 1.0)
        return np.maximum(var, floor)

    def predict_proba(self, X):
        var = self.class_variances()
        X = check_feature_array(X, self.n_features_in_)
        priors = np.log(self.class_count_ / self.class_count_.sum())
        jll = np.empty((X.shape[0], 2))
        for c in (0, 1):
            diff = X - self.theta_[c]
            jll[:, c] = priors[c] - 0.5 * np.sum(
                np.log(2.0 * np.pi * var[c]) + diff ** 2 / var[c], axis=1)
        log_norm = np.logaddexp(jll[:, 0], jll[:, 1])
        return np.exp(jll - log_norm[:, None])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int8)


def _pack_array(arr, dtype) -> bytes:
    return np.ascontiguousarray(arr, dtype=dtype).tobytes()


def _take(data, offset, nbytes, what, path):
    if len(data) < offset + nbytes:
        raise TruncatedError(f"{path}: {what} truncated", offset=offset)
    return data[offset:offset + nbytes], offset + nbytes


def save_model(model, path):
    """Serialize a trained classifier; prediction-exact on reload."""
    parts = [MODEL_MAGIC]
    if isinstance(model, WarmStartForestClassifier):
        parts.append(struct.pack(
            "<BIiIqiI",
            _TAG_FOREST, model.n_estimators_per_file,
            -1 if model.max_depth is None else model.max_depth,
            model.min_samples_leaf, model.random_state,
            -1 if model.n_features_in_ is None else model.n_features_in_,
            len(model.trees_)))
        parts.append(struct.pack("<I", model.files_fitted_))
        for tree in model.trees_:
            parts.append(struct.pack("<I", tree.n_nodes))
            parts.append(_pack_array(tree.feature, "<i4"))
            parts.append(_pack_array(tree.threshold, "<f8"))
            parts.append(_pack_array(tree.left, "<i4"))
            parts.append(_pack_array(tree.right, "<i4"))
            parts.append(_pack_array(tree.value, "<f8"))
    elif isinstance(model, StreamingGaussianNB):
        d = -1 if model.n_features_in_ is None else model.n_features_in_
        parts.append(struct.pack("<Bdi", _TAG_GNB, model.var_floor_scale, d))
        parts.append(_pack_array(model.class_count_, "<f8"))
        if d >= 0:
            parts.append(_pack_array(model.theta_, "<f8"))
            parts.append(_pack_array(model.m2_, "<f8"))
    else:
        raise TypeError(f"cannot serialize model of type {type(model)!r}")
    Path(path).write_bytes(b"".join(parts))
    return Path(path)


def _load_forest(data, offset, path):
    head, offset = _take(data, offset, struct.calcsize("<IiIqiI"),
                         "forest header", path)
    n_est, max_depth, min_leaf, random_state, n_features, n_trees = \
        struct.unpack("<IiIqiI", head)
    model = WarmStartForestClassifier(
        n_estimators_per_file=n_est,
        max_depth=None if max_depth < 0 else max_depth,
        min_samples_leaf=min_leaf, random_state=random_state)
    head, offset = _take(data, offset, 4, "files_fitted", path)
    model.files_fitted_ = struct.unpack("<I", head)[0]
    model.n_features_in_ = None if n_features < 0 else n_features
    for t in range(n_trees):
        head, offset = _take(data, offset, 4, f"tree {t} node count", path)
        (n_nodes,) = struct.unpack("<I", head)
        arrays = []
        for name, dtype, width in (("feature", "<i4", 4),
                                   ("threshold", "<f8", 8),
                                   ("left", "<i4", 4), ("right", "<i4", 4),
                                   ("value", "<f8", 8)):
            raw, offset = _take(data, offset, n_nodes * width,
                                f"tree {t} {name}", path)
            arrays.append(np.frombuffer(raw, dtype=dtype).copy())
        model.trees_.append(DecisionTree(*arrays))
    return model, offset


def _load_gnb(data, offset, path):
    head, offset = _take(data, offset, struct.calcsize("<di"),
                         "gnb header", path)
    var_floor_scale, d = struct.unpack("<di", head)
    model = StreamingGaussianNB(var_floor_scale=var_floor_scale)
    raw, offset = _take(data, offset, 16, "class counts", path)
    model.class_count_ = np.frombuffer(raw, dtype="<f8").copy()
    if d >= 0:
        model.n_features_in_ = d
        raw, offset = _take(data, offset, 16 * d, "means", path)
        model.theta_ = np.frombuffer(raw, dtype="<f8").reshape(2, d).copy()
        raw, offset = _take(data, offset, 16 * d, "m2", path)
        model.m2_ = np.frombuffer(raw, dtype="<f8").reshape(2, d).copy()
    return model, offset


def load_model(path):
    data = Path(path).read_bytes()
    if len(data) < len(MODEL_MAGIC) or data[:len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a P2VMODL1 file", offset=0)
    offset = len(MODEL_MAGIC)
    tag_raw, offset = _take(data, offset, 1, "model tag", path)
    tag = tag_raw[0]
    if tag == _TAG_FOREST:
        model, offset = _load_forest(data, offset, path)
    elif tag == _TAG_GNB:
        model, offset = _load_gnb(data, offset, path)
    else:
        raise FormatError(f"{path}: unknown model tag {tag}",
                          offset=len(MODEL_MAGIC))
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes after model",
                          offset=offset)
    return model
