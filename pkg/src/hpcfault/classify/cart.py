"""CART classification tree with Gini impurity.

Nodes live in flat arrays (an arena): ``feature[i] == -1`` marks a leaf.
Samples with ``x[feature] <= threshold`` go to the left child.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ..labeling import class_order

LEAF = -1
# cap on the (samples x features x classes) cumulative-count buffer per chunk
_CHUNK_BUDGET = 4_000_000


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    impurity: str = "gini"

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be a positive integer or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        if self.impurity != "gini":
            raise ValueError("only Gini impurity is supported")


@dataclass(frozen=True, eq=False)
class TreeModel:
    feature: np.ndarray  # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, classes) training samples reaching each node
    feature_count: int
    classes: tuple

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=int)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    @cached_property
    def leaf_class(self) -> np.ndarray:
        """Majority class index per node; ties go to the earlier class."""
        return np.argmax(self.counts, axis=1)

    @cached_property
    def _lists(self):
        return (
            self.feature.tolist(),
            self.threshold.tolist(),
            self.left.tolist(),
            self.right.tolist(),
            self.leaf_class.tolist(),
        )

    def leaf_index(self, x: Sequence[float]) -> int:
        feat, thr, left, right, _ = self._lists
        i = 0
        while feat[i] != LEAF:
            i = left[i] if x[feat[i]] <= thr[i] else right[i]
        return i

    def predict_index(self, x: Sequence[float]) -> int:
        return self._lists[4][self.leaf_index(x)]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] != LEAF
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_class[self.apply(X)]

    def predict(self, X: np.ndarray) -> list:
        return [self.classes[i] for i in self.predict_indices(X)]


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.dot(p, p))


def _encode(y, classes):
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([lookup[v] for v in y], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} is not in the class set") from None


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    if len(y) != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)} labels")
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    return X


def _best_split(X: np.ndarray, idx: np.ndarray, onehot: np.ndarray, total: np.ndarray, feats: np.ndarray):
    """Best Gini split of rows ``idx`` over the candidate features ``feats``.

    Returns ``(score, feature, threshold)`` or None when every candidate is
    constant on these rows. ``score`` is sum(left^2)/nl + sum(right^2)/nr over
    class counts, which is maximal where the weighted child impurity is minimal.
    """
    n, C = onehot.shape
    best = None
    chunk = max(1, _CHUNK_BUDGET // max(n * C, 1))
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    tot2 = float(total @ total)
    for c0 in range(0, len(feats), chunk):
        fs = feats[c0 : c0 + chunk]
        Xf = X[idx[:, None], fs]
        order = np.argsort(Xf, axis=0, kind="stable")
        xs = np.take_along_axis(Xf, order, axis=0)
        valid = xs[1:] > xs[:-1]  # (n-1, k): split between sorted positions i and i+1
        if not valid.any():
            continue
        lc = np.cumsum(onehot[order[:-1]], axis=0)  # (n-1, k, C)
        sl = np.einsum("ijc,ijc->ij", lc, lc)
        # sum(right^2) = sum((total - left)^2)
        sr = tot2 - 2.0 * (lc @ total) + sl
        score = np.where(valid, sl / nl + sr / nr, -np.inf)
        # feature-major flattening: ties resolve to the lowest feature, then lowest threshold
        flat = int(np.argmax(score.T))
        k, i = divmod(flat, n - 1)
        s = score[i, k]
        if best is None or s > best[0]:
            a, b = xs[i, k], xs[i + 1, k]
            thr = (a + b) / 2.0
            if thr >= b:  # adjacent floats: the midpoint rounds up
                thr = a
            best = (float(s), int(fs[k]), float(thr))
    return best


def train_tree(
    X,
    y,
    params: TreeParams = TreeParams(),
    rng: np.random.Generator | int | None = None,
    *,
    classes: Sequence | None = None,
    features_per_split: int | None = None,
) -> TreeModel:
    """Grow a CART tree greedily on Gini impurity.

    With ``features_per_split`` set below the feature count, each node draws a
    random feature permutation from ``rng`` and scans it in blocks of that
    size until a block offers a split. Otherwise all features are scanned and
    ``rng`` is unused. Splitting stops at pure nodes, nodes smaller than
    ``min_samples_split``, ``max_depth``, or when no feature varies. A split
    is taken even if it leaves the Gini impurity unchanged (XOR needs that).
    """
    X = _check_xy(X, y)
    classes = tuple(class_order(y)) if classes is None else tuple(classes)
    yi = _encode(y, classes)
    n, d = X.shape
    C = len(classes)
    subsample = features_per_split is not None and features_per_split < d
    if features_per_split is not None and not 1 <= features_per_split:
        raise ValueError("features_per_split must be at least 1")
    if subsample:
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    eye = np.eye(C)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.bincount(yi[idx], minlength=C))
        return len(feature) - 1

    all_feats = np.arange(d)
    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        cnt = counts[node]
        if (
            len(idx) < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
            or np.count_nonzero(cnt) <= 1
        ):
            continue
        oh = eye[yi[idx]]
        total = cnt.astype(np.float64)
        if subsample:
            perm = rng.permutation(d)
            split = None
            for b0 in range(0, d, features_per_split):
                split = _best_split(X, idx, oh, total, np.sort(perm[b0 : b0 + features_per_split]))
                if split is not None:
                    break
        else:
            split = _best_split(X, idx, oh, total, all_feats)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first (preorder)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return TreeModel(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64).reshape(-1, C),
        feature_count=d,
        classes=classes,
    )


def predict_tree(model: TreeModel, x: Sequence[float]):
    """Class and normalized class distribution at the leaf reached by ``x``."""
    if len(x) != model.feature_count:
        raise ValueError(f"expected {model.feature_count} features, got {len(x)}")
    leaf = model.leaf_index(list(x) if isinstance(x, np.ndarray) else x)
    dist = model.counts[leaf] / model.counts[leaf].sum()
    return model.classes[model.leaf_class[leaf]], dist


def tree_importances(model: TreeModel) -> np.ndarray:
    """Weighted Gini decrease per feature, normalized to sum to 1."""
    imp = np.zeros(model.feature_count)
    n_root = model.counts[0].sum()
    for i in range(model.node_count):
        f = model.feature[i]
        if f == LEAF:
            continue
        c, l, r = model.counts[i], model.counts[model.left[i]], model.counts[model.right[i]]
        decrease = c.sum() * _gini(c) - l.sum() * _gini(l) - r.sum() * _gini(r)
        imp[f] += decrease / n_root
    total = imp.sum()
    return imp / total if total > 0 else imp
