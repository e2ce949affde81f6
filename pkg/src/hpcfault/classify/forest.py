"""Bagged random forest over :mod:`cart` trees."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ..labeling import class_order
from .cart import TreeModel, TreeParams, _check_xy, train_tree, tree_importances


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    features_per_split: int | str | None = "sqrt"  # "sqrt" -> ceil(sqrt(d)); None -> d
    bootstrap: bool = True
    seed: int = 0
    max_depth: int | None = None
    min_samples_split: int = 2

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        fps = self.features_per_split
        if isinstance(fps, str) and fps != "sqrt":
            raise ValueError(f"features_per_split must be an integer, 'sqrt' or None, got {fps!r}")
        if isinstance(fps, int) and fps < 1:
            raise ValueError("features_per_split must be at least 1")
        TreeParams(self.max_depth, self.min_samples_split)

    @property
    def tree_params(self) -> TreeParams:
        return TreeParams(max_depth=self.max_depth, min_samples_split=self.min_samples_split)

    def resolve_features(self, d: int) -> int:
        fps = self.features_per_split
        if fps is None:
            return d
        if fps == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        if fps > d:
            raise ValueError(f"features_per_split={fps} exceeds the {d} available features")
        return fps

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[TreeModel, ...]
    params: ForestParams
    classes: tuple
    feature_count: int

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        for t in self.trees:
            if t.classes != self.classes or t.feature_count != self.feature_count:
                raise ValueError("all trees must share the class set and feature count")

    @cached_property
    def _tree_lists(self):
        return [t._lists for t in self.trees]

    def vote(self, x: Sequence[float]) -> np.ndarray:
        votes = [0] * len(self.classes)
        for feat, thr, left, right, leaf_class in self._tree_lists:
            i = 0
            while feat[i] != -1:
                i = left[i] if x[feat[i]] <= thr[i] else right[i]
            votes[leaf_class[i]] += 1
        return np.array(votes)

    def predict_index(self, x: Sequence[float]) -> int:
        # argmax picks the first maximum: ties resolve by class order
        return int(np.argmax(self.vote(x)))

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((len(X), len(self.classes)), dtype=np.int64)
        rows = np.arange(len(X))
        for t in self.trees:
            np.add.at(votes, (rows, t.predict_indices(X)), 1)
        return np.argmax(votes, axis=1)

    def predict(self, X: np.ndarray) -> list:
        return [self.classes[i] for i in self.predict_indices(X)]


def _tree_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def train_forest(X, y, params: ForestParams = ForestParams(), *, classes: Sequence | None = None, n_jobs: int = 1) -> ForestModel:
    """Train ``params.n_trees`` trees, each on its own bootstrap resample.

    Tree ``i`` draws its bootstrap indices and feature subsets from a child
    seed spawned off ``params.seed``, so results do not depend on ``n_jobs``.
    """
    X = _check_xy(X, y)
    classes = tuple(class_order(y)) if classes is None else tuple(classes)
    y = list(y)
    n, d = X.shape
    k = params.resolve_features(d)
    seeds = _tree_seeds(params.seed, params.n_trees)

    def grow(seq: np.random.SeedSequence) -> TreeModel:
        rng = np.random.default_rng(seq)
        if params.bootstrap:
            idx = rng.integers(0, n, n)
            Xb, yb = X[idx], [y[i] for i in idx]
        else:
            Xb, yb = X, y
        return train_tree(Xb, yb, params.tree_params, rng, classes=classes, features_per_split=k)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(grow, seeds))
    else:
        trees = [grow(s) for s in seeds]
    return ForestModel(tuple(trees), params, classes, d)


def predict_forest(model: ForestModel, x: Sequence[float]):
    if len(x) != model.feature_count:
        raise ValueError(f"expected {model.feature_count} features, got {len(x)}")
    return model.classes[model.predict_index(x.tolist() if isinstance(x, np.ndarray) else x)]


def feature_importances(model: TreeModel | ForestModel) -> np.ndarray:
    """Impurity-decrease importances; a forest averages its trees."""
    if isinstance(model, TreeModel):
        return tree_importances(model)
    return np.mean([tree_importances(t) for t in model.trees], axis=0)
