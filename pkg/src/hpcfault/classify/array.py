"""One classifier per resource type.

Each model sees node-level features plus the features of a single resource
unit, and answers with exactly one class per vector.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

import numpy as np

from .cart import TreeModel, TreeParams, train_tree
from .forest import ForestModel, ForestParams, train_forest


def fit_model(X, y, params: ForestParams | TreeParams, *, classes=None, n_jobs: int = 1):
    if isinstance(params, ForestParams):
        return train_forest(X, y, params, classes=classes, n_jobs=n_jobs)
    return train_tree(X, y, params, classes=classes)


class ClassifierArray:
    def __init__(self, configs: Mapping[str, ForestParams | TreeParams]):
        if not configs:
            raise ValueError("a classifier array needs at least one resource type")
        self.configs = dict(configs)
        self.models: dict[str, TreeModel | ForestModel] = {}
        self.feature_names: dict[str, tuple[str, ...]] = {}

    @property
    def resource_types(self) -> tuple[str, ...]:
        return tuple(self.configs)

    def _params(self, resource: str):
        try:
            return self.configs[resource]
        except KeyError:
            raise KeyError(f"no classifier for resource type {resource!r}") from None

    def fit(self, vectors: Iterable) -> ClassifierArray:
        groups = defaultdict(list)
        for v in vectors:
            self._params(v.resource)
            groups[v.resource].append(v)
        for resource, vs in groups.items():
            names = vs[0].names
            if any(v.names != names for v in vs):
                raise ValueError(f"inconsistent feature layout for resource type {resource!r}")
            X = np.stack([v.values for v in vs])
            self.models[resource] = fit_model(X, [v.label for v in vs], self.configs[resource])
            self.feature_names[resource] = names
        return self

    def add_model(self, resource: str, model, feature_names: tuple[str, ...]) -> None:
        self._params(resource)
        self.models[resource] = model
        self.feature_names[resource] = tuple(feature_names)

    def predict(self, vector):
        """Single class for ``vector`` from the model of its resource type."""
        self._params(vector.resource)
        model = self.models.get(vector.resource)
        if model is None:
            raise KeyError(f"classifier for resource type {vector.resource!r} is not trained")
        names = self.feature_names[vector.resource]
        if vector.names != names:
            lookup = dict(zip(vector.names, vector.values.tolist()))
            try:
                x = [lookup[n] for n in names]
            except KeyError as exc:
                raise ValueError(f"vector lacks feature {exc.args[0]!r}") from None
        else:
            x = vector.values.tolist()
        return model.classes[model.predict_index(x)]


def classifier_array(configs: Mapping[str, ForestParams | TreeParams]) -> ClassifierArray:
    return ClassifierArray(configs)
