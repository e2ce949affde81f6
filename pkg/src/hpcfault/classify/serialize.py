"""Portable JSON model format.

Layout (``format_version`` 1)::

    {
      "format": "hpcfault-model",
      "format_version": 1,
      "kind": "tree" | "forest",
      "classes": [...],             # class labels, tie-break order
      "feature_count": d,
      "feature_names": [...] | null,
      "params": {...},              # training parameters
      "metadata": {...},            # free-form pipeline settings
      "trees": [
        {"feature": [...],          # -1 marks a leaf
         "threshold": [...],        # go left when x[feature] <= threshold
         "left": [...], "right": [...],   # child node indices, -1 for leaves
         "counts": [[...], ...]}    # training samples per class at each node
      ]
    }

Floats are written with ``repr`` precision, so a load reproduces every
threshold exactly. Keys are sorted, so equal models give equal bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..labeling import FaultClass
from .cart import TreeModel, TreeParams
from .forest import ForestModel, ForestParams

FORMAT = "hpcfault-model"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """A trained model plus the names and settings needed to feed it."""

    model: TreeModel | ForestModel
    feature_names: tuple[str, ...] | None = None
    metadata: dict = field(default_factory=dict)
    params: TreeParams | ForestParams | None = None


def _class_to_json(c):
    if isinstance(c, FaultClass):
        return c.value
    return c.item() if isinstance(c, np.generic) else c


def _tree_dict(t: TreeModel) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "counts": t.counts.tolist(),
    }


def to_dict(bundle: ModelBundle) -> dict:
    m = bundle.model
    if isinstance(m, ForestModel):
        kind, trees, params = "forest", m.trees, m.params.to_dict()
    else:
        kind, trees = "tree", (m,)
        params = asdict(bundle.params) if bundle.params is not None else asdict(TreeParams())
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "classes": [_class_to_json(c) for c in m.classes],
        "feature_count": m.feature_count,
        "feature_names": list(bundle.feature_names) if bundle.feature_names is not None else None,
        "params": params,
        "metadata": bundle.metadata,
        "trees": [_tree_dict(t) for t in trees],
    }


def dumps(bundle: ModelBundle | TreeModel | ForestModel) -> str:
    if not isinstance(bundle, ModelBundle):
        bundle = ModelBundle(bundle)
    return json.dumps(to_dict(bundle), sort_keys=True, indent=1) + "\n"


def _parse_classes(raw: list) -> tuple:
    if raw and all(isinstance(c, str) for c in raw):
        try:
            return tuple(FaultClass(c) for c in raw)
        except ValueError:
            pass
    return tuple(raw)


def from_dict(doc: dict) -> ModelBundle:
    if doc.get("format") != FORMAT:
        raise ValueError("not an hpcfault model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
    classes = _parse_classes(doc["classes"])
    d = int(doc["feature_count"])
    trees = []
    for t in doc["trees"]:
        feature = np.array(t["feature"], dtype=np.int64)
        n = len(feature)
        if any(len(t[k]) != n for k in ("threshold", "left", "right", "counts")):
            raise ValueError("tree node arrays differ in length")
        arrays = dict(
            feature=feature,
            threshold=np.array(t["threshold"], dtype=np.float64),
            left=np.array(t["left"], dtype=np.int64),
            right=np.array(t["right"], dtype=np.int64),
            counts=np.array(t["counts"], dtype=np.int64).reshape(n, len(classes)),
        )
        if (feature >= d).any():
            raise ValueError("tree references a feature beyond feature_count")
        trees.append(TreeModel(feature_count=d, classes=classes, **arrays))
    names = doc.get("feature_names")
    names = tuple(names) if names is not None else None
    if names is not None and len(names) != d:
        raise ValueError("feature_names length differs from feature_count")
    if doc["kind"] == "forest":
        params = ForestParams(**doc["params"])
        model: TreeModel | ForestModel = ForestModel(tuple(trees), params, classes, d)
    elif doc["kind"] == "tree":
        if len(trees) != 1:
            raise ValueError("a tree model holds exactly one tree")
        params = TreeParams(**doc["params"])
        model = trees[0]
    else:
        raise ValueError(f"unknown model kind {doc['kind']!r}")
    return ModelBundle(model, names, doc.get("metadata") or {}, params)


def loads(text: str) -> ModelBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"model file is not valid JSON: {exc}") from None
    return from_dict(doc)


def save_model(bundle: ModelBundle | TreeModel | ForestModel, path) -> None:
    Path(path).write_text(dumps(bundle), encoding="utf-8")


def load_model(path) -> ModelBundle:
    return loads(Path(path).read_text(encoding="utf-8"))
