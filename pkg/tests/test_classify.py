import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpcfault.classify import (
    ForestModel,
    ForestParams,
    ModelBundle,
    TreeModel,
    TreeParams,
    classifier_array,
    dumps,
    feature_importances,
    loads,
    predict_forest,
    predict_tree,
    train_forest,
    train_tree,
)
from hpcfault.classify.cart import LEAF
from hpcfault.features import FeatureVector
from hpcfault.labeling import FaultClass


def gini(labels):
    labels = list(labels)
    if not labels:
        return 0.0
    _, c = np.unique(labels, return_counts=True)
    p = c / c.sum()
    return 1.0 - float(p @ p)


def all_splits(X, y):
    """Every (feature, midpoint) split with its weighted child Gini."""
    out = []
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f].tolist()))
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2
            left = [yy for xx, yy in zip(X[:, f], y) if xx <= thr]
            right = [yy for xx, yy in zip(X[:, f], y) if xx > thr]
            w = (len(left) * gini(left) + len(right) * gini(right)) / len(y)
            out.append((w, f, thr, left, right))
    return out


def consistent_dataset(rng, n, d, n_classes):
    X = rng.integers(0, 6, size=(n, d)).astype(float)
    X = np.unique(X, axis=0)
    y = [f"c{int(v)}" for v in rng.integers(0, n_classes, len(X))]
    return X, y


# -- single tree -----------------------------------------------------------


def test_pure_labels_give_one_leaf():
    m = train_tree(np.random.default_rng(0).normal(size=(10, 3)), ["A"] * 10)
    assert m.node_count == 1
    assert predict_tree(m, [5.0, -1.0, 0.0])[0] == "A"


def test_one_dimensional_threshold():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = ["A", "A", "B", "B"]
    m = train_tree(X, y)
    best = min(all_splits(X, y))
    assert best[2] == 2.5 and best[0] == 0.0
    assert m.feature[0] == 0 and m.threshold[0] == 2.5
    assert m.predict(X) == y
    for x, lab in zip(X, y):
        assert predict_tree(m, x)[0] == lab
    # equality goes left
    assert predict_tree(m, [2.5])[0] == "A"
    assert feature_importances(m).tolist() == [1.0]


def test_xor_needs_depth_two():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = ["A", "B", "B", "A"]
    # no single split separates XOR: every stump leaves an impure child
    for _, _, _, left, right in all_splits(X, y):
        assert len(set(left)) > 1 or len(set(right)) > 1
    m = train_tree(X, y)
    assert m.depth >= 2
    assert m.predict(X) == y


def test_stump_cannot_fit_xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = ["A", "B", "B", "A"]
    m = train_tree(X, y, TreeParams(max_depth=1))
    assert m.depth <= 1
    assert m.predict(X) != y


def test_distribution_and_ties():
    # leaf with one A and one B: class order breaks the tie
    m = train_tree(np.array([[0.0], [0.0]]), ["B", "A"])
    cls, dist = predict_tree(m, [0.0])
    assert cls == "A" and dist.tolist() == [0.5, 0.5]
    assert m.node_count == 1  # no feature varies


def test_min_samples_split_and_depth():
    rng = np.random.default_rng(3)
    X, y = consistent_dataset(rng, 200, 3, 3)
    shallow = train_tree(X, y, TreeParams(max_depth=2))
    assert shallow.depth <= 2
    big = train_tree(X, y, TreeParams(min_samples_split=40))
    sizes = big.counts.sum(axis=1)
    internal = big.feature != LEAF
    assert (sizes[internal] >= 40).all()


def test_tree_errors():
    with pytest.raises(ValueError):
        train_tree(np.zeros((3, 2)), ["A", "B"])
    with pytest.raises(ValueError):
        train_tree(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        train_tree(np.array([[np.nan]]), ["A"])
    with pytest.raises(ValueError):
        TreeParams(min_samples_split=1)
    m = train_tree(np.array([[1.0], [2.0]]), ["A", "B"])
    with pytest.raises(ValueError):
        predict_tree(m, [1.0, 2.0])


@pytest.mark.parametrize("seed", range(10))
def test_unlimited_tree_fits_consistent_data(seed):
    rng = np.random.default_rng(seed)
    X, y = consistent_dataset(rng, int(rng.integers(5, 150)), int(rng.integers(1, 6)), int(rng.integers(2, 5)))
    m = train_tree(X, y)
    assert m.predict(X) == y


def _check_structure(m: TreeModel):
    for i in range(m.node_count):
        if m.feature[i] == LEAF:
            continue
        l, r = m.left[i], m.right[i]
        assert l != LEAF and r != LEAF
        assert (m.counts[l] + m.counts[r] == m.counts[i]).all()
        # weighted child impurity never exceeds the parent's
        c, cl, cr = m.counts[i], m.counts[l], m.counts[r]
        g = lambda v: 1 - float((v / v.sum()) @ (v / v.sum()))
        assert (cl.sum() * g(cl) + cr.sum() * g(cr)) / c.sum() <= g(c) + 1e-12


@given(st.integers(0, 10_000), st.integers(2, 60), st.integers(1, 4))
def test_tree_structure_invariants(seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)).round(1)
    y = list(rng.integers(0, 3, n))
    m = train_tree(X, y)
    _check_structure(m)
    imp = feature_importances(m)
    assert imp.sum() == pytest.approx(1.0) or imp.sum() == 0.0
    assert (imp >= 0).all()


def test_greedy_root_split_is_optimal():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 3)).round(2)
    y = list(rng.integers(0, 3, 40))
    m = train_tree(X, y)
    best = min(w for w, *_ in all_splits(X, y))
    f, thr = m.feature[0], m.threshold[0]
    left = [yy for xx, yy in zip(X[:, f], y) if xx <= thr]
    right = [yy for xx, yy in zip(X[:, f], y) if xx > thr]
    assert (len(left) * gini(left) + len(right) * gini(right)) / len(y) == pytest.approx(best, abs=1e-12)


def test_importance_all_on_informative_feature():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=50)
    X = np.column_stack([x0, np.full(50, 3.0)])
    y = ["A" if v > 0 else "B" for v in x0]
    assert feature_importances(train_tree(X, y)).tolist() == [1.0, 0.0]
    assert feature_importances(train_tree(X, ["A"] * 50)).tolist() == [0.0, 0.0]


@given(st.integers(0, 10_000), st.sampled_from([0.25, 2.0, 1024.0]))
def test_rescaling_keeps_predictions(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3))
    y = list(rng.integers(0, 3, 40))
    probes = rng.normal(size=(200, 3))
    a = train_tree(X, y).predict(probes)
    b = train_tree(c * X, y).predict(c * probes)
    assert a == b


def test_rescaling_by_arbitrary_constant_keeps_training_predictions():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 4))
    y = list(rng.integers(0, 4, 60))
    for c in (0.37, 3.3, 1e5):
        assert train_tree(c * X, y).predict(c * X) == train_tree(X, y).predict(X)


# -- forest ----------------------------------------------------------------


def test_degenerate_forest_equals_tree():
    rng = np.random.default_rng(2)
    X, y = consistent_dataset(rng, 120, 4, 3)
    probes = rng.integers(0, 6, size=(500, 4)).astype(float)
    tree = train_tree(X, y)
    for fps in (None, 4):
        forest = train_forest(X, y, ForestParams(n_trees=1, bootstrap=False, features_per_split=fps, seed=5))
        assert forest.predict(probes) == tree.predict(probes)
        assert [predict_forest(forest, p) for p in probes[:50]] == [predict_tree(tree, p)[0] for p in probes[:50]]


def test_forest_is_byte_deterministic():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(80, 6)), list(rng.integers(0, 3, 80))
    p = ForestParams(n_trees=7, seed=11)
    assert dumps(train_forest(X, y, p)) == dumps(train_forest(X, y, p))
    assert dumps(train_forest(X, y, p)) == dumps(train_forest(X, y, p, n_jobs=3))
    assert dumps(train_forest(X, y, p)) != dumps(train_forest(X, y, ForestParams(n_trees=7, seed=12)))


def test_separable_blobs_fit_perfectly():
    rng = np.random.default_rng(9)
    centers = np.array([[0.0, 0.0, 0.0], [6.0, 6.0, 6.0]])
    X = np.vstack([c + rng.uniform(-1, 1, size=(100, 3)) for c in centers])
    y = ["A"] * 100 + ["B"] * 100
    # nearest-centroid oracle confirms the classes are separable
    dist = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
    assert ["AB"[i] for i in dist.argmin(axis=1)] == y
    f = train_forest(X, y, ForestParams(n_trees=30, seed=0))
    assert f.predict(X) == y


def _leaf_tree(cls_index, classes):
    counts = np.zeros((1, len(classes)), dtype=np.int64)
    counts[0, cls_index] = 1
    a = np.array([LEAF])
    return TreeModel(a, np.zeros(1), a, a, counts, 1, classes)


def test_vote_ties_follow_class_order():
    classes = ("A", "B")
    f = ForestModel((_leaf_tree(1, classes), _leaf_tree(0, classes)), ForestParams(n_trees=2), classes, 1)
    assert predict_forest(f, [0.0]) == "A"
    agree = ForestModel((_leaf_tree(1, classes),) * 3, ForestParams(n_trees=3), classes, 1)
    assert predict_forest(agree, [0.0]) == "B"


def test_forest_order_invariance_and_importances():
    rng = np.random.default_rng(6)
    X, y = rng.normal(size=(100, 5)), list(rng.integers(0, 4, 100))
    f = train_forest(X, y, ForestParams(n_trees=9, seed=3))
    rev = ForestModel(tuple(reversed(f.trees)), f.params, f.classes, f.feature_count)
    probes = rng.normal(size=(300, 5))
    assert f.predict(probes) == rev.predict(probes)
    imp = feature_importances(f)
    np.testing.assert_allclose(imp, np.mean([feature_importances(t) for t in f.trees], axis=0))
    assert imp.sum() == pytest.approx(1.0)


def test_forest_params_validation():
    with pytest.raises(ValueError):
        ForestParams(n_trees=0)
    with pytest.raises(ValueError):
        ForestParams(features_per_split=0)
    assert ForestParams().resolve_features(10) == 4
    with pytest.raises(ValueError):
        ForestParams(features_per_split=11).resolve_features(10)


def test_mismatched_trees_rejected():
    with pytest.raises(ValueError):
        ForestModel((_leaf_tree(0, ("A",)), _leaf_tree(0, ("A", "B"))), ForestParams(), ("A",), 1)


# -- serialization ---------------------------------------------------------


def test_round_trip_keeps_predictions():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(150, 6))
    y = [list(FaultClass)[i] for i in rng.integers(0, 9, 150)]
    probes = rng.normal(size=(10_000, 6))
    for model in (train_tree(X, y), train_forest(X, y, ForestParams(n_trees=5, seed=1))):
        text = dumps(ModelBundle(model, tuple(f"m{i}|mean" for i in range(6)), {"k": 1}))
        back = loads(text)
        assert back.model.predict(probes) == model.predict(probes)
        assert back.metadata == {"k": 1} and back.feature_names[0] == "m0|mean"
        assert dumps(ModelBundle(back.model, back.feature_names, back.metadata)) == text


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.update(format="other"), "not an hpcfault"),
        (lambda d: d.update(format_version=99), "version"),
        (lambda d: d["trees"][0]["feature"].append(0), "length"),
        (lambda d: d.update(feature_count=0), "beyond"),
    ],
)
def test_bad_model_files(mutate, fragment):
    import json

    m = train_tree(np.array([[1.0], [2.0]]), ["A", "B"])
    doc = json.loads(dumps(m))
    mutate(doc)
    with pytest.raises(ValueError, match=fragment):
        loads(json.dumps(doc))
    with pytest.raises(ValueError, match="JSON"):
        loads("{")


# -- classifier array ------------------------------------------------------


def _vectors(resource, names, rng, n=60):
    out = []
    for i in range(n):
        lab = FaultClass.LEAK if i % 2 else FaultClass.HEALTHY
        vals = rng.normal(size=len(names)) + (5.0 if lab is FaultClass.LEAK else 0.0)
        out.append(FeatureVector(i % 4, 60 + 10 * i, names, vals, lab, resource=resource))
    return out


def test_array_single_resource_matches_forest():
    rng = np.random.default_rng(0)
    vs = _vectors("core", ("a|mean", "b|mean"), rng)
    p = ForestParams(n_trees=5, seed=2)
    arr = classifier_array({"core": p}).fit(vs)
    forest = train_forest(np.stack([v.values for v in vs]), [v.label for v in vs], p)
    assert [arr.predict(v) for v in vs] == forest.predict(np.stack([v.values for v in vs]))


def test_array_dispatches_by_resource():
    rng = np.random.default_rng(1)
    cpu = _vectors("core", ("a|mean",), rng)
    gpu = _vectors("gpu", ("g|mean", "h|mean"), rng)
    arr = classifier_array({"core": TreeParams(), "gpu": TreeParams()}).fit(cpu + gpu)
    assert arr.models["core"].feature_count == 1 and arr.models["gpu"].feature_count == 2
    assert all(isinstance(arr.predict(v), FaultClass) for v in cpu + gpu)
    with pytest.raises(KeyError):
        arr.predict(FeatureVector(0, 60, ("a|mean",), np.zeros(1), resource="nic"))
    # reordered features are looked up by name
    v = gpu[1]
    swapped = FeatureVector(v.core_id, v.window_end, v.names[::-1], v.values[::-1], resource="gpu")
    assert arr.predict(swapped) == arr.predict(v)


def test_array_needs_resource_types():
    with pytest.raises(ValueError):
        classifier_array({})
    arr = classifier_array({"core": TreeParams()})
    with pytest.raises(KeyError, match="not trained"):
        arr.predict(FeatureVector(0, 60, ("a|mean",), np.zeros(1)))


def test_exhaustive_small_trees_fit():
    # every labeling of 4 distinct points is learnable by an unlimited tree
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    for labels in itertools.product("AB", repeat=4):
        assert train_tree(X, list(labels)).predict(X) == list(labels)
