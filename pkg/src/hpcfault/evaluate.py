"""Cross-validation, confusion matrices, F-scores and overhead timing."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classify import ForestParams, TreeParams, fit_model
from .features import WindowFeaturizer, WindowSpec
from .labeling import FaultSchedule, class_order, label_vectors

TIME_ORDERED = "time_ordered"
SHUFFLED = "shuffled"
AVERAGES = ("macro", "weighted")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray
    mode: str = TIME_ORDERED
    seed: int | None = None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FoldPlan)
            and (self.k, self.mode, self.seed) == (other.k, other.mode, other.seed)
            and np.array_equal(self.assignment, other.assignment)
        )

    def __len__(self) -> int:
        return len(self.assignment)

    def fold(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == i)


def plan_folds(n: int, k: int = 5, mode: str = TIME_ORDERED, seed: int | None = None) -> FoldPlan:
    """Split ``n`` items into ``k`` folds; the first ``n % k`` folds get one extra."""
    if k < 1:
        raise ValueError("k must be positive")
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} items")
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    blocks = np.repeat(np.arange(k), sizes)
    if mode == TIME_ORDERED:
        assignment = blocks
    elif mode == SHUFFLED:
        if seed is None:
            raise ValueError("shuffled folds need an explicit seed")
        perm = np.random.default_rng(seed).permutation(n)
        assignment = np.empty(n, dtype=np.int64)
        assignment[perm] = blocks
    else:
        raise ValueError(f"unknown fold mode {mode!r}")
    return FoldPlan(k, assignment.astype(np.int64), mode, seed)


def confusion_matrix(y_true: Sequence, y_pred: Sequence, class_set: Sequence) -> np.ndarray:
    """Entry ``(i, j)`` counts true class ``i`` predicted as ``j``."""
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    index = {c: i for i, c in enumerate(class_set)}
    m = np.zeros((len(class_set), len(class_set)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        m[index[t], index[p]] += 1
    return m


@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    fscore: float
    support: int


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def class_scores(confusion: np.ndarray, class_set: Sequence | None = None, average: str = "macro"):
    """Per-class precision/recall/F plus the overall F-score.

    0/0 counts as 0. The overall score averages F over classes with support,
    unweighted (``macro``) or support-weighted (``weighted``).
    Returns ``(per_class, overall)``.
    """
    if average not in AVERAGES:
        raise ValueError(f"average must be one of {AVERAGES}")
    cm = np.asarray(confusion)
    if class_set is None:
        class_set = range(cm.shape[0])
    per_class = {}
    for i, c in enumerate(class_set):
        tp = float(cm[i, i])
        p = _ratio(tp, float(cm[:, i].sum()))
        r = _ratio(tp, float(cm[i, :].sum()))
        per_class[c] = ClassScore(p, r, _ratio(2 * p * r, p + r), int(cm[i, :].sum()))
    present = [s for s in per_class.values() if s.support > 0]
    if not present:
        overall = 0.0
    elif average == "macro":
        overall = sum(s.fscore for s in present) / len(present)
    else:
        overall = sum(s.fscore * s.support for s in present) / sum(s.support for s in present)
    return per_class, overall


@dataclass(frozen=True)
class Timing:
    featurize_ms_per_window: float
    predict_ms_per_vector: float


@dataclass
class EvaluationReport:
    classes: tuple
    per_class: dict
    overall_fscore: float
    confusion: np.ndarray
    fold_reports: list = field(default_factory=list)
    timing: Timing | None = None
    settings: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        """Per-class rows for classes with support, in class order."""
        out = []
        for c in self.classes:
            s = self.per_class[c]
            if s.support == 0:
                continue
            out.append(
                {"class": str(c), "precision": s.precision, "recall": s.recall, "fscore": s.fscore, "support": s.support}
            )
        return out

    def to_table(self) -> str:
        lines = [f"{'class':<10} {'precision':>9} {'recall':>7} {'fscore':>7} {'support':>8}"]
        for r in self.rows():
            lines.append(f"{r['class']:<10} {r['precision']:>9.4f} {r['recall']:>7.4f} {r['fscore']:>7.4f} {r['support']:>8d}")
        lines.append(f"{'overall':<10} {'':>9} {'':>7} {self.overall_fscore:>7.4f} {int(self.confusion.sum()):>8d}")
        return "\n".join(lines)

    def per_class_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["class", "precision", "recall", "fscore", "support"], lineterminator="\n")
        w.writeheader()
        for r in self.rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        out = {
            "settings": self.settings,
            "classes": [str(c) for c in self.classes],
            "overall_fscore": self.overall_fscore,
            "per_class": {r["class"]: {k: v for k, v in r.items() if k != "class"} for r in self.rows()},
            "confusion": self.confusion.tolist(),
            "folds": self.fold_reports,
        }
        if self.timing is not None:
            out["timing"] = {
                "featurize_ms_per_window": self.timing.featurize_ms_per_window,
                "predict_ms_per_vector": self.timing.predict_ms_per_vector,
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def cross_validate(
    vectors: Sequence,
    params: ForestParams | TreeParams,
    plan: FoldPlan | None = None,
    labeling: str | None = None,
    exclude_ambiguous: bool = False,
    *,
    schedule: FaultSchedule | None = None,
    window_length: int | None = None,
    average: str = "macro",
) -> EvaluationReport:
    """k-fold evaluation; confusion counts are pooled over folds before scoring.

    ``labeling`` relabels the vectors from ``schedule`` first (vectors then
    need not carry labels). With ``exclude_ambiguous`` the ambiguous vectors
    leave both training and test sets; fold membership of the rest is kept.
    """
    vectors = list(vectors)
    if plan is None:
        plan = plan_folds(len(vectors))
    if len(plan) != len(vectors):
        raise ValueError(f"fold plan covers {len(plan)} items but {len(vectors)} vectors were given")
    if plan.k < 2:
        raise ValueError("cross-validation needs at least two folds")
    if labeling is not None:
        if schedule is None or window_length is None:
            raise ValueError("relabeling needs a schedule and the window length")
        vectors = list(label_vectors(vectors, schedule, labeling, window_length))
    if any(v.label is None for v in vectors):
        raise ValueError("every vector needs a label")
    assignment = plan.assignment
    if exclude_ambiguous:
        keep = np.array([not v.ambiguous for v in vectors], dtype=bool)
        vectors = [v for v, k in zip(vectors, keep) if k]
        assignment = assignment[keep]
    if not vectors:
        raise ValueError("no vectors left to evaluate")
    X = np.stack([v.values for v in vectors])
    y = [v.label for v in vectors]
    classes = class_order(y)
    index = {c: i for i, c in enumerate(classes)}
    yi = np.array([index[c] for c in y])

    total = np.zeros((len(classes), len(classes)), dtype=np.int64)
    folds = []
    for f in range(plan.k):
        test = assignment == f
        train = ~test
        if not test.any():
            continue
        if not train.any():
            raise ValueError(f"fold {f} leaves no training data")
        ytr = [y[i] for i in np.flatnonzero(train)]
        model = fit_model(X[train], ytr, params, classes=classes)
        pred = model.predict_indices(X[test])
        cm = np.zeros_like(total)
        np.add.at(cm, (yi[test], pred), 1)
        total += cm
        _, fold_f = class_scores(cm, classes, average)
        folds.append({"fold": f, "n_train": int(train.sum()), "n_test": int(test.sum()), "overall_fscore": fold_f, "confusion": cm.tolist()})
    per_class, overall = class_scores(total, classes, average)
    settings = {
        "k": plan.k,
        "mode": plan.mode,
        "seed": plan.seed,
        "labeling": labeling,
        "exclude_ambiguous": exclude_ambiguous,
        "average": average,
        "n_vectors": len(vectors),
    }
    return EvaluationReport(tuple(classes), per_class, overall, total, folds, None, settings)


def measure_overhead(trace, spec: WindowSpec, model, repeats: int = 20, window_end: int | None = None) -> Timing:
    """Mean wall-clock cost of one window's featurization and one prediction.

    Featurization builds every core's vector for one window on one thread.
    """
    if repeats < 1:
        raise ValueError("repeats must be positive")
    if len(trace) < spec.length_seconds:
        raise ValueError("trace is shorter than one window")
    end = trace.start + spec.length_seconds if window_end is None else window_end
    hi = end - trace.start
    lo = hi - spec.length_seconds
    if lo < 0 or hi > len(trace):
        raise ValueError("window lies outside the trace")
    fz = WindowFeaturizer(trace.node_names, trace.core_names)
    node_block, core_block = trace.node_values[lo:hi], trace.core_values[lo:hi]
    mat = fz.featurize(node_block, core_block)
    t0 = time.perf_counter()
    for _ in range(repeats):
        mat = fz.featurize(node_block, core_block)
    feat_ms = (time.perf_counter() - t0) * 1000.0 / repeats

    d = model.feature_count
    x = (mat[0][:d] if mat.shape[1] >= d else np.resize(mat[0], d)).tolist()
    model.predict_index(x)
    t0 = time.perf_counter()
    for _ in range(repeats):
        model.predict_index(x)
    pred_ms = (time.perf_counter() - t0) * 1000.0 / repeats
    return Timing(feat_ms, pred_ms)
