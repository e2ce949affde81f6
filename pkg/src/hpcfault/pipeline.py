"""End-to-end wiring: raw trace -> labeled vectors, and streaming detection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .classify import ModelBundle
from .features import FeatureVector, RollingWindow, WindowFeaturizer, WindowSpec, split_feature_name, stream_feature_vectors
from .ingest import (
    ALLOCATED,
    DERIV_SUFFIX,
    NODE,
    AllocationSchedule,
    MetricSample,
    PostProcessConfig,
    StreamingPostProcessor,
    Trace,
    postprocess,
    split_metric_id,
)
from .labeling import FaultSchedule, label_vectors


@dataclass
class FeaturizeResult:
    vectors: Iterator[FeatureVector]
    removed: set[str]
    processed: Trace


def featurize(
    trace: Trace,
    config: PostProcessConfig = PostProcessConfig(),
    allocation: AllocationSchedule = AllocationSchedule(),
    spec: WindowSpec = WindowSpec(),
    schedule: FaultSchedule | None = None,
    labeling: str = "mode",
    cores: Iterable[int] | None = None,
) -> FeaturizeResult:
    """Post-process ``trace`` and stream its (optionally labeled) vectors."""
    processed, removed = postprocess(trace, config, allocation)
    vectors = stream_feature_vectors(processed, spec, cores)
    if schedule is not None:
        vectors = label_vectors(vectors, schedule, labeling, spec.length_seconds)
    return FeaturizeResult(vectors, removed, processed)


def pipeline_metadata(spec: WindowSpec, config: PostProcessConfig, labeling: str, removed: Iterable[str] = ()) -> dict:
    return {
        "window": {"length_seconds": spec.length_seconds, "step_seconds": spec.step_seconds},
        "counter_metrics": sorted(config.counter_metrics),
        "labeling": labeling,
        "removed_constant_metrics": sorted(removed),
    }


def raw_metrics_for(feature_names: Iterable[str]) -> tuple[list[str], list[str]]:
    """Raw node and core metric names a feature layout is computed from."""
    node, core = set(), set()
    for fname in feature_names:
        mid, _ = split_feature_name(fname)
        scope, name = split_metric_id(mid)
        if name.endswith(DERIV_SUFFIX):
            name = name[: -len(DERIV_SUFFIX)]
        if name == ALLOCATED:
            continue
        (node if scope == NODE else core).add(name)
    return sorted(node), sorted(core)


class StreamClassifier:
    """Rolling-window fault detection over a sample stream.

    Post-processing is causal, so the vectors match those of a batch run
    over the same samples that starts at the same first timestamp.
    """

    def __init__(self, bundle: ModelBundle, cores: Iterable[int], allocation: AllocationSchedule = AllocationSchedule()):
        if bundle.feature_names is None:
            raise ValueError("model file carries no feature names; cannot build stream features")
        meta = bundle.metadata or {}
        win = meta.get("window", {})
        self.spec = WindowSpec(int(win.get("length_seconds", 60)), int(win.get("step_seconds", 10)))
        self.model = bundle.model
        node_raw, core_raw = raw_metrics_for(bundle.feature_names)
        self.cores = tuple(sorted(cores))
        self.post = StreamingPostProcessor(node_raw, core_raw, self.cores, meta.get("counter_metrics", ()), allocation)
        fz = WindowFeaturizer(self.post.out_node_names, self.post.out_core_names)
        if fz.feature_names != tuple(bundle.feature_names):
            raise ValueError("stream metrics do not reproduce the model's feature layout")
        self.window = RollingWindow(fz, self.cores, self.spec)

    def push(self, sample: MetricSample) -> list[tuple[int, int, object]]:
        node_row, core_rows = self.post.push(sample)
        out = []
        for v in self.window.push(sample.timestamp, node_row, core_rows):
            out.append((v.window_end, v.core_id, self.model.classes[self.model.predict_index(v.values.tolist())]))
        return out


def select_features(vectors: Iterable[FeatureVector], names: tuple[str, ...]) -> np.ndarray:
    """Matrix of ``vectors`` restricted to (and ordered by) ``names``."""
    vectors = list(vectors)
    if not vectors:
        return np.zeros((0, len(names)))
    have = vectors[0].names
    if have == names:
        return np.stack([v.values for v in vectors])
    pos = {n: i for i, n in enumerate(have)}
    missing = [n for n in names if n not in pos]
    if missing:
        raise ValueError(f"vectors lack {len(missing)} model features, e.g. {missing[0]!r}")
    idx = [pos[n] for n in names]
    return np.stack([v.values[idx] for v in vectors])
