"""Sliding-window statistical features.

Every window covers ``[window_end - length, window_end)`` and yields one
vector per core: 11 statistics for each node-level metric and each metric of
that core (raw metrics and their ``.deriv`` companions alike).
"""

from __future__ import annotations

import csv
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .ingest import CORE, NODE, Trace, metric_id
from .labeling import FaultClass, parse_bool

STATISTICS = ("mean", "std", "median", "min", "max", "skewness", "kurtosis", "p5", "p25", "p75", "p95")
PERCENTILES = (0.05, 0.25, 0.5, 0.75, 0.95)

# Below this std/scale ratio a window is treated as constant for the shape
# statistics; rounding noise would otherwise produce arbitrary skew/kurtosis.
DEGENERATE_RTOL = 1e-13


@dataclass(frozen=True)
class WindowSpec:
    length_seconds: int = 60
    step_seconds: int = 10

    def __post_init__(self):
        if self.length_seconds <= 0 or self.step_seconds <= 0:
            raise ValueError("window length and step must be positive")
        if self.step_seconds > self.length_seconds:
            raise ValueError("window step must not exceed its length")


@dataclass(frozen=True)
class StatisticSet:
    mean: float
    std: float
    median: float
    min: float
    max: float
    skewness: float
    kurtosis: float
    p5: float
    p25: float
    p75: float
    p95: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, s) for s in STATISTICS)


def statistics_matrix(block: np.ndarray) -> np.ndarray:
    """Statistics of every column of an ``(n, m)`` block, as an ``(m, 11)`` array.

    Population moments; skewness is m3/m2^1.5 and kurtosis is the excess
    m4/m2^2 - 3, both 0 for a (numerically) constant column. Percentiles
    interpolate linearly at position p*(n-1) of the sorted column.
    """
    block = np.asarray(block, dtype=np.float64)
    n, m = block.shape
    if n == 0:
        raise ValueError("statistics need at least one value")
    s = np.sort(block, axis=0)
    lo_v, hi_v = s[0], s[-1]
    mean = block.mean(axis=0)
    d = block - mean
    # moments of d / max|d| so that powers neither underflow nor overflow
    dmax = np.abs(d).max(axis=0)
    u = d / np.where(dmax > 0, dmax, 1.0)
    r2 = (u * u).mean(axis=0)
    std = dmax * np.sqrt(r2)

    const = lo_v == hi_v
    scale = np.maximum(np.abs(lo_v), np.abs(hi_v))
    flat = const | (std <= DEGENERATE_RTOL * scale)
    z = u / np.where(flat, 1.0, np.sqrt(r2))
    z2 = z * z
    skew = np.where(flat, 0.0, (z2 * z).mean(axis=0))
    kurt = np.where(flat, 0.0, (z2 * z2).mean(axis=0) - 3.0)
    mean = np.where(const, lo_v, np.clip(mean, lo_v, hi_v))
    std = np.where(const, 0.0, std)

    pct = []
    for p in PERCENTILES:
        pos = p * (n - 1)
        i = int(math.floor(pos))
        j = min(i + 1, n - 1)
        frac = pos - i
        a, b = s[i], s[j]
        pct.append(np.clip(a + frac * (b - a), a, b))
    p5, p25, med, p75, p95 = pct

    out = np.empty((m, len(STATISTICS)))
    for k, col in enumerate((mean, std, med, lo_v, hi_v, skew, kurt, p5, p25, p75, p95)):
        out[:, k] = col
    return out


def compute_statistics(values: Sequence[float]) -> StatisticSet:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("statistics need at least one value")
    if not np.isfinite(arr).all():
        raise ValueError("statistics need finite values")
    return StatisticSet(*statistics_matrix(arr[:, None])[0].tolist())


@dataclass(frozen=True, eq=False)
class FeatureVector:
    core_id: int
    window_end: int
    names: tuple[str, ...]
    values: np.ndarray
    label: FaultClass | None = None
    ambiguous: bool = False
    resource: str = CORE

    @property
    def features(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.core_id == other.core_id
            and self.window_end == other.window_end
            and self.names == other.names
            and np.array_equal(self.values, other.values)
            and self.label == other.label
            and self.ambiguous == other.ambiguous
            and self.resource == other.resource
        )


def feature_name(mid: str, stat: str) -> str:
    return f"{mid}|{stat}"


def split_feature_name(name: str) -> tuple[str, str]:
    mid, sep, stat = name.rpartition("|")
    if not sep or stat not in STATISTICS:
        raise ValueError(f"not a feature name: {name!r}")
    return mid, stat


@dataclass
class WindowFeaturizer:
    """Turns one window of post-processed values into per-core vectors.

    Features are ordered lexicographically by scoped metric id, then by the
    fixed statistic order. The same object serves batch and streaming use so
    both produce bit-identical vectors.
    """

    node_names: tuple[str, ...]
    core_names: tuple[str, ...]
    n_jobs: int = 1
    feature_names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        self.node_names = tuple(self.node_names)
        self.core_names = tuple(self.core_names)
        ids = [(metric_id(NODE, n), 0, i) for i, n in enumerate(self.node_names)]
        ids += [(metric_id(CORE, n), 1, i) for i, n in enumerate(self.core_names)]
        ids.sort()
        self._order = [(src, i) for _, src, i in ids]
        self.feature_names = tuple(feature_name(mid, s) for mid, _, _ in ids for s in STATISTICS)

    def _stats(self, block: np.ndarray) -> np.ndarray:
        if self.n_jobs <= 1 or block.shape[1] < 2 * self.n_jobs:
            return statistics_matrix(block)
        # per-metric statistics are independent; split columns across threads
        chunks = np.array_split(np.arange(block.shape[1]), self.n_jobs)
        with ThreadPoolExecutor(self.n_jobs) as pool:
            parts = list(pool.map(lambda idx: statistics_matrix(np.ascontiguousarray(block[:, idx])), chunks))
        return np.concatenate(parts, axis=0)

    def featurize(self, node_block: np.ndarray, core_block: np.ndarray) -> np.ndarray:
        """``(n, Mn)`` and ``(n, C, Mc)`` windows -> ``(C, features)`` matrix."""
        n, C, Mc = core_block.shape
        node_stats = self._stats(np.ascontiguousarray(node_block))
        core_stats = self._stats(np.ascontiguousarray(core_block).reshape(n, C * Mc)).reshape(C, Mc, -1)
        out = np.empty((C, len(self._order), len(STATISTICS)))
        node_pos = [k for k, (src, _) in enumerate(self._order) if src == 0]
        core_pos = [k for k, (src, _) in enumerate(self._order) if src == 1]
        node_idx = [i for src, i in self._order if src == 0]
        core_idx = [i for src, i in self._order if src == 1]
        out[:, node_pos, :] = node_stats[node_idx][None, :, :]
        out[:, core_pos, :] = core_stats[:, core_idx, :]
        return out.reshape(C, -1)


def _window_ends(trace: Trace, spec: WindowSpec) -> range:
    first = trace.start + spec.length_seconds
    last = trace.start + len(trace)
    return range(first, last + 1, spec.step_seconds)


def build_feature_vector(trace: Trace, core_id: int, window: tuple[int, int], spec: WindowSpec = WindowSpec()) -> FeatureVector:
    start, end = window
    if end - start != spec.length_seconds:
        raise ValueError(f"window length {end - start} differs from spec length {spec.length_seconds}")
    if start < trace.start or end > trace.start + len(trace):
        raise ValueError(f"window [{start}, {end}) is not inside the trace")
    if core_id not in trace.cores:
        raise ValueError(f"core {core_id} is not in the trace")
    fz = WindowFeaturizer(trace.node_names, trace.core_names)
    ci = trace.cores.index(core_id)
    lo, hi = start - trace.start, end - trace.start
    vals = fz.featurize(trace.node_values[lo:hi], trace.core_values[lo:hi, ci : ci + 1])[0]
    return FeatureVector(core_id, end, fz.feature_names, vals)


def stream_feature_vectors(
    trace: Trace, spec: WindowSpec = WindowSpec(), cores: Iterable[int] | None = None, n_jobs: int = 1
) -> Iterator[FeatureVector]:
    """Unlabeled vectors in ``(window_end, core_id)`` order."""
    if len(trace) < spec.length_seconds:
        raise ValueError(f"trace has {len(trace)} samples, fewer than the {spec.length_seconds}-second window")
    cores = sorted(trace.cores if cores is None else set(cores))
    if not cores:
        raise ValueError("no cores to featurize")
    missing = [c for c in cores if c not in trace.cores]
    if missing:
        raise ValueError(f"cores {missing} are not in the trace")
    cidx = [trace.cores.index(c) for c in cores]
    fz = WindowFeaturizer(trace.node_names, trace.core_names, n_jobs=n_jobs)
    for end in _window_ends(trace, spec):
        hi = end - trace.start
        lo = hi - spec.length_seconds
        mat = fz.featurize(trace.node_values[lo:hi], trace.core_values[lo:hi][:, cidx])
        for row, c in zip(mat, cores):
            yield FeatureVector(c, end, fz.feature_names, row)


class RollingWindow:
    """Bounded buffer of the last ``length`` post-processed samples."""

    def __init__(self, featurizer: WindowFeaturizer, cores: Sequence[int], spec: WindowSpec = WindowSpec()):
        self.featurizer = featurizer
        self.cores = tuple(cores)
        self.spec = spec
        self._node: deque = deque(maxlen=spec.length_seconds)
        self._core: deque = deque(maxlen=spec.length_seconds)
        self._first_t: int | None = None

    def push(self, t: int, node_row: np.ndarray, core_rows: np.ndarray) -> list[FeatureVector]:
        """Add the sample at second ``t``; returns vectors when a window closes."""
        if self._first_t is None:
            self._first_t = t
        self._node.append(node_row)
        self._core.append(core_rows)
        end = t + 1
        elapsed = end - self._first_t
        if elapsed < self.spec.length_seconds or (elapsed - self.spec.length_seconds) % self.spec.step_seconds:
            return []
        mat = self.featurizer.featurize(np.stack(self._node), np.stack(self._core))
        names = self.featurizer.feature_names
        return [FeatureVector(c, end, names, row) for row, c in zip(mat, self.cores)]


def sample_one_core_per_window(vectors: Iterable[FeatureVector], rng_seed: int) -> list[FeatureVector]:
    """Keep one uniformly chosen vector per ``window_end``."""
    rng = np.random.default_rng(rng_seed)
    out: list[FeatureVector] = []
    group: list[FeatureVector] = []
    for v in vectors:
        if group and v.window_end != group[0].window_end:
            out.append(group[int(rng.integers(len(group)))])
            group = []
        group.append(v)
    if group:
        out.append(group[int(rng.integers(len(group)))])
    return out


# -- feature-vector file ---------------------------------------------------

FEATURE_FILE_PREFIX = ("window_end", "core", "label", "ambiguous")


class FeatureWriter:
    """Writes vectors row by row; the header is fixed by the first vector."""

    def __init__(self, stream):
        self._w = csv.writer(stream, lineterminator="\n")
        self._names: tuple[str, ...] | None = None
        self.count = 0
        self.ambiguous = 0

    def write(self, v: FeatureVector) -> None:
        if self._names is None:
            self._names = v.names
            self._w.writerow(list(FEATURE_FILE_PREFIX) + list(v.names))
        elif v.names != self._names:
            raise ValueError("feature ordering changed between vectors")
        label = "" if v.label is None else v.label.value
        self._w.writerow([v.window_end, v.core_id, label, int(v.ambiguous)] + [repr(x) for x in v.values.tolist()])
        self.count += 1
        self.ambiguous += bool(v.ambiguous)


def write_feature_vectors(vectors: Iterable[FeatureVector], stream) -> FeatureWriter:
    w = FeatureWriter(stream)
    for v in vectors:
        w.write(v)
    return w


def read_feature_vectors(source) -> list[FeatureVector]:
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return []
    if tuple(header[:4]) != FEATURE_FILE_PREFIX:
        raise ValueError(f"feature file header must start with {','.join(FEATURE_FILE_PREFIX)}")
    names = tuple(header[4:])
    for n in names:
        split_feature_name(n)
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"feature file line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            label = FaultClass.parse(row[2]) if row[2] else None
            vals = np.array([float(x) for x in row[4:]])
            if not np.isfinite(vals).all():
                raise ValueError("non-finite feature value")
            out.append(FeatureVector(int(row[1]), int(row[0]), names, vals, label, parse_bool(row[3])))
        except ValueError as exc:
            raise ValueError(f"feature file line {lineno}: {exc}") from None
    return out


def vectors_to_matrix(vectors: Sequence[FeatureVector]) -> tuple[np.ndarray, list]:
    if not vectors:
        return np.zeros((0, 0)), []
    X = np.stack([v.values for v in vectors])
    return X, [v.label for v in vectors]
