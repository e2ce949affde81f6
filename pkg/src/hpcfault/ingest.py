"""Metric trace parsing and post-processing.

A trace is held column-wise: a ``(T, node metrics)`` array and a
``(T, cores, core metrics)`` array over consecutive one-second timestamps.
``MetricSample`` is the row view of the same data.

CSV dialect: a ``time`` column (integer seconds), an optional ``core``
column, and one numeric column per metric. In a file with a ``core``
column, metric columns prefixed ``node:`` are node-level (their value must
agree across the core rows of a timestamp) and the rest are per-core.
In a file without a ``core`` column every metric is node-level.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

NODE = "node"
CORE = "core"
NODE_PREFIX = "node:"
DERIV_SUFFIX = ".deriv"
ALLOCATED = "allocated"


class TraceFormatError(ValueError):
    """Raised for malformed trace input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def metric_id(scope: str, name: str) -> str:
    """Scope-qualified metric identifier, e.g. ``node:mem_used``."""
    return f"{scope}:{name}"


def split_metric_id(mid: str) -> tuple[str, str]:
    scope, _, name = mid.partition(":")
    if scope not in (NODE, CORE) or not name:
        raise ValueError(f"not a scoped metric id: {mid!r}")
    return scope, name


@dataclass(frozen=True)
class MetricSample:
    timestamp: int
    node_values: Mapping[str, float] = field(default_factory=dict)
    core_values: Mapping[tuple[int, str], float] = field(default_factory=dict)


@dataclass(frozen=True)
class TraceSchema:
    time_column: str = "time"
    core_column: str = "core"
    node_prefix: str = NODE_PREFIX


@dataclass(frozen=True, eq=False)
class Trace:
    times: np.ndarray
    node_names: tuple[str, ...]
    node_values: np.ndarray
    cores: tuple[int, ...] = ()
    core_names: tuple[str, ...] = ()
    core_values: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.int64)
        T = len(times)
        node_values = np.ascontiguousarray(np.asarray(self.node_values, dtype=np.float64).reshape(T, len(self.node_names)))
        if self.core_values is None:
            core_values = np.zeros((T, len(self.cores), len(self.core_names)))
        else:
            core_values = np.ascontiguousarray(np.asarray(self.core_values, dtype=np.float64))
        if core_values.shape != (T, len(self.cores), len(self.core_names)):
            raise ValueError(f"core_values shape {core_values.shape} does not match trace layout")
        if T > 1 and not np.all(np.diff(times) == 1):
            raise ValueError("trace timestamps must increase in steps of one second")
        if len(set(self.node_names)) != len(self.node_names) or len(set(self.core_names)) != len(self.core_names):
            raise ValueError("duplicate metric names within a scope")
        if len(set(self.cores)) != len(self.cores) or any(c < 0 for c in self.cores):
            raise ValueError("core ids must be distinct non-negative integers")
        if not (np.isfinite(node_values).all() and np.isfinite(core_values).all()):
            raise ValueError("trace contains non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "node_names", tuple(self.node_names))
        object.__setattr__(self, "node_values", node_values)
        object.__setattr__(self, "cores", tuple(int(c) for c in self.cores))
        object.__setattr__(self, "core_names", tuple(self.core_names))
        object.__setattr__(self, "core_values", core_values)

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.node_names == other.node_names
            and self.core_names == other.core_names
            and self.cores == other.cores
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.node_values, other.node_values)
            and np.array_equal(self.core_values, other.core_values)
        )

    @property
    def start(self) -> int:
        return int(self.times[0]) if len(self.times) else 0

    @property
    def metric_ids(self) -> list[str]:
        return [metric_id(NODE, n) for n in self.node_names] + [metric_id(CORE, n) for n in self.core_names]

    def node_column(self, name: str) -> np.ndarray:
        return self.node_values[:, self.node_names.index(name)]

    def core_column(self, core: int, name: str) -> np.ndarray:
        return self.core_values[:, self.cores.index(core), self.core_names.index(name)]

    def replace(self, **changes) -> Trace:
        fields = dict(
            times=self.times,
            node_names=self.node_names,
            node_values=self.node_values,
            cores=self.cores,
            core_names=self.core_names,
            core_values=self.core_values,
        )
        fields.update(changes)
        return Trace(**fields)

    def slice(self, start: int, end: int) -> Trace:
        """Sub-trace covering timestamps ``[start, end)``."""
        lo, hi = max(start - self.start, 0), max(end - self.start, 0)
        return self.replace(times=self.times[lo:hi], node_values=self.node_values[lo:hi], core_values=self.core_values[lo:hi])

    def samples(self) -> Iterator[MetricSample]:
        for i, t in enumerate(self.times):
            node = dict(zip(self.node_names, self.node_values[i].tolist()))
            per_core = {}
            for ci, c in enumerate(self.cores):
                for name, v in zip(self.core_names, self.core_values[i, ci].tolist()):
                    per_core[(c, name)] = v
            yield MetricSample(int(t), node, per_core)

    @classmethod
    def from_samples(cls, samples: Iterable[MetricSample]) -> Trace:
        samples = list(samples)
        if not samples:
            return cls(np.zeros(0, dtype=np.int64), (), np.zeros((0, 0)))
        first = samples[0]
        node_names = tuple(first.node_values)
        cores = tuple(sorted({c for c, _ in first.core_values}))
        core_names = tuple(dict.fromkeys(n for _, n in first.core_values))
        T = len(samples)
        node = np.empty((T, len(node_names)))
        core = np.empty((T, len(cores), len(core_names)))
        for i, s in enumerate(samples):
            if set(s.node_values) != set(node_names) or len(s.core_values) != len(cores) * len(core_names):
                raise ValueError(f"sample at t={s.timestamp} has a different metric set")
            node[i] = [s.node_values[n] for n in node_names]
            for ci, c in enumerate(cores):
                core[i, ci] = [s.core_values[(c, n)] for n in core_names]
        return cls(np.array([s.timestamp for s in samples]), node_names, node, cores, core_names, core)


# -- parsing ---------------------------------------------------------------


def _text_lines(source) -> Iterator[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode("utf-8"))
    elif hasattr(source, "read") and isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")
    return iter(source)


@dataclass
class _Layout:
    has_core: bool
    node_names: list[str]
    node_cols: list[int]
    core_names: list[str]
    core_cols: list[int]
    time_col: int
    core_col: int | None
    width: int


def _read_header(header: list[str], schema: TraceSchema) -> _Layout:
    cols = [h.strip() for h in header]
    if schema.time_column not in cols:
        raise TraceFormatError(f"header has no {schema.time_column!r} column", 1)
    if len(set(cols)) != len(cols):
        raise TraceFormatError("duplicate column names in header", 1)
    time_col = cols.index(schema.time_column)
    core_col = cols.index(schema.core_column) if schema.core_column in cols else None
    node_names, node_cols, core_names, core_cols = [], [], [], []
    for i, c in enumerate(cols):
        if i in (time_col, core_col):
            continue
        if c.startswith(schema.node_prefix):
            node_names.append(c[len(schema.node_prefix):])
            node_cols.append(i)
        elif core_col is None:
            node_names.append(c)
            node_cols.append(i)
        else:
            core_names.append(c)
            core_cols.append(i)
    if len(set(node_names)) != len(node_names):
        raise TraceFormatError("node metric declared twice in header", 1)
    return _Layout(core_col is not None, node_names, node_cols, core_names, core_cols, time_col, core_col, len(cols))


def _number(text: str, line: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise TraceFormatError(f"unparseable number {text!r} in column {column!r}", line) from None
    if not math.isfinite(v):
        raise TraceFormatError(f"non-finite value {text!r} in column {column!r}", line)
    return v


class _RowReader:
    """Groups CSV rows by timestamp; ``layout`` is available before iteration."""

    def __init__(self, source, schema: TraceSchema):
        self._reader = csv.reader(_text_lines(source))
        try:
            self.header = [h.strip() for h in next(self._reader)]
        except StopIteration:
            raise TraceFormatError("missing header row", 1) from None
        self.layout = _read_header(self.header, schema)

    def __iter__(self):
        """Yield ``(t, node_row, {core: core_row})`` once per timestamp."""
        lay = self.layout
        cols = self.header
        cur_t: int | None = None
        node_row: list[float] = []
        core_rows: dict[int, list[float]] = {}
        core_set: tuple[int, ...] | None = None
        lineno = 1

        def finish():
            nonlocal core_set
            if lay.has_core:
                got = tuple(sorted(core_rows))
                if core_set is None:
                    core_set = got
                elif got != core_set:
                    raise TraceFormatError(f"timestamp {cur_t} has cores {list(got)}, expected {list(core_set)}", lineno)
            return cur_t, node_row, core_rows

        for lineno, row in enumerate(self._reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != lay.width:
                raise TraceFormatError(f"expected {lay.width} fields, got {len(row)}", lineno)
            if any(not f.strip() for f in row):
                raise TraceFormatError("missing value", lineno)
            try:
                t = int(row[lay.time_col])
            except ValueError:
                raise TraceFormatError(f"unparseable timestamp {row[lay.time_col]!r}", lineno) from None
            core = None
            if lay.has_core:
                try:
                    core = int(row[lay.core_col])
                except ValueError:
                    raise TraceFormatError(f"unparseable core id {row[lay.core_col]!r}", lineno) from None
                if core < 0:
                    raise TraceFormatError(f"negative core id {core}", lineno)
            nvals = [_number(row[i], lineno, cols[i]) for i in lay.node_cols]
            cvals = [_number(row[i], lineno, cols[i]) for i in lay.core_cols]

            if cur_t is None or t != cur_t:
                if cur_t is not None:
                    if t < cur_t:
                        raise TraceFormatError(f"non-monotonic timestamp {t} after {cur_t}", lineno)
                    if t != cur_t + 1:
                        raise TraceFormatError(f"gap in timestamps: {t} follows {cur_t}", lineno)
                    yield finish()
                cur_t, node_row, core_rows = t, nvals, {}
            else:
                if not lay.has_core:
                    raise TraceFormatError(f"duplicate timestamp {t}", lineno)
                if core in core_rows:
                    raise TraceFormatError(f"duplicate timestamp {t} for core {core}", lineno)
                if nvals != node_row:
                    raise TraceFormatError(f"node-level values disagree across cores at timestamp {t}", lineno)
            if lay.has_core:
                core_rows[core] = cvals
        if cur_t is not None:
            yield finish()


def iter_samples(source, schema: TraceSchema = TraceSchema()) -> Iterator[MetricSample]:
    """Incrementally parse a trace, yielding one sample per timestamp."""
    rows = _RowReader(source, schema)
    lay = rows.layout
    for t, node_row, core_rows in rows:
        per_core = {}
        for c in sorted(core_rows):
            for name, v in zip(lay.core_names, core_rows[c]):
                per_core[(c, name)] = v
        yield MetricSample(t, dict(zip(lay.node_names, node_row)), per_core)


def parse_trace(source, schema: TraceSchema = TraceSchema()) -> Trace:
    """Parse a CSV trace into a :class:`Trace`.

    ``source`` may be a text or binary stream, bytes, or an iterable of lines.
    Rows sharing a timestamp merge into one sample, one row per core.
    """
    rows = _RowReader(source, schema)
    lay = rows.layout
    times, node, core = [], [], []
    cores: tuple[int, ...] = ()
    for t, node_row, core_rows in rows:
        if not times:
            cores = tuple(sorted(core_rows))
        times.append(t)
        node.append(node_row)
        core.append([core_rows[c] for c in cores])
    T = len(times)
    return Trace(
        np.asarray(times, dtype=np.int64),
        tuple(lay.node_names),
        np.asarray(node, dtype=np.float64).reshape(T, len(lay.node_names)),
        cores,
        tuple(lay.core_names) if lay.has_core else (),
        np.asarray(core, dtype=np.float64).reshape(T, len(cores), len(lay.core_names) if lay.has_core else 0),
    )


def trace_header(trace: Trace, schema: TraceSchema = TraceSchema()) -> list[str]:
    if trace.cores:
        return [schema.time_column, schema.core_column] + [schema.node_prefix + n for n in trace.node_names] + list(trace.core_names)
    return [schema.time_column] + list(trace.node_names)


def write_trace(trace: Trace, stream, schema: TraceSchema = TraceSchema()) -> None:
    """Write ``trace`` in the CSV dialect read by :func:`parse_trace`.

    Values use ``repr`` so a parse of the output reproduces the trace exactly.
    """
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(trace_header(trace, schema))
    node_txt = [[repr(v) for v in row] for row in trace.node_values.tolist()]
    if not trace.cores:
        for t, row in zip(trace.times.tolist(), node_txt):
            w.writerow([t] + row)
        return
    core_list = trace.core_values.tolist()
    for i, t in enumerate(trace.times.tolist()):
        for ci, c in enumerate(trace.cores):
            w.writerow([t, c] + node_txt[i] + [repr(v) for v in core_list[i][ci]])


def merge_traces(traces: Iterable[Trace]) -> Trace:
    """Collapse per-plugin traces into one wide trace over the same timestamps."""
    traces = list(traces)
    if not traces:
        raise ValueError("nothing to merge")
    base = traces[0]
    cores = next((t.cores for t in traces if t.cores), ())
    node_names: list[str] = []
    core_names: list[str] = []
    node_blocks, core_blocks = [], []
    for tr in traces:
        if not np.array_equal(tr.times, base.times):
            raise ValueError("traces to merge must cover identical timestamps")
        if tr.cores and tr.cores != cores:
            raise ValueError("traces to merge must share the same core set")
        for n in tr.node_names:
            if n in node_names:
                raise ValueError(f"node metric {n!r} appears in more than one trace")
        for n in tr.core_names:
            if n in core_names:
                raise ValueError(f"core metric {n!r} appears in more than one trace")
        node_names += tr.node_names
        node_blocks.append(tr.node_values)
        if tr.cores:
            core_names += tr.core_names
            core_blocks.append(tr.core_values)
    T = len(base)
    return Trace(
        base.times,
        tuple(node_names),
        np.concatenate(node_blocks, axis=1) if node_blocks else np.zeros((T, 0)),
        cores,
        tuple(core_names),
        np.concatenate(core_blocks, axis=2) if core_blocks else np.zeros((T, len(cores), 0)),
    )


# -- post-processing -------------------------------------------------------


@dataclass(frozen=True)
class PostProcessConfig:
    """Names may be plain (match either scope) or scoped (``node:x``/``core:x``)."""

    counter_metrics: frozenset[str] = frozenset()
    drop_metrics: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "counter_metrics", frozenset(self.counter_metrics))
        object.__setattr__(self, "drop_metrics", frozenset(self.drop_metrics))
        overlap = self.counter_metrics & self.drop_metrics
        if overlap:
            raise ValueError(f"metrics both counted and dropped: {sorted(overlap)}")


def _selects(names: frozenset[str], scope: str, name: str) -> bool:
    return name in names or metric_id(scope, name) in names


@dataclass(frozen=True)
class AllocationInterval:
    scope: int | None  # core id, or None for the whole node
    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"allocation interval must have start < end, got [{self.start}, {self.end})")


@dataclass(frozen=True)
class AllocationSchedule:
    intervals: tuple[AllocationInterval, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))

    def node_allocated(self, t: int) -> bool:
        return any(iv.start <= t < iv.end for iv in self.intervals)

    def core_allocated(self, t: int, core: int) -> bool:
        return any(iv.start <= t < iv.end and (iv.scope is None or iv.scope == core) for iv in self.intervals)


ALLOCATION_HEADER = ("start", "end", "scope")


def write_allocation(schedule: AllocationSchedule, stream) -> None:
    """CSV ``start,end,scope`` with scope ``node`` or ``core:<k>``."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(ALLOCATION_HEADER)
    for iv in schedule.intervals:
        w.writerow([iv.start, iv.end, "node" if iv.scope is None else f"core:{iv.scope}"])


def read_allocation(source) -> AllocationSchedule:
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return AllocationSchedule()
    if tuple(h.strip() for h in header) != ALLOCATION_HEADER:
        raise ValueError(f"allocation header must be {','.join(ALLOCATION_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) != 3:
                raise ValueError(f"expected 3 fields, got {len(row)}")
            scope = row[2].strip()
            if scope == "node":
                core = None
            elif scope.startswith("core:") and scope[5:].isdigit():
                core = int(scope[5:])
            else:
                raise ValueError(f"scope must be 'node' or 'core:<k>', got {scope!r}")
            out.append(AllocationInterval(core, int(row[0]), int(row[1])))
        except ValueError as exc:
            raise ValueError(f"allocation line {lineno}: {exc}") from None
    return AllocationSchedule(tuple(out))


def drop_metrics(trace: Trace, names: Iterable[str]) -> Trace:
    names = frozenset(names)
    nk = [i for i, n in enumerate(trace.node_names) if not _selects(names, NODE, n)]
    ck = [i for i, n in enumerate(trace.core_names) if not _selects(names, CORE, n)]
    return trace.replace(
        node_names=tuple(trace.node_names[i] for i in nk),
        node_values=trace.node_values[:, nk],
        core_names=tuple(trace.core_names[i] for i in ck),
        core_values=trace.core_values[:, :, ck],
    )


def remove_constant_metrics(trace: Trace) -> tuple[Trace, set[str]]:
    """Drop metrics whose value never changes; returns the removed scoped ids.

    A core metric is constant only if it is constant across every core too.
    A single-sample trace therefore loses every metric.
    """
    if len(trace) == 0:
        raise ValueError("cannot inspect an empty trace")
    nv = trace.node_values
    node_const = np.all(nv == nv[:1], axis=0)
    cv = trace.core_values
    core_const = np.all(cv == cv[:1, :1], axis=(0, 1)) if cv.shape[1] else np.ones(cv.shape[2], bool)
    removed = {metric_id(NODE, n) for n, c in zip(trace.node_names, node_const) if c}
    removed |= {metric_id(CORE, n) for n, c in zip(trace.core_names, core_const) if c}
    return drop_metrics(trace, removed), removed


def _clamped_diff(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    if len(values) > 1:
        out[1:] = np.maximum(values[1:] - values[:-1], 0.0)
    return out


def differentiate_counters(trace: Trace, config: PostProcessConfig) -> Trace:
    """Replace counter metrics by their per-second increase.

    The first sample gets 0 and a negative step (counter reset) is clamped to 0.
    """
    nidx = [i for i, n in enumerate(trace.node_names) if _selects(config.counter_metrics, NODE, n)]
    cidx = [i for i, n in enumerate(trace.core_names) if _selects(config.counter_metrics, CORE, n)]
    known = {n for n in trace.node_names} | {n for n in trace.core_names} | set(trace.metric_ids)
    unknown = config.counter_metrics - known
    if unknown:
        raise ValueError(f"counter metrics not in trace: {sorted(unknown)}")
    node = trace.node_values.copy()
    core = trace.core_values.copy()
    if nidx:
        node[:, nidx] = _clamped_diff(node[:, nidx])
    if cidx:
        core[:, :, cidx] = _clamped_diff(core[:, :, cidx])
    return trace.replace(node_values=node, core_values=core)


def allocation_arrays(schedule: AllocationSchedule, times: np.ndarray, cores: tuple[int, ...]):
    """0/1 ``allocated`` values: ``(T,)`` for the node and ``(T, cores)``."""
    start = int(times[0]) if len(times) else 0
    T = len(times)
    node = np.zeros(T)
    core = np.zeros((T, len(cores)))
    for iv in schedule.intervals:
        lo, hi = max(iv.start - start, 0), min(iv.end - start, T)
        if lo >= hi:
            continue
        node[lo:hi] = 1.0
        if iv.scope is None:
            core[lo:hi, :] = 1.0
        elif iv.scope in cores:
            core[lo:hi, cores.index(iv.scope)] = 1.0
    return node, core


def append_allocated_metric(trace: Trace, schedule: AllocationSchedule) -> Trace:
    if ALLOCATED in trace.node_names or ALLOCATED in trace.core_names:
        raise ValueError(f"trace already has an {ALLOCATED!r} metric")
    node, core = allocation_arrays(schedule, trace.times, trace.cores)
    return trace.replace(
        node_names=trace.node_names + (ALLOCATED,),
        node_values=np.concatenate([trace.node_values, node[:, None]], axis=1),
        core_names=trace.core_names + ((ALLOCATED,) if trace.cores else ()),
        core_values=np.concatenate([trace.core_values, core[:, :, None]], axis=2) if trace.cores else trace.core_values,
    )


def _diff_first_zero(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    if len(values) > 1:
        out[1:] = values[1:] - values[:-1]
    return out


def append_first_derivatives(trace: Trace) -> Trace:
    """Append ``<metric>.deriv`` for every metric (0 at the first sample)."""
    for n in trace.node_names + trace.core_names:
        if n.endswith(DERIV_SUFFIX):
            raise ValueError(f"trace already has derivative metric {n!r}")
    return trace.replace(
        node_names=trace.node_names + tuple(n + DERIV_SUFFIX for n in trace.node_names),
        node_values=np.concatenate([trace.node_values, _diff_first_zero(trace.node_values)], axis=1),
        core_names=trace.core_names + tuple(n + DERIV_SUFFIX for n in trace.core_names),
        core_values=np.concatenate([trace.core_values, _diff_first_zero(trace.core_values)], axis=2),
    )


def postprocess(
    trace: Trace, config: PostProcessConfig = PostProcessConfig(), allocation: AllocationSchedule = AllocationSchedule()
) -> tuple[Trace, set[str]]:
    """Full post-processing chain; returns the trace and the removed metric ids."""
    if config.drop_metrics:
        trace = drop_metrics(trace, config.drop_metrics)
    trace, removed = remove_constant_metrics(trace)
    # constant counters were just removed; the rest must exist
    present = set(trace.node_names) | set(trace.core_names) | set(trace.metric_ids)
    counters = frozenset(c for c in config.counter_metrics if c in present)
    trace = differentiate_counters(trace, PostProcessConfig(counter_metrics=counters))
    trace = append_allocated_metric(trace, allocation)
    return append_first_derivatives(trace), removed


class StreamingPostProcessor:
    """Causal, sample-at-a-time equivalent of :func:`postprocess`.

    The metric layout is fixed up front (normally from a trained model), so no
    constant-metric pass is needed. Output columns match the batch layout.
    """

    def __init__(
        self,
        node_names: Iterable[str],
        core_names: Iterable[str],
        cores: Iterable[int],
        counter_metrics: Iterable[str] = (),
        allocation: AllocationSchedule = AllocationSchedule(),
    ):
        self.node_names = tuple(node_names)
        self.core_names = tuple(core_names)
        self.cores = tuple(cores)
        counters = frozenset(counter_metrics)
        self._node_ctr = np.array([_selects(counters, NODE, n) for n in self.node_names], dtype=bool)
        self._core_ctr = np.array([_selects(counters, CORE, n) for n in self.core_names], dtype=bool)
        self.allocation = allocation
        self._prev_raw: tuple[np.ndarray, np.ndarray] | None = None
        self._prev_out: tuple[np.ndarray, np.ndarray] | None = None
        self._prev_t: int | None = None

    @property
    def out_node_names(self) -> tuple[str, ...]:
        base = self.node_names + (ALLOCATED,)
        return base + tuple(n + DERIV_SUFFIX for n in base)

    @property
    def out_core_names(self) -> tuple[str, ...]:
        base = self.core_names + ((ALLOCATED,) if self.cores else ())
        return base + tuple(n + DERIV_SUFFIX for n in base)

    def push(self, sample: MetricSample) -> tuple[np.ndarray, np.ndarray]:
        """Post-process one sample; returns ``(node_row, core_rows)``."""
        t = sample.timestamp
        if self._prev_t is not None and t != self._prev_t + 1:
            raise ValueError(f"stream timestamp {t} does not follow {self._prev_t}")
        try:
            node = np.array([sample.node_values[n] for n in self.node_names], dtype=np.float64)
            core = np.array(
                [[sample.core_values[(c, n)] for n in self.core_names] for c in self.cores], dtype=np.float64
            ).reshape(len(self.cores), len(self.core_names))
        except KeyError as exc:
            raise ValueError(f"stream sample at t={t} lacks metric {exc.args[0]!r}") from None
        node_d, core_d = node.copy(), core.copy()
        if self._prev_raw is None:
            node_d[self._node_ctr] = 0.0
            core_d[:, self._core_ctr] = 0.0
        else:
            pn, pc = self._prev_raw
            node_d[self._node_ctr] = np.maximum(node[self._node_ctr] - pn[self._node_ctr], 0.0)
            core_d[:, self._core_ctr] = np.maximum(core[:, self._core_ctr] - pc[:, self._core_ctr], 0.0)
        alloc_node = np.array([1.0 if self.allocation.node_allocated(t) else 0.0])
        node_base = np.concatenate([node_d, alloc_node])
        if self.cores:
            alloc_core = np.array([[1.0 if self.allocation.core_allocated(t, c) else 0.0] for c in self.cores])
            core_base = np.concatenate([core_d, alloc_core], axis=1)
        else:
            core_base = core_d
        if self._prev_out is None:
            node_der, core_der = np.zeros_like(node_base), np.zeros_like(core_base)
        else:
            node_der = node_base - self._prev_out[0]
            core_der = core_base - self._prev_out[1]
        self._prev_raw = (node, core)
        self._prev_out = (node_base, core_base)
        self._prev_t = t
        return np.concatenate([node_base, node_der]), np.concatenate([core_base, core_der], axis=1)
