"""Fault classes, injection schedules and window labeling.

A window is labeled from the per-second ground truth it covers, either by
the most frequent label (``mode``) or by the label of its last second
(``recent``). Windows covering more than one distinct label are flagged as
ambiguous.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


class FaultClass(str, enum.Enum):
    """The nine detectable system states, in fixed tie-break order."""

    HEALTHY = "healthy"
    LEAK = "leak"
    MEMEATER = "memeater"
    DDOT = "ddot"
    DIAL = "dial"
    CPUFREQ = "cpufreq"
    PAGEFAIL = "pagefail"
    IOERR = "ioerr"
    COPY = "copy"

    def __str__(self) -> str:
        return self.value

    @property
    def index(self) -> int:
        return _CLASS_INDEX[self]

    @property
    def core_scoped(self) -> bool:
        return self in (FaultClass.DDOT, FaultClass.DIAL)

    @classmethod
    def parse(cls, text: str) -> FaultClass:
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown fault class {text!r}") from None


ALL_CLASSES: tuple[FaultClass, ...] = tuple(FaultClass)
FAULTS: tuple[FaultClass, ...] = ALL_CLASSES[1:]
_CLASS_INDEX = {c: i for i, c in enumerate(ALL_CLASSES)}

LABELING_METHODS = ("mode", "recent")


def class_order(labels: Iterable) -> tuple:
    """Distinct labels in canonical order.

    FaultClass members follow enum order; any other labels are sorted.
    """
    distinct = set(labels)
    if distinct and all(isinstance(c, FaultClass) for c in distinct):
        return tuple(c for c in ALL_CLASSES if c in distinct)
    return tuple(sorted(distinct, key=lambda c: (str(type(c)), c)))


@dataclass(frozen=True)
class ScheduleEntry:
    fault: FaultClass
    scope: int | None  # core id, or None for the whole node
    start: int
    end: int
    low_intensity: bool = False

    def __post_init__(self):
        if self.fault is FaultClass.HEALTHY:
            raise ValueError("healthy is not an injectable fault")
        if self.start >= self.end:
            raise ValueError(f"schedule entry must have start < end, got [{self.start}, {self.end})")

    def covers(self, t: int, core: int) -> bool:
        if not self.start <= t < self.end:
            return False
        return self.scope is None or self.scope == core


class FaultSchedule:
    """Ground-truth injection log. Entries are half-open ``[start, end)``."""

    def __init__(self, entries: Iterable[ScheduleEntry] = ()):
        self.entries: tuple[ScheduleEntry, ...] = tuple(sorted(entries, key=lambda e: (e.start, e.end)))
        for a, b in zip(self.entries, self.entries[1:]):
            if b.start < a.end:
                raise ValueError(
                    f"fault entries overlap: {a.fault}@[{a.start},{a.end}) and {b.fault}@[{b.start},{b.end})"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ScheduleEntry]:
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, FaultSchedule) and self.entries == other.entries

    def timeline(self, core: int, start: int, end: int) -> np.ndarray:
        """Per-second class indices for ``core`` over ``[start, end)``."""
        out = np.zeros(max(end - start, 0), dtype=np.int8)
        for e in self.entries:
            if e.scope is not None and e.scope != core:
                continue
            lo, hi = max(e.start, start), min(e.end, end)
            if lo < hi:
                out[lo - start : hi - start] = e.fault.index
        return out


def per_second_labels(schedule: FaultSchedule, core_id: int, window: tuple[int, int]) -> list[FaultClass]:
    start, end = window
    return [ALL_CLASSES[i] for i in schedule.timeline(core_id, start, end)]


def label_mode(labels: Sequence) -> object:
    """Most frequent label; ties go to the label seen most recently."""
    if len(labels) == 0:
        raise ValueError("cannot label an empty window")
    counts: dict = {}
    last_seen: dict = {}
    for i, lab in enumerate(labels):
        counts[lab] = counts.get(lab, 0) + 1
        last_seen[lab] = i
    return max(counts, key=lambda lab: (counts[lab], last_seen[lab]))


def label_recent(labels: Sequence) -> object:
    if len(labels) == 0:
        raise ValueError("cannot label an empty window")
    return labels[-1]


def is_ambiguous(labels: Sequence) -> bool:
    if len(labels) == 0:
        raise ValueError("cannot label an empty window")
    first = labels[0]
    return any(lab != first for lab in labels)


def apply_labeling(labels: Sequence, method: str) -> object:
    if method == "mode":
        return label_mode(labels)
    if method == "recent":
        return label_recent(labels)
    raise ValueError(f"unknown labeling method {method!r}; expected one of {LABELING_METHODS}")


def filter_ambiguous(vectors: Iterable) -> list:
    return [v for v in vectors if not v.ambiguous]


def label_vectors(vectors: Iterable, schedule: FaultSchedule, method: str, window_length: int) -> Iterator:
    """Attach a label and ambiguity flag to each vector.

    Each vector covers ``[window_end - window_length, window_end)`` on its core.
    """
    if method not in LABELING_METHODS:
        raise ValueError(f"unknown labeling method {method!r}; expected one of {LABELING_METHODS}")
    for v in vectors:
        idx = schedule.timeline(v.core_id, v.window_end - window_length, v.window_end)
        labels = idx.tolist()
        label = ALL_CLASSES[apply_labeling(labels, method)]
        yield dataclasses.replace(v, label=label, ambiguous=is_ambiguous(labels))


# -- schedule file ---------------------------------------------------------

SCHEDULE_HEADER = ("start", "end", "fault", "scope", "low_intensity")


def format_scope(scope: int | None) -> str:
    return "node" if scope is None else f"core:{scope}"


def parse_scope(text: str) -> int | None:
    text = text.strip()
    if text == "node":
        return None
    if text.startswith("core:"):
        core = int(text[5:])
        if core < 0:
            raise ValueError(f"negative core id in scope {text!r}")
        return core
    raise ValueError(f"scope must be 'node' or 'core:<k>', got {text!r}")


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_schedule(source) -> FaultSchedule:
    """Read a schedule CSV (``start,end,fault,scope,low_intensity``)."""
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode("utf-8"))
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return FaultSchedule()
    cols = [h.strip() for h in header]
    missing = [c for c in SCHEDULE_HEADER if c not in cols]
    if missing:
        raise ValueError(f"schedule header is missing columns {missing}")
    pos = {c: cols.index(c) for c in SCHEDULE_HEADER}
    entries = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            entries.append(
                ScheduleEntry(
                    fault=FaultClass.parse(row[pos["fault"]]),
                    scope=parse_scope(row[pos["scope"]]),
                    start=int(row[pos["start"]]),
                    end=int(row[pos["end"]]),
                    low_intensity=parse_bool(row[pos["low_intensity"]]),
                )
            )
        except (ValueError, IndexError) as exc:
            raise ValueError(f"schedule line {lineno}: {exc}") from None
    return FaultSchedule(entries)


def write_schedule(schedule: FaultSchedule, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(SCHEDULE_HEADER)
    for e in schedule:
        w.writerow([e.start, e.end, e.fault.value, format_scope(e.scope), int(e.low_intensity)])
