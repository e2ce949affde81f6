"""Workload schedules of benchmark and fault-triggering tasks."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..ingest import AllocationInterval, AllocationSchedule
from ..labeling import (
    FAULTS,
    FaultClass,
    FaultSchedule,
    ScheduleEntry,
    format_scope,
    parse_bool,
    parse_scope,
)
from .distributions import DistributionSpec, Normal

BENCHMARK = "benchmark"
FAULT = "fault"
BENCHMARKS = ("dgemm", "hpcc", "stream", "hpl", "iozone", "bonnie")

# Inter-arrival is start-to-start. Defaults aim at a mean fault duration of
# ~300 s every ~900 s and 75% benchmark occupancy.
DEFAULT_FAULT_DURATION = Normal(300.0, 60.0)
DEFAULT_FAULT_INTERARRIVAL = Normal(900.0, 150.0)
DEFAULT_BENCH_DURATION = Normal(600.0, 60.0)
DEFAULT_BENCH_INTERARRIVAL = Normal(800.0, 60.0)


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadTask:
    kind: str
    program: str
    start: int
    duration: int
    scope: int | None = None  # core id, or None for the whole node
    low_intensity: bool = False

    def __post_init__(self):
        if self.kind not in (BENCHMARK, FAULT):
            raise ValueError(f"task kind must be {BENCHMARK!r} or {FAULT!r}")
        if self.duration <= 0:
            raise ValueError("task duration must be positive")
        if self.kind == FAULT:
            FaultClass.parse(self.program)

    @property
    def end(self) -> int:
        return self.start + self.duration

    @property
    def fault(self) -> FaultClass:
        return FaultClass.parse(self.program)


def _positive(dist: DistributionSpec, rng: np.random.Generator, what: str, max_retries: int) -> int:
    """Draw and round to whole seconds, resampling values below one second."""
    for _ in range(max_retries):
        v = int(round(float(dist.draw(rng))))
        if v >= 1:
            return v
    raise WorkloadError(f"{what} distribution kept producing non-positive values ({max_retries} tries)")


def _fault_tasks(total, duration, interarrival, fault_classes, cores, rng, program_draw, max_retries):
    tasks = []
    bag: list[tuple[FaultClass, bool]] = []
    start = 0
    while start < total:
        d = _positive(duration, rng, "fault duration", max_retries)
        gap = _positive(interarrival, rng, "fault inter-arrival", max_retries)
        nxt = start + gap
        # clip rather than reject so the arrival process is kept
        d = min(d, nxt - start, total - start)
        if program_draw == "bag":
            if not bag:
                pairs = [(f, low) for f in fault_classes for low in (False, True)]
                bag = [pairs[i] for i in rng.permutation(len(pairs))]
            fault, low = bag.pop()
            scope = int(rng.integers(cores)) if fault.core_scoped else None
        else:
            fault = fault_classes[int(rng.integers(len(fault_classes)))]
            scope = int(rng.integers(cores)) if fault.core_scoped else None
            low = bool(rng.random() < 0.5)
        tasks.append(WorkloadTask(FAULT, fault.value, start, d, scope, low))
        start = nxt
    return tasks


def _bench_tasks(total, duration, interarrival, benchmarks, rng, max_retries):
    tasks = []
    start = 0
    while start < total:
        d = _positive(duration, rng, "benchmark duration", max_retries)
        gap = _positive(interarrival, rng, "benchmark inter-arrival", max_retries)
        d = min(d, gap, total - start)
        prog = benchmarks[int(rng.integers(len(benchmarks)))]
        tasks.append(WorkloadTask(BENCHMARK, prog, start, d))
        start += gap
    return tasks


def generate_workload(
    total_seconds: int,
    fault_duration_dist: DistributionSpec = DEFAULT_FAULT_DURATION,
    fault_interarrival_dist: DistributionSpec = DEFAULT_FAULT_INTERARRIVAL,
    bench_duration_dist: DistributionSpec = DEFAULT_BENCH_DURATION,
    bench_interarrival_dist: DistributionSpec = DEFAULT_BENCH_INTERARRIVAL,
    fault_classes: Sequence[FaultClass] = FAULTS,
    rng: np.random.Generator | int | None = 0,
    *,
    cores: int = 1,
    benchmarks: Sequence[str] = BENCHMARKS,
    bench_coverage: float = 0.75,
    coverage_tolerance: float = 0.05,
    program_draw: str = "iid",
    max_retries: int = 1000,
) -> list[WorkloadTask]:
    """Random benchmark and fault tasks over ``[0, total_seconds)``.

    Fault starts follow the sampled inter-arrival times from t=0; each
    duration is clipped at the next start and at the end, so faults never
    overlap. The benchmark schedule is redrawn until its busy fraction is
    within ``coverage_tolerance`` of ``bench_coverage``; if no draw gets there
    the closest one is kept. ``program_draw="bag"`` cycles through shuffled
    copies of every (fault, intensity) pair instead of drawing each fault and
    its intensity independently; both intensities still have probability 0.5.
    Tasks come back sorted by start time (benchmarks first on ties).
    """
    if total_seconds <= 0:
        raise WorkloadError("total_seconds must be positive")
    if cores < 1:
        raise WorkloadError("cores must be positive")
    if program_draw not in ("iid", "bag"):
        raise WorkloadError("program_draw must be 'iid' or 'bag'")
    fault_classes = [FaultClass.parse(f) if isinstance(f, str) else f for f in fault_classes]
    if not fault_classes or FaultClass.HEALTHY in fault_classes:
        raise WorkloadError("fault_classes must be a non-empty set of faults")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    faults = _fault_tasks(
        total_seconds, fault_duration_dist, fault_interarrival_dist, fault_classes, cores, rng, program_draw, max_retries
    )
    bench: list[WorkloadTask] = []
    if bench_coverage > 0 and benchmarks:
        best, best_err = None, None
        for _ in range(max_retries):
            cand = _bench_tasks(total_seconds, bench_duration_dist, bench_interarrival_dist, benchmarks, rng, max_retries)
            err = abs(sum(t.duration for t in cand) / total_seconds - bench_coverage)
            if best_err is None or err < best_err:
                best, best_err = cand, err
            if err <= coverage_tolerance:
                break
        bench = best or []
    return sorted(bench + faults, key=lambda t: (t.start, t.kind != BENCHMARK))


def benchmark_coverage(tasks: Iterable[WorkloadTask], total_seconds: int) -> float:
    busy = np.zeros(total_seconds, dtype=bool)
    for t in tasks:
        if t.kind == BENCHMARK:
            busy[t.start : min(t.end, total_seconds)] = True
    return float(busy.mean())


def workload_schedules(tasks: Iterable[WorkloadTask]) -> tuple[FaultSchedule, AllocationSchedule]:
    tasks = list(tasks)
    faults = FaultSchedule(
        ScheduleEntry(t.fault, t.scope, t.start, t.end, t.low_intensity) for t in tasks if t.kind == FAULT
    )
    alloc = AllocationSchedule(tuple(AllocationInterval(t.scope, t.start, t.end) for t in tasks if t.kind == BENCHMARK))
    return faults, alloc


# -- workload file ---------------------------------------------------------

WORKLOAD_HEADER = ("start", "duration", "kind", "program", "scope", "low_intensity")


def write_workload(tasks: Iterable[WorkloadTask], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(WORKLOAD_HEADER)
    for t in tasks:
        w.writerow([t.start, t.duration, t.kind, t.program, format_scope(t.scope), int(t.low_intensity)])


def read_workload(stream) -> list[WorkloadTask]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != WORKLOAD_HEADER:
        raise WorkloadError(f"workload header must be {','.join(WORKLOAD_HEADER)}")
    tasks = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) != len(WORKLOAD_HEADER):
                raise ValueError(f"expected {len(WORKLOAD_HEADER)} fields, got {len(row)}")
            tasks.append(
                WorkloadTask(
                    kind=row[2].strip(),
                    program=row[3].strip(),
                    start=int(row[0]),
                    duration=int(row[1]),
                    scope=parse_scope(row[4]),
                    low_intensity=parse_bool(row[5]),
                )
            )
        except ValueError as exc:
            raise WorkloadError(f"workload line {lineno}: {exc}") from None
    return tasks
