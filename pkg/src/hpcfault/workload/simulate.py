"""Synthetic node traces with fault signatures.

This is a stand-in for a real instrumented node: each metric is stationary
Gaussian noise around a baseline, shifted while benchmarks are allocated,
and perturbed in a fault-specific way while a fault task runs. Counter
metrics are simulated as per-second rates and emitted as cumulative sums.
The magnitudes below are configuration, not measurements.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..ingest import AllocationSchedule, Trace
from ..labeling import FaultClass, FaultSchedule
from .generator import BENCHMARK, FAULT, WorkloadTask, workload_schedules

GAUGE = "gauge"
COUNTER = "counter"
CONSTANT = "constant"
RESOURCES = ("cpu", "mem", "io")

# resource intensity of each benchmark program
BENCHMARK_PROFILES: dict[str, dict[str, float]] = {
    "dgemm": {"cpu": 0.9, "mem": 0.3, "io": 0.0},
    "hpcc": {"cpu": 0.7, "mem": 0.6, "io": 0.05},
    "stream": {"cpu": 0.4, "mem": 0.9, "io": 0.0},
    "hpl": {"cpu": 0.95, "mem": 0.4, "io": 0.0},
    "iozone": {"cpu": 0.2, "mem": 0.1, "io": 0.8},
    "bonnie": {"cpu": 0.2, "mem": 0.2, "io": 0.7},
}


@dataclass(frozen=True)
class MetricDef:
    name: str
    kind: str = GAUGE
    mean: float = 0.0
    noise: float = 1.0
    resource: str | None = None
    load_gain: float = 0.0
    lower: float | None = 0.0
    upper: float | None = None

    def __post_init__(self):
        if self.kind not in (GAUGE, COUNTER, CONSTANT):
            raise ValueError(f"metric {self.name!r}: unknown kind {self.kind!r}")
        if self.resource is not None and self.resource not in RESOURCES:
            raise ValueError(f"metric {self.name!r}: unknown resource {self.resource!r}")
        if self.noise < 0:
            raise ValueError(f"metric {self.name!r}: noise must be non-negative")


@dataclass(frozen=True)
class NodeSpec:
    cores: int
    node_metrics: tuple[MetricDef, ...]
    core_metrics: tuple[MetricDef, ...]

    def __post_init__(self):
        object.__setattr__(self, "node_metrics", tuple(self.node_metrics))
        object.__setattr__(self, "core_metrics", tuple(self.core_metrics))
        if self.cores < 1:
            raise ValueError("a node needs at least one core")
        names = [m.name for m in self.node_metrics + self.core_metrics]
        if len(set(names)) != len(names):
            raise ValueError("metric names must be unique across node and core scope")

    @property
    def counter_metrics(self) -> frozenset[str]:
        return frozenset(m.name for m in self.node_metrics + self.core_metrics if m.kind == COUNTER)

    @property
    def metric_count(self) -> int:
        return len(self.node_metrics) + len(self.core_metrics)

    def to_dict(self) -> dict:
        return {
            "cores": self.cores,
            "node_metrics": [asdict(m) for m in self.node_metrics],
            "core_metrics": [asdict(m) for m in self.core_metrics],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> NodeSpec:
        return cls(
            int(doc["cores"]),
            tuple(MetricDef(**m) for m in doc["node_metrics"]),
            tuple(MetricDef(**m) for m in doc["core_metrics"]),
        )


_NAMED_NODE = (
    MetricDef("mem_total", CONSTANT, 131072.0, 0.0),
    MetricDef("mem_used", GAUGE, 8000.0, 40.0, "mem", 2000.0),
    MetricDef("mem_free", GAUGE, 120000.0, 40.0, "mem", -2000.0),
    MetricDef("mem_bandwidth", GAUGE, 2000.0, 100.0, "mem", 8000.0),
    MetricDef("page_faults", COUNTER, 500.0, 50.0, "mem", 300.0),
    MetricDef("page_alloc_fail", COUNTER, 0.2, 0.3),
    MetricDef("swap_used", GAUGE, 100.0, 5.0, "mem", 50.0),
    MetricDef("disk_read_bytes", COUNTER, 1.0e5, 2.0e4, "io", 2.0e7),
    MetricDef("disk_write_bytes", COUNTER, 1.0e5, 2.0e4, "io", 2.0e7),
    MetricDef("disk_io_errors", COUNTER, 0.05, 0.1),
    MetricDef("io_wait", GAUGE, 1.0, 0.3, "io", 5.0, 0.0, 100.0),
    MetricDef("context_switches", COUNTER, 5000.0, 300.0, "cpu", 20000.0),
    MetricDef("load_avg", GAUGE, 0.5, 0.1, "cpu", 14.0),
    MetricDef("net_rx_bytes", COUNTER, 1.0e4, 2.0e3),
    MetricDef("node_temp", GAUGE, 40.0, 0.5, "cpu", 25.0),
    MetricDef("cpu_power", GAUGE, 60.0, 2.0, "cpu", 120.0),
)

_NAMED_CORE = (
    MetricDef("cpu_user", GAUGE, 2.0, 1.0, "cpu", 90.0, 0.0, 100.0),
    MetricDef("cpu_system", GAUGE, 1.0, 0.5, "cpu", 5.0, 0.0, 100.0),
    MetricDef("cpu_idle", GAUGE, 97.0, 1.0, "cpu", -95.0, 0.0, 100.0),
    MetricDef("cpu_freq", GAUGE, 2400.0, 30.0, "cpu", 200.0),
    MetricDef("instructions", COUNTER, 1.0e8, 1.0e7, "cpu", 2.0e9),
    MetricDef("cycles", COUNTER, 2.0e8, 1.0e7, "cpu", 2.2e9),
    MetricDef("cache_misses", COUNTER, 1.0e5, 1.0e4, "mem", 1.0e6),
    MetricDef("flops", COUNTER, 1.0e6, 2.0e5, "cpu", 5.0e8),
    MetricDef("branch_misses", COUNTER, 1.0e5, 1.0e4, "cpu", 2.0e5),
)


def default_node_spec(n_metrics: int = 50, cores: int = 4, seed: int = 0) -> NodeSpec:
    """Named node/core metrics padded with generic filler metrics.

    ``n_metrics`` counts metric definitions (a core metric counts once, not
    once per core). Filler metrics get random baselines drawn from ``seed``.
    """
    named = len(_NAMED_NODE) + len(_NAMED_CORE)
    if n_metrics < named:
        raise ValueError(f"the default catalog needs at least {named} metrics")
    rng = np.random.default_rng(seed)
    extra = n_metrics - named
    n_node_fill = extra // 2
    fill_node, fill_core = [], []
    for i in range(extra):
        mean = float(np.round(10 ** rng.uniform(0, 4), 3))
        noise = float(np.round(mean * rng.uniform(0.01, 0.1), 4))
        res = RESOURCES[int(rng.integers(len(RESOURCES)))] if rng.random() < 0.5 else None
        gain = float(np.round(mean * rng.uniform(0.1, 1.0), 3)) if res else 0.0
        if i < n_node_fill:
            fill_node.append(MetricDef(f"node_misc_{i:02d}", GAUGE, mean, noise, res, gain))
        else:
            fill_core.append(MetricDef(f"core_misc_{i - n_node_fill:02d}", GAUGE, mean, noise, res, gain))
    return NodeSpec(cores, _NAMED_NODE + tuple(fill_node), _NAMED_CORE + tuple(fill_core))


# -- fault signatures ------------------------------------------------------

OFFSET = "offset"
FACTOR = "factor"
TREND = "trend"
SPIKE = "spike"
PERIODIC = "periodic"
MODELS = (OFFSET, FACTOR, TREND, SPIKE, PERIODIC)


@dataclass(frozen=True)
class Perturbation:
    """One metric's response to a fault.

    ``offset`` adds ``magnitude``; ``factor`` multiplies by ``magnitude``;
    ``trend`` adds ``magnitude`` per elapsed second; ``spike`` adds
    ``magnitude`` on each second with probability ``probability``;
    ``periodic`` adds ``magnitude`` for ``on`` seconds out of every
    ``on + off``.
    """

    metric: str
    model: str
    magnitude: float
    probability: float = 1.0
    on: int = 1
    off: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown perturbation model {self.model!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("spike probability must lie in [0, 1]")
        if self.model == FACTOR and self.magnitude < 0:
            raise ValueError("a factor must be non-negative")
        if self.on < 1 or self.off < 0:
            raise ValueError("periodic on/off lengths must be positive/non-negative")

    def scaled(self, intensity: float) -> float:
        if self.model == FACTOR:
            return 1.0 + (self.magnitude - 1.0) * intensity
        return self.magnitude * intensity


@dataclass(frozen=True)
class FaultSignature:
    perturbations: tuple[Perturbation, ...]
    intensity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "perturbations", tuple(self.perturbations))


@dataclass(frozen=True)
class SignatureSpec:
    """Fault signatures; low-intensity runs scale every perturbation by the multiplier."""

    signatures: Mapping[FaultClass, FaultSignature]
    low_intensity_multiplier: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.low_intensity_multiplier <= 1.0:
            raise ValueError("low_intensity_multiplier must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "low_intensity_multiplier": self.low_intensity_multiplier,
            "signatures": {
                f.value: {"intensity": s.intensity, "perturbations": [asdict(p) for p in s.perturbations]}
                for f, s in self.signatures.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> SignatureSpec:
        sigs = {}
        for name, s in doc["signatures"].items():
            sigs[FaultClass.parse(name)] = FaultSignature(
                tuple(Perturbation(**p) for p in s["perturbations"]), float(s.get("intensity", 1.0))
            )
        return cls(sigs, float(doc.get("low_intensity_multiplier", 0.5)))


def default_signatures() -> SignatureSpec:
    P = Perturbation
    return SignatureSpec(
        {
            # periodically allocated, never released memory
            FaultClass.LEAK: FaultSignature(
                (
                    P("mem_used", TREND, 200.0),
                    P("mem_free", TREND, -200.0),
                    P("swap_used", TREND, 5.0),
                    P("page_faults", OFFSET, 1500.0),
                )
            ),
            # a large array is allocated, written and grown; bandwidth saturates
            FaultClass.MEMEATER: FaultSignature(
                (
                    P("mem_used", OFFSET, 15000.0),
                    P("mem_used", TREND, 5.0),
                    P("mem_free", OFFSET, -15000.0),
                    P("mem_bandwidth", OFFSET, 30000.0),
                )
            ),
            # dot products over cache-sized matrices on one core
            FaultClass.DDOT: FaultSignature(
                (
                    P("cpu_user", OFFSET, 60.0),
                    P("cpu_idle", OFFSET, -60.0),
                    P("instructions", OFFSET, 1.2e10),
                    P("cache_misses", OFFSET, 4.0e7),
                )
            ),
            # floating-point work on random numbers on one core
            FaultClass.DIAL: FaultSignature(
                (
                    P("cpu_user", OFFSET, 60.0),
                    P("cpu_idle", OFFSET, -60.0),
                    P("flops", OFFSET, 4.0e9),
                    P("branch_misses", OFFSET, 4.0e6),
                )
            ),
            # maximum CPU frequency halved
            FaultClass.CPUFREQ: FaultSignature((P("cpu_freq", FACTOR, 0.5), P("cycles", FACTOR, 0.5))),
            # page allocations fail half the time
            FaultClass.PAGEFAIL: FaultSignature(
                (P("page_alloc_fail", SPIKE, 60.0, 0.5), P("page_faults", SPIKE, 3000.0, 0.5))
            ),
            # sporadic failed disk operations
            FaultClass.IOERR: FaultSignature(
                (P("disk_io_errors", SPIKE, 10.0, 0.4), P("io_wait", SPIKE, 30.0, 0.4))
            ),
            # write/read-back cycles of a large file with a 2 s sleep
            FaultClass.COPY: FaultSignature(
                (
                    P("disk_write_bytes", PERIODIC, 2.0e8, 1.0, 4, 2),
                    P("disk_read_bytes", PERIODIC, 2.0e8, 1.0, 4, 2),
                    P("io_wait", OFFSET, 20.0),
                )
            ),
        }
    )


def _validate_signatures(spec: NodeSpec, signatures: SignatureSpec) -> None:
    node = {m.name for m in spec.node_metrics}
    core = {m.name for m in spec.core_metrics}
    for fault, sig in signatures.signatures.items():
        for p in sig.perturbations:
            if p.metric not in node and p.metric not in core:
                raise ValueError(f"{fault} signature references unknown metric {p.metric!r}")
            if fault.core_scoped and p.metric not in core:
                raise ValueError(f"core-scoped fault {fault} may only perturb core metrics, not {p.metric!r}")


def _bounds(defs: Sequence[MetricDef]) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([-np.inf if m.lower is None else m.lower for m in defs])
    hi = np.array([np.inf if m.upper is None else m.upper for m in defs])
    return lo, hi


def _load_arrays(tasks, spec: NodeSpec, T: int):
    """Per-second benchmark load per resource, for the node and each core."""
    node = {r: np.zeros(T) for r in RESOURCES}
    core = {r: np.zeros((T, spec.cores)) for r in RESOURCES}
    for t in tasks:
        if t.kind != BENCHMARK:
            continue
        prof = BENCHMARK_PROFILES.get(t.program, {"cpu": 0.5, "mem": 0.5, "io": 0.5})
        sl = slice(t.start, t.end)
        for r in RESOURCES:
            if t.scope is None:
                node[r][sl] = np.maximum(node[r][sl], prof[r])
                core[r][sl, :] = np.maximum(core[r][sl, :], prof[r])
            else:
                node[r][sl] = np.maximum(node[r][sl], prof[r] / spec.cores)
                core[r][sl, t.scope] = np.maximum(core[r][sl, t.scope], prof[r])
    return node, core


def simulate_trace(
    workload: Iterable[WorkloadTask],
    node_spec: NodeSpec,
    signatures: SignatureSpec | None = None,
    rng: np.random.Generator | int | None = 0,
    *,
    total_seconds: int,
) -> tuple[Trace, FaultSchedule, AllocationSchedule]:
    """Simulate ``total_seconds`` of per-second metrics for ``workload``.

    The returned schedules are derived from the workload alone, so the seed
    only changes the noise.
    """
    signatures = default_signatures() if signatures is None else signatures
    _validate_signatures(node_spec, signatures)
    tasks = sorted(workload, key=lambda t: (t.start, t.kind))
    T = int(total_seconds)
    if T <= 0:
        raise ValueError("total_seconds must be positive")
    for t in tasks:
        if t.start < 0 or t.end > T:
            raise ValueError(f"{t.kind} task {t.program}@[{t.start},{t.end}) lies outside the {T}-second trace")
        if t.scope is not None and not 0 <= t.scope < node_spec.cores:
            raise ValueError(f"task scope core {t.scope} does not exist on a {node_spec.cores}-core node")
    schedule, allocation = workload_schedules(tasks)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    nd, cd = node_spec.node_metrics, node_spec.core_metrics
    C = node_spec.cores
    node_load, core_load = _load_arrays(tasks, node_spec, T)

    def base(defs, shape, load):
        mean = np.array([m.mean for m in defs])
        noise = np.array([m.noise for m in defs])
        vals = mean + noise * rng.standard_normal(shape + (len(defs),))
        for j, m in enumerate(defs):
            if m.resource is not None and m.load_gain:
                vals[..., j] += m.load_gain * load[m.resource]
        return vals

    node = base(nd, (T,), node_load)
    core = base(cd, (T, C), core_load)

    node_index = {m.name: j for j, m in enumerate(nd)}
    core_index = {m.name: j for j, m in enumerate(cd)}
    for task in tasks:
        if task.kind != FAULT:
            continue
        sig = signatures.signatures.get(task.fault)
        if sig is None:
            continue
        n = task.duration
        intensity = sig.intensity * (signatures.low_intensity_multiplier if task.low_intensity else 1.0)
        sl = slice(task.start, task.end)
        cores = slice(None) if task.scope is None else slice(task.scope, task.scope + 1)
        # factors act on the undisturbed signal, additive terms come after
        ordered = sorted(sig.perturbations, key=lambda p: p.model != FACTOR)
        for p in ordered:
            mag = p.scaled(intensity)
            if p.model == OFFSET:
                delta = np.full(n, mag)
            elif p.model == TREND:
                delta = mag * np.arange(n, dtype=np.float64)
            elif p.model == SPIKE:
                delta = mag * (rng.random(n) < p.probability)
            elif p.model == PERIODIC:
                delta = mag * ((np.arange(n) % (p.on + p.off)) < p.on)
            if p.metric in node_index:
                j = node_index[p.metric]
                if p.model == FACTOR:
                    node[sl, j] *= mag
                else:
                    node[sl, j] += delta
            else:
                j = core_index[p.metric]
                if p.model == FACTOR:
                    core[sl, cores, j] *= mag
                else:
                    core[sl, cores, j] += delta[:, None]

    nlo, nhi = _bounds(nd)
    clo, chi = _bounds(cd)
    node = np.clip(node, nlo, nhi)
    core = np.clip(core, clo, chi)
    for j, m in enumerate(nd):
        if m.kind == CONSTANT:
            node[:, j] = m.mean
        elif m.kind == COUNTER:
            node[:, j] = 1.0e6 + np.cumsum(node[:, j])
    for j, m in enumerate(cd):
        if m.kind == CONSTANT:
            core[:, :, j] = m.mean
        elif m.kind == COUNTER:
            core[:, :, j] = 1.0e6 + np.cumsum(core[:, :, j], axis=0)

    trace = Trace(
        np.arange(T, dtype=np.int64),
        tuple(m.name for m in nd),
        node,
        tuple(range(C)),
        tuple(m.name for m in cd),
        core,
    )
    return trace, schedule, allocation
