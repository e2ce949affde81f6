"""Run configuration for the command-line pipeline.

A config is one JSON object; every section is optional and falls back to
the defaults below. Example (the keys shown are all that exist)::

    {
      "seed": 0,
      "seeds": {"workload": 1, "simulate": 2, "forest": 3, "folds": 4},
      "workload": {
        "total_seconds": 7200, "cores": 4,
        "fault_duration": {"kind": "johnsonsu", "gamma": 0, "delta": 2, "xi": 130, "lam": 50},
        "fault_interarrival": {"kind": "exponweib", "alpha": 2, "k": 2, "lam": 170},
        "bench_duration": {"kind": "normal", "mu": 600, "sigma": 60},
        "bench_interarrival": {"kind": "normal", "mu": 800, "sigma": 60},
        "fault_classes": ["leak", "ddot"],
        "benchmarks": ["dgemm", "stream"],
        "bench_coverage": 0.75, "coverage_tolerance": 0.05,
        "program_draw": "bag"
      },
      "node": {"n_metrics": 50, "seed": 0},
      "signatures": null,
      "postprocess": {"counter_metrics": null, "drop_metrics": []},
      "window": {"length_seconds": 60, "step_seconds": 10},
      "labeling": "mode",
      "classifier": {"kind": "forest", "n_trees": 30, "features_per_split": "sqrt",
                     "bootstrap": true, "max_depth": null, "min_samples_split": 2},
      "evaluation": {"k": 5, "labelings": ["mode", "recent"],
                     "fold_modes": ["time_ordered", "shuffled"],
                     "exclude_ambiguous": [false, true], "average": "macro"},
      "paths": {"workload": "workload.csv", "trace": "trace.csv", ...}
    }

``node`` may instead hold a full node spec (``cores``, ``node_metrics``,
``core_metrics``) and ``signatures`` a full signature table; ``null``
selects the built-in defaults. ``counter_metrics: null`` means "read them
from the trace's metadata sidecar". Named seeds default to ``seed``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .classify import ForestParams, TreeParams
from .evaluate import AVERAGES, SHUFFLED, TIME_ORDERED
from .features import WindowSpec
from .labeling import FAULTS, LABELING_METHODS, FaultClass
from .workload import NodeSpec, SignatureSpec, default_node_spec, default_signatures, dist_from_dict, dist_to_dict
from .workload.distributions import DistributionSpec
from .workload.generator import (
    BENCHMARKS,
    DEFAULT_BENCH_DURATION,
    DEFAULT_BENCH_INTERARRIVAL,
    DEFAULT_FAULT_DURATION,
    DEFAULT_FAULT_INTERARRIVAL,
)

SEED_NAMES = ("workload", "simulate", "forest", "folds")
PATH_KEYS = ("workload", "trace", "schedule", "allocation", "features", "model", "report")


class ConfigError(ValueError):
    pass


def _check_keys(section: str, doc: Mapping, allowed) -> None:
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config section {section!r} must be an object")
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(extra)}")


@dataclass(frozen=True)
class WorkloadConfig:
    total_seconds: int = 7200
    cores: int = 4
    fault_duration: DistributionSpec = DEFAULT_FAULT_DURATION
    fault_interarrival: DistributionSpec = DEFAULT_FAULT_INTERARRIVAL
    bench_duration: DistributionSpec = DEFAULT_BENCH_DURATION
    bench_interarrival: DistributionSpec = DEFAULT_BENCH_INTERARRIVAL
    fault_classes: tuple[FaultClass, ...] = FAULTS
    benchmarks: tuple[str, ...] = BENCHMARKS
    bench_coverage: float = 0.75
    coverage_tolerance: float = 0.05
    program_draw: str = "iid"

    _DISTS = ("fault_duration", "fault_interarrival", "bench_duration", "bench_interarrival")

    @classmethod
    def from_dict(cls, doc: Mapping) -> WorkloadConfig:
        names = [f.name for f in fields(cls)]
        _check_keys("workload", doc, names)
        kw: dict[str, Any] = {}
        for k, v in doc.items():
            if k in cls._DISTS:
                kw[k] = dist_from_dict(v)
            elif k == "fault_classes":
                kw[k] = tuple(FaultClass.parse(x) for x in v)
            elif k == "benchmarks":
                kw[k] = tuple(str(x) for x in v)
            else:
                kw[k] = v
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in self._DISTS:
                v = dist_to_dict(v)
            elif f.name == "fault_classes":
                v = [c.value for c in v]
            elif f.name == "benchmarks":
                v = list(v)
            out[f.name] = v
        return out


@dataclass(frozen=True)
class EvaluationConfig:
    k: int = 5
    labelings: tuple[str, ...] = ("mode",)
    fold_modes: tuple[str, ...] = (TIME_ORDERED, SHUFFLED)
    exclude_ambiguous: tuple[bool, ...] = (False, True)
    average: str = "macro"

    def __post_init__(self):
        for m in self.labelings:
            if m not in LABELING_METHODS:
                raise ConfigError(f"unknown labeling method {m!r}")
        for m in self.fold_modes:
            if m not in (TIME_ORDERED, SHUFFLED):
                raise ConfigError(f"unknown fold mode {m!r}")
        if self.average not in AVERAGES:
            raise ConfigError(f"average must be one of {AVERAGES}")
        if self.k < 2:
            raise ConfigError("evaluation needs k >= 2")

    @classmethod
    def from_dict(cls, doc: Mapping) -> EvaluationConfig:
        _check_keys("evaluation", doc, [f.name for f in fields(cls)])
        kw = dict(doc)
        for key in ("labelings", "fold_modes"):
            if key in kw:
                kw[key] = tuple(str(x) for x in kw[key])
        if "exclude_ambiguous" in kw:
            kw["exclude_ambiguous"] = tuple(bool(x) for x in kw["exclude_ambiguous"])
        return cls(**kw)


def _classifier_from_dict(doc: Mapping) -> ForestParams | TreeParams:
    doc = dict(doc)
    kind = doc.pop("kind", "forest")
    if kind == "forest":
        # the forest seed comes from the named seed table, not this section
        _check_keys("classifier", doc, [f.name for f in fields(ForestParams) if f.name != "seed"])
        return ForestParams(**doc)
    if kind == "tree":
        _check_keys("classifier", doc, ["max_depth", "min_samples_split"])
        return TreeParams(**doc)
    raise ConfigError(f"classifier kind must be 'forest' or 'tree', got {kind!r}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    seeds: Mapping[str, int] = field(default_factory=dict)
    workload: WorkloadConfig = WorkloadConfig()
    node: Mapping = field(default_factory=lambda: {"n_metrics": 50, "seed": 0})
    signatures: Mapping | None = None
    counter_metrics: tuple[str, ...] | None = None
    drop_metrics: tuple[str, ...] = ()
    window: WindowSpec = WindowSpec()
    labeling: str = "mode"
    classifier: ForestParams | TreeParams = ForestParams()
    evaluation: EvaluationConfig = EvaluationConfig()
    paths: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.labeling not in LABELING_METHODS:
            raise ConfigError(f"unknown labeling method {self.labeling!r}")
        for k in self.seeds:
            if k not in SEED_NAMES:
                raise ConfigError(f"unknown seed name {k!r}; expected one of {SEED_NAMES}")
        for k in self.paths:
            if k not in PATH_KEYS:
                raise ConfigError(f"unknown path key {k!r}; expected one of {PATH_KEYS}")

    def seed_for(self, name: str) -> int:
        return int(self.seeds.get(name, self.seed))

    def node_spec(self) -> NodeSpec:
        doc = dict(self.node)
        if "node_metrics" in doc:
            return NodeSpec.from_dict(doc)
        _check_keys("node", doc, ["n_metrics", "seed"])
        return default_node_spec(int(doc.get("n_metrics", 50)), self.workload.cores, int(doc.get("seed", 0)))

    def signature_spec(self) -> SignatureSpec:
        return default_signatures() if self.signatures is None else SignatureSpec.from_dict(self.signatures)

    @classmethod
    def from_dict(cls, doc: Mapping) -> RunConfig:
        _check_keys(
            "config",
            doc,
            ["seed", "seeds", "workload", "node", "signatures", "postprocess", "window", "labeling", "classifier", "evaluation", "paths"],
        )
        try:
            kw: dict[str, Any] = {}
            if "seed" in doc:
                kw["seed"] = int(doc["seed"])
            if "seeds" in doc:
                kw["seeds"] = {str(k): int(v) for k, v in doc["seeds"].items()}
            if "workload" in doc:
                kw["workload"] = WorkloadConfig.from_dict(doc["workload"])
            if "node" in doc:
                kw["node"] = dict(doc["node"])
            if doc.get("signatures") is not None:
                kw["signatures"] = dict(doc["signatures"])
            if "postprocess" in doc:
                pp = doc["postprocess"]
                _check_keys("postprocess", pp, ["counter_metrics", "drop_metrics"])
                if pp.get("counter_metrics") is not None:
                    kw["counter_metrics"] = tuple(pp["counter_metrics"])
                kw["drop_metrics"] = tuple(pp.get("drop_metrics", ()))
            if "window" in doc:
                _check_keys("window", doc["window"], ["length_seconds", "step_seconds"])
                kw["window"] = WindowSpec(**doc["window"])
            if "labeling" in doc:
                kw["labeling"] = str(doc["labeling"])
            if "classifier" in doc:
                kw["classifier"] = _classifier_from_dict(doc["classifier"])
            if "evaluation" in doc:
                kw["evaluation"] = EvaluationConfig.from_dict(doc["evaluation"])
            if "paths" in doc:
                kw["paths"] = {str(k): str(v) for k, v in doc["paths"].items()}
            cfg = cls(**kw)
            # build eagerly so bad node/signature tables fail at load time
            cfg.signature_spec()
            cfg.node_spec()
            return cfg
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError, AttributeError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return RunConfig.from_dict(doc)
