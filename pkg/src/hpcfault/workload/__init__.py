from .distributions import (
    Constant,
    DistributionSpec,
    ExponentiatedWeibull,
    JohnsonSU,
    Normal,
    dist_from_dict,
    dist_to_dict,
    sample,
)
from .generator import (
    WorkloadError,
    WorkloadTask,
    benchmark_coverage,
    generate_workload,
    read_workload,
    workload_schedules,
    write_workload,
)
from .simulate import (
    FaultSignature,
    MetricDef,
    NodeSpec,
    Perturbation,
    SignatureSpec,
    default_node_spec,
    default_signatures,
    simulate_trace,
)

__all__ = [
    "Constant",
    "DistributionSpec",
    "ExponentiatedWeibull",
    "FaultSignature",
    "JohnsonSU",
    "MetricDef",
    "NodeSpec",
    "Normal",
    "Perturbation",
    "SignatureSpec",
    "WorkloadError",
    "WorkloadTask",
    "benchmark_coverage",
    "default_node_spec",
    "default_signatures",
    "dist_from_dict",
    "dist_to_dict",
    "generate_workload",
    "read_workload",
    "sample",
    "simulate_trace",
    "workload_schedules",
    "write_workload",
]
