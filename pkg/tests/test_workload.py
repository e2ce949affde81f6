import io
import math

import numpy as np
import pytest
from scipy import stats

from hpcfault.ingest import iter_samples, write_trace
from hpcfault.labeling import FAULTS, FaultClass, per_second_labels
from hpcfault.workload import (
    Constant,
    ExponentiatedWeibull,
    JohnsonSU,
    Normal,
    Perturbation,
    SignatureSpec,
    WorkloadError,
    WorkloadTask,
    benchmark_coverage,
    default_node_spec,
    default_signatures,
    dist_from_dict,
    dist_to_dict,
    generate_workload,
    read_workload,
    sample,
    simulate_trace,
    write_workload,
)
from hpcfault.workload.generator import BENCHMARK, FAULT

N = 100_000


def exponweib_cdf(x, alpha, k, lam):
    return (1.0 - np.exp(-((x / lam) ** k))) ** alpha


def sup_distance(draws, cdf):
    xs = np.sort(draws)
    n = len(xs)
    f = cdf(xs)
    return max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n))


# -- sampling --------------------------------------------------------------


@pytest.mark.parametrize("xi, lam, delta", [(130.0, 50.0, 2.0), (-4.0, 3.0, 0.7), (900.0, 300.0, 1.3)])
def test_johnson_su_median(xi, lam, delta):
    x = sample(JohnsonSU(0.0, delta, xi, lam), np.random.default_rng(0), N)
    assert abs(np.median(x) - xi) <= 0.01 * abs(xi)


def test_johnson_su_matches_scipy_cdf():
    d = JohnsonSU(0.5, 1.5, 10.0, 4.0)
    x = sample(d, np.random.default_rng(1), N)
    ref = stats.johnsonsu(d.gamma, d.delta, loc=d.xi, scale=d.lam).cdf
    assert sup_distance(x, ref) < 0.01


def test_weibull_special_case():
    x = sample(ExponentiatedWeibull(1.0, 1.7, 250.0), np.random.default_rng(2), N)
    assert abs(np.mean(x <= 250.0) - (1 - math.exp(-1))) < 0.01


@pytest.mark.parametrize("alpha, k, lam", [(2.0, 2.0, 170.0), (0.6, 0.9, 40.0), (5.0, 1.2, 1000.0)])
def test_exponweib_cdf(alpha, k, lam):
    x = sample(ExponentiatedWeibull(alpha, k, lam), np.random.default_rng(3), N)
    assert sup_distance(x, lambda v: exponweib_cdf(v, alpha, k, lam)) < 0.02
    # the analytic CDF oracle agrees with scipy's parameterization
    v = np.linspace(1, 3 * lam, 7)
    np.testing.assert_allclose(exponweib_cdf(v, alpha, k, lam), stats.exponweib(alpha, k, scale=lam).cdf(v), rtol=1e-10)


def test_normal_moments():
    x = sample(Normal(600.0, 60.0), np.random.default_rng(4), N)
    assert abs(x.mean() - 600) < 1 and abs(x.std() - 60) < 1


def test_sampling_is_seeded():
    d = JohnsonSU(0, 2, 130, 50)
    a = sample(d, np.random.default_rng(9), 10)
    assert np.array_equal(a, sample(d, np.random.default_rng(9), 10))


@pytest.mark.parametrize(
    "make",
    [
        lambda: JohnsonSU(0, 0, 1, 1),
        lambda: JohnsonSU(0, 1, 1, -1),
        lambda: ExponentiatedWeibull(0, 1, 1),
        lambda: ExponentiatedWeibull(1, -1, 1),
        lambda: ExponentiatedWeibull(1, 1, 0),
        lambda: Normal(0, 0),
    ],
)
def test_invalid_parameters(make):
    with pytest.raises(ValueError):
        make()


def test_distribution_dicts():
    for d in (JohnsonSU(0, 2, 130, 50), ExponentiatedWeibull(2, 2, 170), Normal(1, 2), Constant(5)):
        assert dist_from_dict(dist_to_dict(d)) == d
    with pytest.raises(ValueError, match="kind"):
        dist_from_dict({"kind": "cauchy"})
    with pytest.raises(ValueError):
        dist_from_dict({"kind": "normal", "mu": 1})


# -- workload generation ---------------------------------------------------


def faults_of(tasks):
    return [t for t in tasks if t.kind == FAULT]


def test_single_fault_class():
    tasks = generate_workload(20_000, fault_classes=[FaultClass.LEAK], rng=1)
    assert faults_of(tasks) and all(t.fault is FaultClass.LEAK for t in faults_of(tasks))


def test_degenerate_distributions():
    tasks = generate_workload(1000, Constant(10), Constant(100), rng=0, bench_coverage=0)
    f = faults_of(tasks)
    assert [t.start for t in f] == list(range(0, 1000, 100))
    assert all(t.duration == 10 for t in f)


def test_durations_clip_at_next_start_and_end():
    tasks = generate_workload(250, Constant(500), Constant(100), rng=0, bench_coverage=0)
    assert [(t.start, t.end) for t in faults_of(tasks)] == [(0, 100), (100, 200), (200, 250)]


@pytest.mark.parametrize("seed", range(20))
def test_no_overlap_and_coverage(seed):
    T = 7200
    tasks = generate_workload(T, rng=seed, cores=4)
    f = faults_of(tasks)
    for a, b in zip(f, f[1:]):
        assert a.end <= b.start
    assert all(0 <= t.start and t.end <= T for t in tasks)
    assert 0.70 <= benchmark_coverage(tasks, T) <= 0.80
    for t in f:
        assert (t.scope is not None) == t.fault.core_scoped
        assert t.scope is None or 0 <= t.scope < 4


def test_programs_and_intensity_are_uniform():
    f = faults_of(generate_workload(2_000_000, Constant(10), Constant(20), rng=5, bench_coverage=0, cores=4))
    counts = np.bincount([FAULTS.index(t.fault) for t in f], minlength=8) / len(f)
    assert np.abs(counts - 1 / 8).max() < 0.01
    assert abs(np.mean([t.low_intensity for t in f]) - 0.5) < 0.01
    cores = np.bincount([t.scope for t in f if t.scope is not None], minlength=4)
    assert np.abs(cores / cores.sum() - 0.25).max() < 0.02


def test_bag_draw_balances_pairs():
    f = faults_of(generate_workload(1600, Constant(10), Constant(100), rng=3, bench_coverage=0, program_draw="bag"))
    assert len(f) == 16
    assert {(t.fault, t.low_intensity) for t in f} == {(c, low) for c in FAULTS for low in (False, True)}


def test_generation_is_seeded():
    assert generate_workload(7200, rng=4, cores=4) == generate_workload(7200, rng=4, cores=4)
    assert generate_workload(7200, rng=4, cores=4) != generate_workload(7200, rng=5, cores=4)


def test_non_positive_draws_error_after_retries():
    with pytest.raises(WorkloadError, match="non-positive"):
        generate_workload(100, Constant(-1), Constant(10), rng=0, max_retries=5)


def test_generation_argument_errors():
    with pytest.raises(WorkloadError):
        generate_workload(0)
    with pytest.raises(WorkloadError):
        generate_workload(100, fault_classes=[])
    with pytest.raises(WorkloadError):
        generate_workload(100, fault_classes=[FaultClass.HEALTHY])
    with pytest.raises(WorkloadError):
        generate_workload(100, program_draw="urn")


def test_workload_file_round_trip():
    tasks = generate_workload(3600, rng=2, cores=2)
    buf = io.StringIO()
    write_workload(tasks, buf)
    assert buf.getvalue().splitlines()[0] == "start,duration,kind,program,scope,low_intensity"
    assert read_workload(io.StringIO(buf.getvalue())) == tasks
    with pytest.raises(WorkloadError, match="line 2"):
        read_workload(io.StringIO("start,duration,kind,program,scope,low_intensity\n0,0,fault,leak,node,0\n"))
    with pytest.raises(WorkloadError, match="header"):
        read_workload(io.StringIO("a,b\n"))


# -- simulation ------------------------------------------------------------


SPEC = default_node_spec(50, 4, 0)


def test_default_node_has_requested_metric_count():
    assert SPEC.metric_count == 50 and SPEC.cores == 4
    assert SPEC.counter_metrics


def test_empty_workload_is_baseline_and_healthy():
    tr, sched, alloc = simulate_trace([], SPEC, rng=0, total_seconds=300)
    assert len(tr) == 300 and len(sched) == 0 and not alloc.intervals
    assert np.isfinite(tr.node_values).all() and np.isfinite(tr.core_values).all()
    assert set(per_second_labels(sched, 2, (0, 300))) == {FaultClass.HEALTHY}


def _mean_during(tr, core, metric, lo, hi):
    return tr.core_values[lo:hi, core, tr.core_names.index(metric)].mean()


def test_cpufreq_halves_frequency():
    task = WorkloadTask(FAULT, "cpufreq", 1000, 1000)
    tr, _, _ = simulate_trace([task], SPEC, rng=0, total_seconds=3000)
    base = _mean_during(tr, 0, "cpu_freq", 0, 1000)
    during = _mean_during(tr, 0, "cpu_freq", 1000, 2000)
    assert during / base == pytest.approx(0.5, abs=0.02)


def test_low_intensity_is_milder():
    hi = WorkloadTask(FAULT, "memeater", 100, 500)
    lo = WorkloadTask(FAULT, "memeater", 100, 500, low_intensity=True)
    idx = SPEC.node_metrics.index(next(m for m in SPEC.node_metrics if m.name == "mem_used"))
    shift = []
    for t in (hi, lo):
        tr, _, _ = simulate_trace([t], SPEC, rng=0, total_seconds=700)
        shift.append(tr.node_values[100:600, idx].mean() - tr.node_values[:100, idx].mean())
    assert shift[1] == pytest.approx(0.5 * shift[0], rel=0.1)


def test_core_fault_leaves_other_cores_alone():
    task = WorkloadTask(FAULT, "ddot", 0, 5000, scope=2)
    tr, _, _ = simulate_trace([task], SPEC, rng=1, total_seconds=5000)
    ref, _, _ = simulate_trace([], SPEC, rng=2, total_seconds=5000)
    for j, m in enumerate(SPEC.core_metrics):
        if m.kind == "constant":
            continue
        for core in (0, 1, 3):
            a, b = tr.core_values[:, core, j], ref.core_values[:, core, j]
            if m.kind == "counter":
                a, b = np.diff(a), np.diff(b)
            se = math.sqrt(a.var() / len(a) + b.var() / len(b)) + 1e-12
            assert abs(a.mean() - b.mean()) < 5 * se, (m.name, core)
    j = [m.name for m in SPEC.core_metrics].index("cpu_user")
    assert tr.core_values[:, 2, j].mean() > tr.core_values[:, 0, j].mean() + 30


def test_simulation_determinism_and_seed_effects():
    tasks = generate_workload(1800, rng=0, cores=4)
    a = simulate_trace(tasks, SPEC, rng=7, total_seconds=1800)
    b = simulate_trace(tasks, SPEC, rng=7, total_seconds=1800)
    c = simulate_trace(tasks, SPEC, rng=8, total_seconds=1800)
    assert a[0] == b[0] and a[1] == b[1]
    assert not np.array_equal(a[0].node_values, c[0].node_values)
    assert a[1] == c[1] and a[2] == c[2]


def test_schedule_round_trips_to_labels():
    tasks = generate_workload(3600, rng=3, cores=4)
    tr, sched, alloc = simulate_trace(tasks, SPEC, rng=0, total_seconds=3600)
    for core in range(4):
        want = ["healthy"] * 3600
        for t in tasks:
            if t.kind == FAULT and (t.scope is None or t.scope == core):
                want[t.start : t.end] = [t.program] * t.duration
        assert [c.value for c in per_second_labels(sched, core, (0, 3600))] == want
    assert [(i.start, i.end) for i in alloc.intervals] == [(t.start, t.end) for t in tasks if t.kind == BENCHMARK]


def test_simulated_trace_parses_back():
    tr, _, _ = simulate_trace(generate_workload(200, rng=0, cores=4), SPEC, rng=0, total_seconds=200)
    buf = io.StringIO()
    write_trace(tr, buf)
    samples = list(iter_samples(io.StringIO(buf.getvalue())))
    assert len(samples) == 200


def test_task_outside_trace_is_an_error():
    with pytest.raises(ValueError, match="outside"):
        simulate_trace([WorkloadTask(FAULT, "leak", 90, 20)], SPEC, total_seconds=100)
    with pytest.raises(ValueError, match="core"):
        simulate_trace([WorkloadTask(FAULT, "ddot", 0, 20, scope=9)], SPEC, total_seconds=100)


def test_signature_spec_validation():
    with pytest.raises(ValueError):
        SignatureSpec(default_signatures().signatures, 0.0)
    with pytest.raises(ValueError):
        Perturbation("x", "wobble", 1.0)
    with pytest.raises(ValueError):
        Perturbation("x", "spike", 1.0, probability=2.0)
    spec = default_signatures()
    assert SignatureSpec.from_dict(spec.to_dict()) == spec
    assert set(spec.signatures) == set(FAULTS)
