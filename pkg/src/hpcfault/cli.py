"""Command-line entry point: ``hpcfault <command> [options]``.

Commands run one pipeline stage each and communicate through files:

    generate-workload  -> workload CSV
    simulate           -> trace, schedule and allocation CSVs + trace metadata
    featurize          -> feature-vector CSV + metadata sidecar
    train              -> JSON model
    evaluate           -> cross-validation reports
    classify           -> label stream on stdout for a trace on stdin

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .classify import ForestParams, ModelBundle, feature_importances, fit_model, load_model, save_model
from .config import ConfigError, RunConfig, load_config
from .evaluate import SHUFFLED, cross_validate, plan_folds
from .features import FeatureWriter, read_feature_vectors
from .ingest import (
    AllocationSchedule,
    PostProcessConfig,
    iter_samples,
    parse_trace,
    read_allocation,
    write_allocation,
    write_trace,
)
from .labeling import LABELING_METHODS, class_order, read_schedule, write_schedule
from .pipeline import StreamClassifier, featurize, pipeline_metadata
from .workload import generate_workload, read_workload, simulate_trace, write_workload

USAGE_ERROR = 1
DATA_ERROR = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _dump_json(doc, path: Path) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def _path(args, cfg: RunConfig, key: str, required: bool = True) -> Path | None:
    val = getattr(args, key, None) or cfg.paths.get(key)
    if val is None and required:
        raise UsageError(f"no {key} path: pass --{key} or set paths.{key} in the config")
    return None if val is None else Path(val)


def _out(args, cfg: RunConfig, key: str, default: str | None = None) -> Path:
    val = args.out or cfg.paths.get(key) or default
    if val is None:
        raise UsageError(f"no output path: pass --out or set paths.{key} in the config")
    return Path(val)


def _seeded(cfg: RunConfig, args, name: str) -> int:
    return int(args.seed) if args.seed is not None else cfg.seed_for(name)


def _read_allocation(path: Path | None) -> AllocationSchedule:
    if path is None:
        return AllocationSchedule()
    with open(path, newline="", encoding="utf-8") as fh:
        return read_allocation(fh)


# -- commands --------------------------------------------------------------


def cmd_generate_workload(args, cfg: RunConfig) -> int:
    out = _out(args, cfg, "workload", "workload.csv")
    seed = _seeded(cfg, args, "workload")
    w = cfg.workload
    tasks = generate_workload(
        w.total_seconds,
        w.fault_duration,
        w.fault_interarrival,
        w.bench_duration,
        w.bench_interarrival,
        w.fault_classes,
        np.random.default_rng(seed),
        cores=w.cores,
        benchmarks=w.benchmarks,
        bench_coverage=w.bench_coverage,
        coverage_tolerance=w.coverage_tolerance,
        program_draw=w.program_draw,
    )
    with open(out, "w", newline="", encoding="utf-8") as fh:
        write_workload(tasks, fh)
    print(json.dumps({"seed": seed, "workload": w.to_dict(), "tasks": len(tasks)}, sort_keys=True, indent=1))
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    wl_path = _path(args, cfg, "workload")
    out = _out(args, cfg, "trace_dir", ".")
    out.mkdir(parents=True, exist_ok=True)
    seed = _seeded(cfg, args, "simulate")
    with open(wl_path, newline="", encoding="utf-8") as fh:
        tasks = read_workload(fh)
    spec = cfg.node_spec()
    sigs = cfg.signature_spec()
    trace, schedule, allocation = simulate_trace(
        tasks, spec, sigs, np.random.default_rng(seed), total_seconds=cfg.workload.total_seconds
    )
    with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        write_trace(trace, fh)
    with open(out / "schedule.csv", "w", newline="", encoding="utf-8") as fh:
        write_schedule(schedule, fh)
    with open(out / "allocation.csv", "w", newline="", encoding="utf-8") as fh:
        write_allocation(allocation, fh)
    meta = {
        "seed": seed,
        "total_seconds": cfg.workload.total_seconds,
        "counter_metrics": sorted(spec.counter_metrics),
        "node_spec": spec.to_dict(),
        "signatures": sigs.to_dict(),
    }
    _dump_json(meta, _sidecar(out / "trace.csv"))
    print(f"wrote {len(trace)} seconds x {len(trace.cores)} cores, {len(schedule)} faults to {out}")
    return 0


def cmd_featurize(args, cfg: RunConfig) -> int:
    trace_path = _path(args, cfg, "trace")
    schedule_path = _path(args, cfg, "schedule", required=False)
    alloc_path = _path(args, cfg, "allocation", required=False)
    out = _out(args, cfg, "features", "features.csv")
    labeling = args.labeling or cfg.labeling

    counters = cfg.counter_metrics
    if counters is None:
        side = _sidecar(trace_path)
        counters = tuple(json.loads(side.read_text(encoding="utf-8"))["counter_metrics"]) if side.exists() else ()
    pp = PostProcessConfig(frozenset(counters), frozenset(cfg.drop_metrics))

    with open(trace_path, newline="", encoding="utf-8") as fh:
        trace = parse_trace(fh)
    schedule = None
    if schedule_path is not None:
        with open(schedule_path, newline="", encoding="utf-8") as fh:
            schedule = read_schedule(fh)
    allocation = _read_allocation(alloc_path)

    res = featurize(trace, pp, allocation, cfg.window, schedule, labeling)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = FeatureWriter(fh)
        for v in res.vectors:
            writer.write(v)
    meta = pipeline_metadata(cfg.window, pp, labeling if schedule is not None else None, res.removed)
    meta["vectors"] = writer.count
    meta["ambiguous"] = writer.ambiguous
    _dump_json(meta, _sidecar(out))
    frac = writer.ambiguous / writer.count if writer.count else 0.0
    print(f"vectors: {writer.count}")
    print(f"ambiguous_fraction: {frac:.4f}")
    return 0


def _load_vectors(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        vectors = read_feature_vectors(fh)
    if not vectors:
        raise ValueError(f"{path}: no feature vectors")
    side = _sidecar(path)
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    return vectors, meta


def _forest_seeded(cfg: RunConfig, args):
    params = cfg.classifier
    if isinstance(params, ForestParams):
        params = replace(params, seed=_seeded(cfg, args, "forest"))
    return params


def cmd_train(args, cfg: RunConfig) -> int:
    feat_path = _path(args, cfg, "features")
    out = _out(args, cfg, "model", "model.json")
    vectors, meta = _load_vectors(feat_path)
    if any(v.label is None for v in vectors):
        raise ValueError(f"{feat_path}: training needs labeled vectors")
    params = _forest_seeded(cfg, args)
    X = np.stack([v.values for v in vectors])
    y = [v.label for v in vectors]
    model = fit_model(X, y, params, classes=class_order(y))
    names = vectors[0].names
    meta = {k: meta[k] for k in ("window", "counter_metrics", "labeling", "removed_constant_metrics") if k in meta}
    save_model(ModelBundle(model, names, meta, params), out)

    imp = feature_importances(model)
    top = sorted(range(len(imp)), key=lambda i: (-imp[i], i))[:10]
    print(f"trained on {len(vectors)} vectors, {len(names)} features; top features:")
    for i in top:
        print(f"{imp[i]:.6f}\t{names[i]}")
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    feat_path = _path(args, cfg, "features")
    schedule_path = _path(args, cfg, "schedule", required=False)
    out = _out(args, cfg, "report", "report")
    ev = cfg.evaluation
    vectors, meta = _load_vectors(feat_path)
    file_labeling = meta.get("labeling")
    schedule = None
    if schedule_path is not None:
        with open(schedule_path, newline="", encoding="utf-8") as fh:
            schedule = read_schedule(fh)
    window_length = int(meta.get("window", {}).get("length_seconds", cfg.window.length_seconds))
    params = _forest_seeded(cfg, args)
    fold_seed = cfg.seed_for("folds")

    runs, tables, csv_rows = [], [], ["labeling,fold_mode,exclude_ambiguous,class,precision,recall,fscore,support"]
    for labeling in ev.labelings:
        relabel = None
        if labeling != file_labeling:
            if schedule is None:
                raise ValueError(f"labeling {labeling!r} differs from the feature file's; pass --schedule to relabel")
            relabel = labeling
        for mode in ev.fold_modes:
            plan = plan_folds(len(vectors), ev.k, mode, fold_seed if mode == SHUFFLED else None)
            for excl in ev.exclude_ambiguous:
                rep = cross_validate(
                    vectors,
                    params,
                    plan,
                    relabel,
                    excl,
                    schedule=schedule,
                    window_length=window_length,
                    average=ev.average,
                )
                rep.settings["labeling"] = labeling
                runs.append(rep.to_dict())
                tables.append(f"# labeling={labeling} folds={mode} exclude_ambiguous={str(excl).lower()}\n{rep.to_table()}")
                for r in rep.rows():
                    csv_rows.append(
                        f"{labeling},{mode},{int(excl)},{r['class']},{r['precision']!r},{r['recall']!r},{r['fscore']!r},{r['support']}"
                    )
    out.mkdir(parents=True, exist_ok=True)
    _dump_json({"runs": runs}, out / "report.json")
    (out / "per_class.csv").write_text("\n".join(csv_rows) + "\n", encoding="utf-8")
    text = "\n\n".join(tables) + "\n"
    (out / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_classify(args, cfg: RunConfig) -> int:
    model_path = _path(args, cfg, "model")
    alloc_path = _path(args, cfg, "allocation", required=False)
    bundle = load_model(model_path)
    allocation = _read_allocation(alloc_path)
    stream = sys.stdin
    out = sys.stdout
    clf = None
    for sample in iter_samples(stream):
        if clf is None:
            cores = sorted({c for c, _ in sample.core_values}) or [0]
            clf = StreamClassifier(bundle, cores, allocation)
        for end, core, label in clf.push(sample):
            out.write(f"{end},{core},{getattr(label, 'value', label)}\n")
    out.flush()
    return 0


COMMANDS = {
    "generate-workload": cmd_generate_workload,
    "simulate": cmd_simulate,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "classify": cmd_classify,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hpcfault", description="Fault detection on HPC node metric traces.")
    p.add_argument("--version", action="version", version=f"hpcfault {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_, *paths, labeling=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--seed", type=int, help="seed for this command's random stream")
        sp.add_argument("--out", help="output path")
        for key in paths:
            sp.add_argument(f"--{key}", help=f"{key} file (overrides paths.{key})")
        if labeling:
            sp.add_argument("--labeling", choices=LABELING_METHODS)
        return sp

    add("generate-workload", "draw a random workload schedule")
    add("simulate", "simulate a metric trace for a workload (--out is a directory)", "workload")
    add("featurize", "turn a trace into labeled feature vectors", "trace", "schedule", "allocation", labeling=True)
    add("train", "train a classifier on a feature file", "features")
    add("evaluate", "cross-validate on a feature file (--out is a directory)", "features", "schedule")
    add("classify", "label a metric stream read from stdin", "model", "allocation")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"hpcfault {args.command}: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"hpcfault {args.command}: error: {msg}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
