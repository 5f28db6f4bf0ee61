"""Command line interface: ``generate``, ``run``, ``compare`` and ``metrics``.

Exit codes: 0 success, 2 usage or configuration error, 1 internal error.
The default output root is ``$CBDA_OUTPUT_ROOT`` (falls back to ``./runs``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .core import ActiveLabelStore
from .errors import CBDAError, ConfigError, EmptySelectionError
from .heuristics import HEURISTICS
from .metrics import imbalance_report, selection_histogram
from .persistence import (
    RunManifest,
    load_ground_truth,
    read_active_labels,
    save_ground_truth,
    write_active_labels,
)
from .scenario import LOOP_STRATEGIES, GroundTruth, generate_ground_truth, run_loop

OUTPUT_ROOT_ENV = "CBDA_OUTPUT_ROOT"
LOCK_NAME = ".cbda.lock"

GROUND_TRUTH_FILE = "ground_truth.npy"
MANIFEST_FILE = "manifest.json"
SCENARIO_MANIFEST_FILE = "scenario_manifest.json"
SUMMARY_FILE = "summary.json"
ITERATIONS_FILE = "iterations.csv"
CLASSES_FILE = "classes.csv"
HISTOGRAM_FILE = "histogram.csv"

COMPARE_COLUMNS = ("run", "strategy", "heuristic", "budget", "imbalance_score", "min_class_count", "max_min_ratio")


class UsageError(Exception):
    """Reported with exit code 2."""


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


@contextmanager
def locked(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UsageError(f"{directory} is locked by another process (remove {lock} if stale)")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield directory
    finally:
        lock.unlink(missing_ok=True)


def _load(args, overrides=None):
    return load_config(args.config, overrides)


def _scenario_manifest(cfg) -> RunManifest:
    return RunManifest(
        config_hash=cfg.config_hash,
        scenario_hash=cfg.scenario_hash,
        seed=cfg.scenario["seed"],
        strategy=None,
        heuristic=None,
        schedule={},
        artifacts={"ground_truth": GROUND_TRUTH_FILE},
        tool_version=__version__,
        extra={"scenario": cfg.scenario},
    )


def _write_scenario(cfg, out: Path) -> GroundTruth:
    gt = generate_ground_truth(cfg.scenario_config())
    save_ground_truth(gt.maps, out / GROUND_TRUTH_FILE)
    _scenario_manifest(cfg).write(out / SCENARIO_MANIFEST_FILE)
    return gt


def _ensure_scenario(cfg, out: Path) -> GroundTruth:
    """Reuse ground truth already in ``out`` when its scenario hash matches."""
    manifest_path = out / SCENARIO_MANIFEST_FILE
    if manifest_path.exists() and (out / GROUND_TRUTH_FILE).exists():
        if RunManifest.read(manifest_path).scenario_hash == cfg.scenario_hash:
            return GroundTruth(load_ground_truth(out / GROUND_TRUTH_FILE))
    return _write_scenario(cfg, out)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    cfg = _load(args, {"scenario.seed": args.seed})
    out = Path(args.out) if args.out else output_root() / f"scenario-{cfg.scenario_hash[:12]}"
    with locked(out):
        _write_scenario(cfg, out)
    print(out)
    return 0


def cmd_run(args) -> int:
    overrides = {
        "run.strategy": args.strategy,
        "run.heuristic": args.heuristic,
        "run.count_mode": args.count_mode,
        "run.workers": args.workers,
        "schedule.budget_fraction": args.budget,
        "schedule.num_al_iterations": args.iterations,
        "scenario.seed": args.seed,
    }
    if args.pin_weights:
        overrides["run.pin_weights"] = True
    if args.binary:
        overrides["run.binary_labels"] = True
    cfg = _load(args, overrides)
    run = cfg.run
    out = Path(args.out) if args.out else output_root() / (
        f"{run['strategy']}-{run['heuristic']}-b{cfg.budget_fraction:g}-s{cfg.scenario['seed']}"
    )
    label_file = "active_labels.bin" if run["binary_labels"] else "active_labels.tsv"
    manifest = RunManifest(
        config_hash=cfg.config_hash,
        scenario_hash=cfg.scenario_hash,
        seed=cfg.scenario["seed"],
        strategy=run["strategy"],
        heuristic=run["heuristic"],
        schedule=dict(cfg.schedule, noise_schedule=cfg.scenario["noise_schedule"]),
        artifacts={
            "active_labels": label_file,
            "iterations": ITERATIONS_FILE,
            "classes": CLASSES_FILE,
            "histogram": HISTOGRAM_FILE,
            "summary": SUMMARY_FILE,
            "ground_truth": GROUND_TRUTH_FILE,
        },
        tool_version=__version__,
        extra={"count_mode": run["count_mode"], "pin_weights": run["pin_weights"]},
    )
    mid = manifest.manifest_id

    with locked(out):
        gt = _ensure_scenario(cfg, out)
        shape = cfg.dataset_shape()
        if cfg.budget_fraction == 0:
            # degenerate run: nothing is ever selected
            store, report = ActiveLabelStore.for_shape(shape), None
        else:
            report, store = run_loop(
                cfg.scenario_config(), cfg.budget_schedule(), run["strategy"], run["heuristic"],
                count_mode=run["count_mode"], pin_weights=run["pin_weights"],
                histogram_bins=run["histogram_bins"], radius=run["radius"], workers=run["workers"],
                ground_truth=gt,
            )
        manifest.write(out / MANIFEST_FILE)
        write_active_labels(store, out / label_file, mid, binary=run["binary_labels"])
        _write_iterations_csv(out / ITERATIONS_FILE, report, shape.num_classes, mid)
        _write_classes_csv(out / CLASSES_FILE, store, cfg, mid)
        _write_histogram_csv(out / HISTOGRAM_FILE, store, run["histogram_bins"], mid)
        summary = _summary(cfg, manifest, store, report)
        (out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(out)
    return 0


def cmd_compare(args) -> int:
    if len(args.run_dirs) < 2:
        raise UsageError("compare needs at least two run directories")
    summaries = []
    for d in args.run_dirs:
        path = Path(d) / SUMMARY_FILE
        if not path.exists():
            raise UsageError(f"{d}: no {SUMMARY_FILE}; is this a completed run?")
        summaries.append((d, json.loads(path.read_text())))
    hashes = {s["scenario_hash"] for _, s in summaries}
    if len(hashes) != 1:
        raise UsageError("runs were produced from different scenarios (scenario hashes differ)")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_COLUMNS)
    for d, s in summaries:
        writer.writerow([
            d, s["strategy"], s["heuristic"], s["budget_fraction"], _fmt(s["imbalance_score"]),
            s["min_class_count"], _fmt(s["max_min_ratio"]),
        ])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_metrics(args) -> int:
    target = Path(args.path)
    if target.is_dir():
        manifest = RunManifest.read(target / MANIFEST_FILE)
        target = target / manifest.artifacts["active_labels"]
    store, header = read_active_labels(target)
    if len(store) == 0:
        raise EmptySelectionError(f"{target}: active label is empty; imbalance is undefined")
    rep = imbalance_report(store, args.mode)
    hist, edges = selection_histogram(store, num_bins=args.bins)
    doc = {
        "source": str(target),
        "manifest": header.get("manifest", ""),
        "count_mode": args.mode,
        "total_selected": len(store),
        "per_class_counts": rep.per_class_counts.tolist(),
        "imbalance_score": rep.imbalance_score,
        "kl_to_uniform": rep.kl_to_uniform,
        "min_class_count": rep.min_class_count,
        "max_min_ratio": _json_num(rep.max_min_ratio),
        "histogram": {"edges": edges.tolist(), "counts": hist.tolist()},
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# report writers


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return repr(float(value))


def _json_num(value):
    return "inf" if isinstance(value, float) and math.isinf(value) else value


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_iterations_csv(path: Path, report, C: int, mid: str) -> None:
    header = [
        "manifest_id", "iteration", "noise_level", "budget_requested", "budget_used",
        "cumulative_selected", "imbalance_score", "pseudo_accuracy",
        *[f"count_c{c}" for c in range(C)], *[f"weight_c{c}" for c in range(C)],
    ]
    rows = []
    for r in (report.iterations if report else []):
        weights = r.weights or [1.0] * C
        rows.append([
            mid, r.iteration, _fmt(r.noise_level), r.budget_requested, r.budget_used,
            r.cumulative_selected, _fmt(r.imbalance_score), _fmt(r.pseudo_accuracy),
            *r.cumulative_counts, *[_fmt(w) for w in weights],
        ])
    _write_csv(path, header, rows)


def _write_classes_csv(path: Path, store: ActiveLabelStore, cfg, mid: str) -> None:
    counts = store.class_counts()
    total = counts.sum()
    goal = cfg.schedule["goal_distribution"] or [1.0 / len(counts)] * len(counts)
    rows = [
        [mid, c, int(n), _fmt(n / total) if total else "", _fmt(goal[c])]
        for c, n in enumerate(counts)
    ]
    _write_csv(path, ["manifest_id", "class_id", "count", "proportion", "goal"], rows)


def _write_histogram_csv(path: Path, store: ActiveLabelStore, bins: int, mid: str) -> None:
    counts, edges = selection_histogram(store, num_bins=bins)
    rows = [[mid, _fmt(edges[b]), _fmt(edges[b + 1]), int(counts[b])] for b in range(bins)]
    _write_csv(path, ["manifest_id", "bin_lo", "bin_hi", "num_images"], rows)


def _summary(cfg, manifest: RunManifest, store: ActiveLabelStore, report) -> dict:
    counts = store.class_counts()
    doc = {
        "manifest_id": manifest.manifest_id,
        "scenario_hash": cfg.scenario_hash,
        "config_hash": cfg.config_hash,
        "strategy": cfg.run["strategy"],
        "heuristic": cfg.run["heuristic"],
        "count_mode": cfg.run["count_mode"],
        "budget_fraction": cfg.budget_fraction,
        "num_al_iterations": cfg.schedule["num_al_iterations"],
        "noise_schedule": cfg.scenario["noise_schedule"],
        "seed": cfg.scenario["seed"],
        "total_selected": len(store),
        "per_class_counts": counts.tolist(),
        "imbalance_score": None,
        "kl_to_uniform": None,
        "min_class_count": int(counts.min()),
        "max_min_ratio": None,
        "per_image_fraction_variance": float(np.var(store.per_image_counts() / store.shape.pixels_per_image)),
        "iterations": [],
    }
    if len(store):
        rep = imbalance_report(store)
        doc.update(
            imbalance_score=rep.imbalance_score,
            kl_to_uniform=rep.kl_to_uniform,
            max_min_ratio=_json_num(rep.max_min_ratio),
        )
    if report is not None:
        doc["iterations"] = [
            {
                "iteration": r.iteration,
                "noise_level": r.noise_level,
                "budget_requested": r.budget_requested,
                "budget_used": r.budget_used,
                "cumulative_selected": r.cumulative_selected,
                "cumulative_counts": r.cumulative_counts,
                "weights": r.weights,
                "imbalance_score": r.imbalance_score,
                "pseudo_accuracy": r.pseudo_accuracy,
                "histogram": r.histogram,
            }
            for r in report.iterations
        ]
    return doc


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbda", description="Class-balanced pixel acquisition on synthetic scenarios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write ground-truth maps for a scenario")
    gen.add_argument("config")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="run the AL loop with one strategy")
    run.add_argument("config")
    run.add_argument("--strategy", type=str.lower, choices=[s.lower() for s in LOOP_STRATEGIES])
    run.add_argument("--heuristic", choices=HEURISTICS)
    run.add_argument("--budget", type=float, help="total AL budget as a fraction of all pixels")
    run.add_argument("--iterations", type=int, help="number of AL iterations")
    run.add_argument("--seed", type=int)
    run.add_argument("--count-mode", choices=("ground_truth", "pseudo"))
    run.add_argument("--pin-weights", action="store_true", help="force all class weights to 1")
    run.add_argument("--binary", action="store_true", help="write the binary active-label variant")
    run.add_argument("--workers", type=int)
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="tabulate imbalance across completed runs")
    cmp_.add_argument("run_dirs", nargs="+")
    cmp_.add_argument("--out", help="also write the table to this CSV file")
    cmp_.set_defaults(func=cmd_compare)

    met = sub.add_parser("metrics", help="imbalance report for a run directory or active-label file")
    met.add_argument("path")
    met.add_argument("--mode", choices=("ground_truth", "pseudo"), default="ground_truth")
    met.add_argument("--bins", type=int, default=10)
    met.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"cbda {args.command}: config error{where}: {exc}", file=sys.stderr)
        return 2
    except (UsageError, CBDAError, FileNotFoundError) as exc:
        print(f"cbda {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"cbda {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
