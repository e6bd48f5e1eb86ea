"""Command-line experiment driver.

Verbs: ``run`` executes a config and writes results, ``compare`` pairs two
methods from existing result files, ``validate-config`` only checks a config.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .baselines import load_external_accuracies
from .config import ExperimentConfig, load_config
from .data import Dataset, load_dataset
from .errors import CapacityError, ConfigError, IngestionError, PairingError, PipelineError
from .evaluation import (
    FoldOutcome,
    MethodSpec,
    RunResult,
    evaluate_fold,
    merge_fold_outcomes,
    pair_accuracies,
    stratified_kfold,
    wilcoxon_per_k,
)

log = logging.getLogger("qknn_pipeline")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_PAIRING = 4

SCATTER_COLUMNS = ("method_a", "method_b", "dataset", "fold", "k", "accuracy_a", "accuracy_b")
STATS_COLUMNS = (
    "method_a",
    "method_b",
    "k",
    "n_pairs",
    "n_nonzero",
    "statistic",
    "p_value",
    "test",
    "degenerate",
    "small_sample",
    "mean_a",
    "mean_b",
)


def _fold_task(args):
    method, dataset, fold, cfg_values = args
    k_values, num_folds, fold_seed, runs, seed, shots, max_qubits = cfg_values
    plan = stratified_kfold(dataset.labels, num_folds, fold_seed)
    start = time.perf_counter()
    try:
        outcome = evaluate_fold(method, dataset, plan, fold, k_values, runs, seed, shots, max_qubits)
    except CapacityError as exc:
        return method.name, dataset.name, fold, None, str(exc), time.perf_counter() - start
    return method.name, dataset.name, fold, outcome, None, time.perf_counter() - start


def run_grid(
    cfg: ExperimentConfig,
    datasets: Sequence[Dataset],
    workers: int = 1,
) -> Tuple[List[RunResult], List[dict], List[dict]]:
    """Evaluate every (method, dataset, fold) cell and merge them deterministically.

    Returns results, skipped (method, dataset) pairs and per-cell timings.
    Raises ``CapacityError`` on the first over-budget cell unless the config's
    ``on_capacity`` policy is ``skip``.
    """
    cfg_values = (cfg.k_values, cfg.num_folds, cfg.fold_seed, cfg.runs, cfg.seed, cfg.shots, cfg.max_qubits)
    tasks = [(m, d, f, cfg_values) for m in cfg.methods for d in datasets for f in range(cfg.num_folds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finished = list(pool.map(_fold_task, tasks, chunksize=1))
    else:
        finished = [_fold_task(t) for t in tasks]

    outcomes: Dict[Tuple[str, str], List[FoldOutcome]] = defaultdict(list)
    failures: Dict[Tuple[str, str], str] = {}
    timing = []
    for method_name, dataset_name, fold, outcome, error, seconds in finished:
        timing.append({"method": method_name, "dataset": dataset_name, "fold": fold, "seconds": seconds})
        if error is not None:
            failures.setdefault((method_name, dataset_name), error)
        else:
            outcomes[(method_name, dataset_name)].append(outcome)

    if failures and cfg.on_capacity == "error":
        (method_name, dataset_name), error = sorted(failures.items())[0]
        raise CapacityError(f"{method_name} on {dataset_name}: {error}")

    methods = {m.name: m for m in cfg.methods}
    results = []
    for (method_name, dataset_name), folds in outcomes.items():
        if (method_name, dataset_name) in failures:
            continue
        results.extend(merge_fold_outcomes(methods[method_name], dataset_name, folds, cfg.runs))
    results.sort(key=_result_key)
    skipped = [
        {"method": m, "dataset": d, "reason": reason} for (m, d), reason in sorted(failures.items())
    ]
    return results, skipped, timing


def _result_key(r: RunResult):
    return (r.method, r.dataset, r.k is None, r.k or 0)


def compare_results(results_a: Iterable[RunResult], results_b: Iterable[RunResult], name_a: str, name_b: str):
    """Paired scatter rows and per-k Wilcoxon rows for two methods."""
    pairs = pair_accuracies(results_a, results_b)
    scatter = [
        {
            "method_a": name_a,
            "method_b": name_b,
            "dataset": p.dataset,
            "fold": p.fold,
            "k": "" if p.k is None else p.k,
            "accuracy_a": repr(p.accuracy_a),
            "accuracy_b": repr(p.accuracy_b),
        }
        for p in pairs
    ]
    stats = []
    for k, res in wilcoxon_per_k(pairs).items():
        subset = [p for p in pairs if p.k == k]
        stats.append(
            {
                "method_a": name_a,
                "method_b": name_b,
                "k": "" if k is None else k,
                "n_pairs": len(subset),
                "n_nonzero": res.n,
                "statistic": repr(res.statistic),
                "p_value": repr(res.p_value),
                "test": res.method,
                "degenerate": res.degenerate,
                "small_sample": res.small_sample,
                "mean_a": repr(float(np.mean([p.accuracy_a for p in subset]))),
                "mean_b": repr(float(np.mean([p.accuracy_b for p in subset]))),
            }
        )
    return scatter, stats


def _write_csv(path: Path, columns, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _metadata(cfg: Optional[ExperimentConfig]) -> dict:
    meta = {
        "software": "qknn_pipeline",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if cfg is not None:
        meta["config"] = cfg.to_dict()
    return meta


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> Path:
    datasets = [load_dataset(p) for p in cfg.datasets]
    results, skipped, timing = run_grid(cfg, datasets, workers)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "metadata": _metadata(cfg),
        "skipped": skipped,
        "results": [r.to_dict() for r in results],
    }
    (out / "results.json").write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")

    by_method = defaultdict(list)
    for r in results:
        by_method[r.method].append(r)
    scatter_rows, stats_rows = [], []
    for a, b in cfg.comparisons:
        scatter, stats = compare_results(_drop_skipped(by_method[a], skipped, b), _drop_skipped(by_method[b], skipped, a), a, b)
        scatter_rows.extend(scatter)
        stats_rows.extend(stats)
    _write_csv(out / "scatter.csv", SCATTER_COLUMNS, scatter_rows)
    _write_csv(out / "stats.csv", STATS_COLUMNS, stats_rows)
    _write_csv(out / "timing.csv", ("method", "dataset", "fold", "seconds"), timing)
    return out


def _drop_skipped(results, skipped, other_method):
    """Leave out datasets on which the other method of a comparison was skipped."""
    excluded = {s["dataset"] for s in skipped if s["method"] == other_method}
    return [r for r in results if r.dataset not in excluded]


def load_results(paths: Sequence) -> Dict[str, List[RunResult]]:
    """Read results.json files and external accuracy CSVs, grouped by method."""
    by_method: Dict[str, List[RunResult]] = defaultdict(list)
    for path in map(Path, paths):
        if path.suffix == ".json":
            payload = json.loads(path.read_text(encoding="utf-8"))
            for item in payload["results"]:
                r = RunResult.from_dict(item)
                by_method[r.method].append(r)
        else:
            grouped = defaultdict(dict)
            for row in load_external_accuracies(path):
                grouped[(row.method, row.dataset, row.k)][row.fold] = row.accuracy
            for (method, dataset, k), folds in sorted(grouped.items(), key=lambda kv: str(kv[0])):
                if sorted(folds) != list(range(len(folds))):
                    raise IngestionError(f"{path.name}: folds of {method}/{dataset}/k={k} must be 0..n-1")
                accs = [folds[f] for f in range(len(folds))]
                by_method[method].append(RunResult(method, dataset, k, accs, [], 1))
    return by_method


def compare_files(paths: Sequence, method_a: str, method_b: str, output) -> Path:
    by_method = load_results(paths)
    for name in (method_a, method_b):
        if name not in by_method:
            raise PairingError(f"method {name!r} not found; available: {sorted(by_method)}")
    scatter, stats = compare_results(by_method[method_a], by_method[method_b], method_a, method_b)
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "scatter.csv", SCATTER_COLUMNS, scatter)
    _write_csv(out / "stats.csv", STATS_COLUMNS, stats)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qknn-pipeline", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run the experiment grid of a config file")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--output", type=Path, help="output directory (overrides the config)")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--seed", type=int, help="base RNG seed (overrides the config)")

    cmp_ = sub.add_parser("compare", help="pair two methods from result files")
    cmp_.add_argument("inputs", nargs="+", type=Path, help="results.json files or external accuracy CSVs")
    cmp_.add_argument("--a", dest="method_a", required=True)
    cmp_.add_argument("--b", dest="method_b", required=True)
    cmp_.add_argument("--output", type=Path, default=Path("."))

    val = sub.add_parser("validate-config", help="check a config file without running it")
    val.add_argument("--config", required=True, type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.verb == "compare":
            out = compare_files(args.inputs, args.method_a, args.method_b, args.output)
            print(f"wrote {out / 'scatter.csv'} and {out / 'stats.csv'}")
            return EXIT_OK
        cfg = load_config(args.config)
        if args.verb == "validate-config":
            print(f"config ok: {len(cfg.datasets)} datasets, {len(cfg.methods)} methods")
            return EXIT_OK
        if args.output is not None:
            cfg.output = args.output
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg.seed = args.seed
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = run_experiment(cfg, args.workers)
        print(f"wrote results to {out}")
        return EXIT_OK
    except (ConfigError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except PairingError as exc:
        print(f"pairing error: {exc}", file=sys.stderr)
        return EXIT_PAIRING
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
