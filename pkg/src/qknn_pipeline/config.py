"""Experiment configuration: YAML file, validated before anything runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import yaml

from .errors import ConfigError, PipelineError
from .evaluation import MethodSpec
from .statevector import MAX_QUBITS

TOP_LEVEL_KEYS = {
    "datasets",
    "methods",
    "k_values",
    "num_folds",
    "fold_seed",
    "shots",
    "runs",
    "seed",
    "output",
    "max_qubits",
    "on_capacity",
    "comparisons",
}
METHOD_KEYS = {"name", "kind", "knn_modality", "classifier_modality", "metric"}
CAPACITY_POLICIES = ("error", "skip")


@dataclass
class ExperimentConfig:
    datasets: List[Path]
    methods: List[MethodSpec]
    k_values: List[int] = field(default_factory=lambda: [3, 5, 7, 9])
    num_folds: int = 5
    fold_seed: int = 0
    shots: Optional[int] = 1024
    runs: int = 5
    seed: int = 0
    output: Path = Path("results")
    max_qubits: int = MAX_QUBITS
    on_capacity: str = "error"
    comparisons: List[Tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "datasets": [str(p) for p in self.datasets],
            "methods": [vars(m) for m in self.methods],
            "k_values": self.k_values,
            "num_folds": self.num_folds,
            "fold_seed": self.fold_seed,
            "shots": self.shots,
            "runs": self.runs,
            "seed": self.seed,
            "max_qubits": self.max_qubits,
            "on_capacity": self.on_capacity,
            "comparisons": [list(c) for c in self.comparisons],
        }


def _int(raw, key, minimum=None):
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{key} must be an integer, got {raw!r}")
    if minimum is not None and raw < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {raw}")
    return raw


def _resolve_datasets(entries, base: Path) -> List[Path]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("datasets must be a non-empty list of CSV paths or glob patterns")
    paths = []
    for entry in entries:
        if not isinstance(entry, str):
            raise ConfigError(f"dataset entry must be a string, got {entry!r}")
        pattern = Path(entry) if Path(entry).is_absolute() else base / entry
        if any(ch in entry for ch in "*?["):
            found = sorted(pattern.parent.glob(pattern.name))
            if not found:
                raise ConfigError(f"dataset pattern {entry!r} matched no files")
            paths.extend(found)
        else:
            if not pattern.is_file():
                raise ConfigError(f"dataset file not found: {entry}")
            paths.append(pattern)
    stems = [p.stem for p in paths]
    duplicates = sorted({s for s in stems if stems.count(s) > 1})
    if duplicates:
        raise ConfigError(f"duplicate dataset names: {duplicates}")
    return paths


def parse_config(raw: dict, base: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(raw) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for required in ("datasets", "methods"):
        if required not in raw:
            raise ConfigError(f"missing required key {required!r}")

    datasets = _resolve_datasets(raw["datasets"], base)

    if not isinstance(raw["methods"], list) or not raw["methods"]:
        raise ConfigError("methods must be a non-empty list")
    methods = []
    for entry in raw["methods"]:
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"each method needs at least a name, got {entry!r}")
        bad = sorted(set(entry) - METHOD_KEYS)
        if bad:
            raise ConfigError(f"unknown keys in method {entry['name']!r}: {bad}")
        try:
            methods.append(MethodSpec(**entry))
        except PipelineError as exc:
            raise ConfigError(f"method {entry['name']!r}: {exc}") from None
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError("method names must be unique")

    cfg = ExperimentConfig(datasets, methods)
    if "k_values" in raw:
        if not isinstance(raw["k_values"], list) or not raw["k_values"]:
            raise ConfigError("k_values must be a non-empty list")
        cfg.k_values = sorted({_int(k, "k_values entry", 1) for k in raw["k_values"]})
    cfg.num_folds = _int(raw.get("num_folds", cfg.num_folds), "num_folds", 2)
    cfg.fold_seed = _int(raw.get("fold_seed", cfg.fold_seed), "fold_seed", 0)
    cfg.runs = _int(raw.get("runs", cfg.runs), "runs", 1)
    cfg.seed = _int(raw.get("seed", cfg.seed), "seed", 0)
    cfg.max_qubits = _int(raw.get("max_qubits", cfg.max_qubits), "max_qubits", 1)
    if cfg.max_qubits > MAX_QUBITS:
        raise ConfigError(f"max_qubits cannot exceed {MAX_QUBITS}")
    shots = raw.get("shots", cfg.shots)
    cfg.shots = None if shots is None else _int(shots, "shots", 1)
    if cfg.shots is None and any(m.stochastic for m in methods):
        raise ConfigError("shots is required when a method uses the simulation modality")
    if "output" in raw:
        if not isinstance(raw["output"], str):
            raise ConfigError("output must be a path string")
        cfg.output = base / raw["output"]
    cfg.on_capacity = raw.get("on_capacity", cfg.on_capacity)
    if cfg.on_capacity not in CAPACITY_POLICIES:
        raise ConfigError(f"on_capacity must be one of {CAPACITY_POLICIES}")

    for pair in raw.get("comparisons", []) or []:
        if not isinstance(pair, list) or len(pair) != 2 or not all(isinstance(p, str) for p in pair):
            raise ConfigError(f"each comparison must be a [method_a, method_b] pair, got {pair!r}")
        missing = [p for p in pair if p not in names]
        if missing:
            raise ConfigError(f"comparison refers to unknown methods {missing}")
        cfg.comparisons.append((pair[0], pair[1]))
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    return parse_config(raw, path.parent)
