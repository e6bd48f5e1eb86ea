"""Cross-validation harness, accuracy aggregation and second-model usage."""

from __future__ import annotations

import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .baselines import knn_plus_classifier, majority_vote, nearest_neighbors
from .data import Dataset, apply_minmax, fit_minmax, unit_norm, unit_norm_rows
from .errors import PairingError, ParameterError, StratificationError
from .pipeline import ModalityConfig, classifier_standalone_runs, predict_for_k_values
from .qknn import CLASSICAL, MODALITIES, SIMULATION
from .statevector import MAX_QUBITS
from .stats import WilcoxonResult, wilcoxon_signed_rank

PIPELINE = "pipeline"
CLASSIFIER = "classifier"
KNN = "knn"
KNN_CLASSIFIER = "knn_classifier"
METHOD_KINDS = (PIPELINE, CLASSIFIER, KNN, KNN_CLASSIFIER)
METRICS = ("cosine", "euclidean")

__all__ = [
    "FoldPlan",
    "MethodSpec",
    "RunResult",
    "evaluate_fold",
    "evaluate_method",
    "pair_accuracies",
    "second_model_usage",
    "stratified_kfold",
    "usage_summary",
    "wilcoxon_signed_rank",
    "WilcoxonResult",
]


@dataclass(frozen=True)
class MethodSpec:
    """One evaluated method.

    ``kind`` selects the model: the quantum ``pipeline``, the standalone
    ``classifier`` on the whole training fold, or the classical ``knn``
    majority vote and ``knn_classifier`` baselines (which use ``metric``).
    """

    name: str
    kind: str = PIPELINE
    knn_modality: str = CLASSICAL
    classifier_modality: str = CLASSICAL
    metric: str = "cosine"

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ParameterError(f"unknown method kind {self.kind!r}, expected one of {METHOD_KINDS}")
        for modality in (self.knn_modality, self.classifier_modality):
            if modality not in MODALITIES:
                raise ParameterError(f"unknown modality {modality!r}")
        if self.metric not in METRICS:
            raise ParameterError(f"unknown metric {self.metric!r}")

    @property
    def uses_k(self) -> bool:
        return self.kind != CLASSIFIER

    @property
    def stochastic(self) -> bool:
        if self.kind == PIPELINE:
            return SIMULATION in (self.knn_modality, self.classifier_modality)
        return self.kind == CLASSIFIER and self.classifier_modality == SIMULATION


@dataclass(frozen=True)
class FoldPlan:
    num_folds: int
    seed: int
    fold_assignments: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignments != fold)


def stratified_kfold(labels, num_folds: int, seed: int) -> FoldPlan:
    """Shuffle each class with a seeded generator and deal instances round-robin.

    Classes are dealt in ascending label order and the fold counter carries
    over between classes, so fold sizes differ by at most one.
    """
    labels = np.asarray(getattr(labels, "labels", labels)).reshape(-1)
    if num_folds < 2:
        raise ParameterError(f"num_folds must be >= 2, got {num_folds}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(labels.shape[0], dtype=int)
    counter = 0
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.shape[0] < num_folds:
            raise StratificationError(
                f"class {cls} has {members.shape[0]} instances, fewer than {num_folds} folds"
            )
        for idx in rng.permutation(members):
            assignments[idx] = counter % num_folds
            counter += 1
    return FoldPlan(num_folds, seed, assignments)


def second_model_usage(flags) -> float:
    """Fraction of predictions whose neighbor set mixed both classes."""
    flags = np.asarray(list(flags), dtype=float)
    return float(flags.mean()) if flags.size else 0.0


@dataclass
class RunResult:
    method: str
    dataset: str
    k: Optional[int]
    fold_accuracies: List[float]
    fold_usage: List[float]
    runs: int
    predictions: List[List[List[int]]] = field(default_factory=list)
    fold_diagnostics: List[Dict[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "k": self.k,
            "runs": self.runs,
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "fold_usage": [float(u) for u in self.fold_usage],
            "mean_accuracy": float(np.mean(self.fold_accuracies)),
            "fold_diagnostics": [dict(sorted(d.items())) for d in self.fold_diagnostics],
            "predictions": self.predictions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(
            d["method"],
            d["dataset"],
            d["k"],
            list(d["fold_accuracies"]),
            list(d.get("fold_usage", [])),
            int(d.get("runs", 1)),
            d.get("predictions", []),
            d.get("fold_diagnostics", []),
        )


@dataclass
class FoldOutcome:
    """Everything one (method, dataset, fold) evaluation produced, keyed by k."""

    fold: int
    accuracy: Dict[Optional[int], float]
    usage: Dict[Optional[int], float]
    predictions: Dict[Optional[int], List[List[int]]]
    diagnostics: Dict[Optional[int], Counter]


def dataset_stream_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def _normalized_fold(dataset: Dataset, plan: FoldPlan, fold: int):
    train_idx, test_idx = plan.train_indices(fold), plan.test_indices(fold)
    params = fit_minmax(dataset.features[train_idx])
    return (
        apply_minmax(params, dataset.features[train_idx]),
        dataset.labels[train_idx],
        apply_minmax(params, dataset.features[test_idx]),
        test_idx,
    )


def evaluate_fold(
    method: MethodSpec,
    dataset: Dataset,
    plan: FoldPlan,
    fold: int,
    k_values: Sequence[int],
    runs: int = 1,
    seed: int = 0,
    shots: Optional[int] = None,
    max_qubits: int = MAX_QUBITS,
) -> FoldOutcome:
    """Train on the other folds and predict every test instance of ``fold``."""
    train, train_y, test, test_idx = _normalized_fold(dataset, plan, fold)
    test_y = dataset.labels[test_idx]
    keys = [int(k) for k in k_values] if method.uses_k else [None]
    for k in keys:
        if k is not None and not 1 <= k <= train.shape[0]:
            raise ParameterError(f"k={k} is outside [1, {train.shape[0]}]")
    n_runs = runs if method.stochastic else 1
    data_id = dataset_stream_id(dataset.name)

    labels = {k: np.zeros((n_runs, test_idx.shape[0]), dtype=int) for k in keys}
    mixed = {k: np.zeros((n_runs, test_idx.shape[0]), dtype=bool) for k in keys}
    diagnostics = {k: Counter() for k in keys}

    if method.kind == PIPELINE:
        config = ModalityConfig(method.knn_modality, method.classifier_modality, shots, seed)
        train_unit = unit_norm_rows(train)
        for run in range(n_runs):
            for j, (idx, x) in enumerate(zip(test_idx, test)):
                preds = predict_for_k_values(
                    train_unit, train_y, unit_norm(x), keys, config, (data_id, fold, int(idx), run), max_qubits
                )
                for k, pred in preds.items():
                    labels[k][run, j] = pred.label
                    mixed[k][run, j] = pred.second_model_used
                    diagnostics[k].update(name for name, flag in pred.diagnostics.items() if flag)
    elif method.kind == CLASSIFIER:
        for j, (idx, x) in enumerate(zip(test_idx, test)):
            preds = classifier_standalone_runs(
                train,
                train_y,
                x,
                method.classifier_modality,
                shots,
                seed,
                [(data_id, fold, int(idx), run) for run in range(n_runs)],
                max_qubits,
            )
            for run, pred in enumerate(preds):
                labels[None][run, j] = pred.label
                mixed[None][run, j] = pred.second_model_used
                diagnostics[None].update(name for name, flag in pred.diagnostics.items() if flag)
    else:
        for j, x in enumerate(test):
            for k in keys:
                chosen = nearest_neighbors(train, x, k, method.metric)
                neighbor_y = train_y[chosen.indices]
                if method.kind == KNN:
                    label, tied = majority_vote(neighbor_y)
                    if tied:
                        diagnostics[k]["vote_tie"] += 1
                else:
                    label = knn_plus_classifier(train, train_y, x, k, method.metric)
                labels[k][0, j] = label
                mixed[k][0, j] = np.unique(neighbor_y).size > 1
                if chosen.boundary_tie:
                    diagnostics[k]["boundary_tie"] += 1

    return FoldOutcome(
        fold,
        {k: float(np.mean(labels[k] == test_y)) for k in keys},
        {k: float(mixed[k].mean()) for k in keys},
        {k: labels[k].tolist() for k in keys},
        diagnostics,
    )


def merge_fold_outcomes(method: MethodSpec, dataset_name: str, outcomes: Iterable[FoldOutcome], runs: int) -> List[RunResult]:
    """Combine per-fold outcomes into one RunResult per k, folds in ascending order."""
    outcomes = sorted(outcomes, key=lambda o: o.fold)
    keys = list(outcomes[0].accuracy)
    results = []
    for k in keys:
        results.append(
            RunResult(
                method.name,
                dataset_name,
                k,
                [o.accuracy[k] for o in outcomes],
                [o.usage[k] for o in outcomes],
                runs if method.stochastic else 1,
                [o.predictions[k] for o in outcomes],
                [dict(o.diagnostics[k]) for o in outcomes],
            )
        )
    return results


def evaluate_method(
    method: MethodSpec,
    dataset: Dataset,
    k_values: Sequence[int],
    num_folds: int = 5,
    runs: int = 1,
    fold_seed: int = 0,
    seed: int = 0,
    shots: Optional[int] = None,
    max_qubits: int = MAX_QUBITS,
) -> List[RunResult]:
    """Cross-validate one method on one dataset; stochastic methods are run-averaged per fold."""
    plan = stratified_kfold(dataset.labels, num_folds, fold_seed)
    outcomes = [
        evaluate_fold(method, dataset, plan, fold, k_values, runs, seed, shots, max_qubits)
        for fold in range(num_folds)
    ]
    return merge_fold_outcomes(method, dataset.name, outcomes, runs)


def usage_summary(results: Iterable[RunResult]) -> Dict[int, tuple]:
    """Per-k mean and standard deviation across datasets of each dataset's usage.

    A dataset's usage is the mean of its per-fold usage values.
    """
    per_k: Dict[int, List[float]] = {}
    for r in results:
        per_k.setdefault(r.k, []).append(float(np.mean(r.fold_usage)))
    return {k: (float(np.mean(v)), float(np.std(v))) for k, v in sorted(per_k.items(), key=lambda kv: (kv[0] is None, kv[0]))}


@dataclass(frozen=True)
class PairedAccuracy:
    dataset: str
    fold: int
    k: Optional[int]
    accuracy_a: float
    accuracy_b: float


def _fold_table(records, label):
    table = {}
    for r in records:
        for fold, acc in enumerate(r.fold_accuracies):
            key = (r.dataset, fold, r.k)
            if key in table:
                raise PairingError(f"duplicate entry for {label} at {key}")
            table[key] = float(acc)
    return table


def _broadcast_k(free, other):
    ks = sorted({key[2] for key in other})
    return {(d, f, k): v for (d, f, _), v in free.items() for k in ks}


def pair_accuracies(results_a: Iterable[RunResult], results_b: Iterable[RunResult]) -> List[PairedAccuracy]:
    """Pair per-fold accuracies on (dataset, fold, k).

    A side whose entries have ``k = None`` (no k parameter) pairs with every k
    of the other side.  Any key present on only one side is an error.
    """
    a = _fold_table(results_a, "A")
    b = _fold_table(results_b, "B")
    a_free = all(key[2] is None for key in a)
    b_free = all(key[2] is None for key in b)
    if a_free != b_free:
        a, b = (_broadcast_k(a, b), b) if a_free else (a, _broadcast_k(b, a))
    missing_b = sorted(set(a) - set(b), key=str)
    missing_a = sorted(set(b) - set(a), key=str)
    if missing_a or missing_b:
        parts = []
        if missing_b:
            parts.append(f"missing in B: {missing_b}")
        if missing_a:
            parts.append(f"missing in A: {missing_a}")
        raise PairingError("; ".join(parts))
    keys = sorted(a, key=lambda key: (key[0], key[2] is None, key[2] or 0, key[1]))
    return [PairedAccuracy(d, f, k, a[(d, f, k)], b[(d, f, k)]) for d, f, k in keys]


def wilcoxon_per_k(pairs: Sequence[PairedAccuracy]) -> Dict[Optional[int], WilcoxonResult]:
    by_k: Dict[Optional[int], List[PairedAccuracy]] = {}
    for p in pairs:
        by_k.setdefault(p.k, []).append(p)
    return {
        k: wilcoxon_signed_rank([p.accuracy_a for p in ps], [p.accuracy_b for p in ps])
        for k, ps in sorted(by_k.items(), key=lambda kv: (kv[0] is None, kv[0] or 0))
    }
