"""Quantum pipeline: k-NN stage feeding the cosine binary classifier.

Each stage runs in one of three modalities: ``classical`` (the equivalent
classical computation), ``statevector`` (exact circuit probabilities) or
``simulation`` (finite-shot sampling of the circuit).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data import unit_norm, unit_norm_rows
from .errors import CapacityError, DimensionError, ParameterError
from .qbc import (
    LabeledNeighbors,
    QbcCircuitSpec,
    build_qbc_state,
    classical_cosine_classifier,
    cosine_vote,
    predict_label,
    qbc_p1_sampled,
    qbc_p1_statevector,
    vote_to_p1_atol,
)
from .qknn import (
    CLASSICAL,
    MODALITIES,
    SIMULATION,
    STATEVECTOR,
    IndexScores,
    NeighborSet,
    QknnCircuitSpec,
    build_qknn_state,
    classical_knn_scores,
    extract_k_nearest,
    qknn_scores_sampled,
    qknn_scores_statevector,
)
from .statevector import MAX_QUBITS

# |sum y_i cos(x_i, x)| at or below this is a zero vote (label +1) in the
# classical and statevector classifier paths.
VOTE_ATOL = 1e-10

KNN_STAGE = 0
CLASSIFIER_STAGE = 1


@dataclass(frozen=True)
class ModalityConfig:
    knn_modality: str = CLASSICAL
    classifier_modality: str = CLASSICAL
    shots: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        for modality in (self.knn_modality, self.classifier_modality):
            if modality not in MODALITIES:
                raise ParameterError(f"unknown modality {modality!r}, expected one of {MODALITIES}")
        if SIMULATION in (self.knn_modality, self.classifier_modality):
            if self.shots is None or int(self.shots) < 1:
                raise ParameterError("simulation modality needs a positive shot count")

    @property
    def stochastic(self) -> bool:
        return SIMULATION in (self.knn_modality, self.classifier_modality)


@dataclass
class PipelinePrediction:
    label: int
    neighbors: NeighborSet
    p1: Optional[float] = None
    second_model_used: bool = False
    diagnostics: Dict[str, object] = field(default_factory=dict)


def stage_rng(seed: int, stream_key: Sequence[int], stage: int, *extra: int) -> np.random.Generator:
    """Independent generator for one stage of one prediction.

    Streams depend only on the key, never on evaluation order, so parallel
    and sequential runs draw the same samples.
    """
    key = tuple(int(v) for v in (*stream_key, stage, *extra))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def knn_stage(train_unit, test_unit, modality: str, shots=None, rng=None, max_qubits: int = MAX_QUBITS) -> IndexScores:
    """Score every training instance; larger means closer to the test instance."""
    if modality == CLASSICAL:
        return classical_knn_scores(train_unit, test_unit, "cosine")
    state = build_qknn_state(train_unit, test_unit, max_qubits)
    spec = QknnCircuitSpec(*np.shape(train_unit))
    if modality == STATEVECTOR:
        return qknn_scores_statevector(state, spec)
    if modality == SIMULATION:
        return qknn_scores_sampled(state, spec, shots, rng)
    raise ParameterError(f"unknown modality {modality!r}")


def classifier_stage(
    neighbors: LabeledNeighbors,
    test_unit,
    modality: str,
    shots=None,
    rng=None,
    max_qubits: int = MAX_QUBITS,
):
    """Return ``(label, p1, diagnostics)`` for one classifier evaluation."""
    k = len(neighbors)
    diagnostics = {}
    if modality == CLASSICAL:
        vote = cosine_vote(neighbors, test_unit)
        diagnostics["zero_vote"] = abs(vote) <= VOTE_ATOL
        return classical_cosine_classifier(neighbors, test_unit, atol=VOTE_ATOL), None, diagnostics
    state = build_qbc_state(neighbors, test_unit, max_qubits)
    spec = QbcCircuitSpec(k, neighbors.features.shape[1])
    if modality == STATEVECTOR:
        p1 = qbc_p1_statevector(state, spec)
        atol = vote_to_p1_atol(VOTE_ATOL, k)
        diagnostics["zero_vote"] = abs(p1 - 0.25) <= atol
        return predict_label(p1, atol=atol), p1, diagnostics
    if modality == SIMULATION:
        p1 = qbc_p1_sampled(state, spec, shots, rng)
        diagnostics["zero_vote"] = p1 == 0.25
        return predict_label(p1), p1, diagnostics
    raise ParameterError(f"unknown modality {modality!r}")


def _check_inputs(train, labels, test):
    train = np.asarray(train, dtype=float)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    test = np.asarray(test, dtype=float).reshape(-1)
    if train.ndim != 2 or train.shape[1] != test.shape[0]:
        raise DimensionError(f"train {train.shape} and test {test.shape} are inconsistent")
    if labels.shape[0] != train.shape[0]:
        raise DimensionError("one label per training instance is required")
    return train, labels, test


def predict_for_k_values(
    train_unit,
    labels,
    test_unit,
    k_values: Sequence[int],
    config: ModalityConfig,
    stream_key: Sequence[int] = (),
    max_qubits: int = MAX_QUBITS,
) -> Dict[int, PipelinePrediction]:
    """Run the pipeline for several k on already unit-normed inputs.

    The k-NN stage does not depend on k, so it is evaluated once and its
    neighbor ranking is reused; each k gets its own classifier stream.
    """
    scores = knn_stage(
        train_unit,
        test_unit,
        config.knn_modality,
        config.shots,
        stage_rng(config.seed, stream_key, KNN_STAGE) if config.knn_modality == SIMULATION else None,
        max_qubits,
    )
    out = {}
    for k in k_values:
        chosen = extract_k_nearest(scores, int(k))
        neighbors = LabeledNeighbors(train_unit[chosen.indices], labels[chosen.indices])
        rng = None
        if config.classifier_modality == SIMULATION:
            rng = stage_rng(config.seed, stream_key, CLASSIFIER_STAGE, int(k))
        label, p1, diagnostics = classifier_stage(
            neighbors, test_unit, config.classifier_modality, config.shots, rng, max_qubits
        )
        diagnostics.update(
            knn_degenerate=scores.degenerate,
            tie_policy_applied=chosen.tie_policy_applied,
            boundary_tie=chosen.boundary_tie,
        )
        out[int(k)] = PipelinePrediction(
            label=label,
            neighbors=chosen,
            p1=p1,
            second_model_used=bool(np.unique(neighbors.labels).size > 1),
            diagnostics=diagnostics,
        )
    return out


def run_pipeline(
    train,
    labels,
    test,
    k: int,
    config: ModalityConfig,
    stream_key: Sequence[int] = (),
    max_qubits: int = MAX_QUBITS,
) -> PipelinePrediction:
    """Classify ``test`` with the k-NN stage followed by the classifier stage.

    ``train`` is expected to be min-max normalized already; unit-norm
    normalization of training rows and the test instance happens here.
    """
    train, labels, test = _check_inputs(train, labels, test)
    return predict_for_k_values(
        unit_norm_rows(train), labels, unit_norm(test), [k], config, stream_key, max_qubits
    )[int(k)]


def run_classifier_standalone(
    train,
    labels,
    test,
    modality: str,
    shots: Optional[int] = None,
    seed: int = 0,
    stream_key: Sequence[int] = (),
    max_qubits: int = MAX_QUBITS,
) -> PipelinePrediction:
    """Apply the classifier to the whole training set, with no k-NN stage."""
    return classifier_standalone_runs(train, labels, test, modality, shots, seed, [stream_key], max_qubits)[0]


def classifier_standalone_runs(
    train,
    labels,
    test,
    modality: str,
    shots: Optional[int] = None,
    seed: int = 0,
    stream_keys: Sequence[Sequence[int]] = ((),),
    max_qubits: int = MAX_QUBITS,
) -> List[PipelinePrediction]:
    """Standalone classifier repeated once per stream key.

    The circuit does not depend on the run, so it is built once and only the
    shot sampling is repeated, each run with its own stream.
    """
    train, labels, test = _check_inputs(train, labels, test)
    if modality not in MODALITIES:
        raise ParameterError(f"unknown modality {modality!r}")
    n, d = train.shape
    spec = QbcCircuitSpec(n, d)
    cap = min(max_qubits, MAX_QUBITS)
    if spec.total_qubits > cap:
        raise CapacityError(f"classifier on {n} training instances needs {spec.total_qubits} qubits, cap is {cap}")
    if modality == SIMULATION and (shots is None or int(shots) < 1):
        raise ParameterError("simulation modality needs a positive shot count")

    train_unit, test_unit = unit_norm_rows(train), unit_norm(test)
    neighbors = LabeledNeighbors(train_unit, labels)
    everyone = NeighborSet(np.arange(n), np.ones(n))
    mixed = bool(np.unique(labels).size > 1)
    if modality != SIMULATION:
        label, p1, diagnostics = classifier_stage(neighbors, test_unit, modality, shots, None, max_qubits)
        return [PipelinePrediction(label, everyone, p1, mixed, dict(diagnostics)) for _ in stream_keys]

    state = build_qbc_state(neighbors, test_unit, max_qubits)
    out = []
    for key in stream_keys:
        p1 = qbc_p1_sampled(state, spec, shots, stage_rng(seed, key, CLASSIFIER_STAGE))
        out.append(PipelinePrediction(predict_label(p1), everyone, p1, mixed, {"zero_vote": p1 == 0.25}))
    return out
