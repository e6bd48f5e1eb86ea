"""Quantum cosine binary classifier.

Qubit layout: q0 is the SWAP-test control, q1 and q2 are the two swapped
qubits, then the index register, the feature register and finally the label
qubit.  q2 = 0 selects the training branch, q2 = 1 the test branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ceil_log2
from .errors import CapacityError, DimensionError, NormalizationError, ParameterError
from .qknn import cosine_similarities
from .statevector import (
    MAX_QUBITS,
    NORM_ATOL,
    QuantumState,
    apply_controlled_h,
    apply_controlled_x,
    apply_fredkin,
    apply_hadamard,
    apply_x,
    initialize_register,
    marginal_array,
    sample_measurements,
    zero_state,
)

THRESHOLD = 0.25


@dataclass(frozen=True)
class QbcCircuitSpec:
    num_train: int
    num_features: int

    @property
    def index_qubits(self) -> int:
        return ceil_log2(self.num_train)

    @property
    def feature_qubits(self) -> int:
        return ceil_log2(self.num_features)

    @property
    def total_qubits(self) -> int:
        return 3 + self.index_qubits + self.feature_qubits + 1

    @property
    def index_register(self) -> range:
        return range(3, 3 + self.index_qubits)

    @property
    def feature_register(self) -> range:
        start = 3 + self.index_qubits
        return range(start, start + self.feature_qubits)

    @property
    def label_qubit(self) -> int:
        return self.total_qubits - 1


@dataclass
class LabeledNeighbors:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DimensionError("one label per neighbor is required")
        if self.labels.shape[0] < 1:
            raise ParameterError("at least one neighbor is required")
        if not set(np.unique(self.labels)) <= {-1, 1}:
            raise ParameterError("labels must be in {-1, +1}")

    @property
    def label_bits(self) -> np.ndarray:
        return (1 - self.labels) // 2

    def __len__(self):
        return self.labels.shape[0]


def labels_from_bits(bits) -> np.ndarray:
    return 1 - 2 * np.asarray(bits, dtype=int)


def build_qbc_state(neighbors: LabeledNeighbors, test, max_qubits: int = MAX_QUBITS) -> QuantumState:
    """Build the classifier circuit up to (not including) the final measurement."""
    x = neighbors.features
    test = np.asarray(test, dtype=float).reshape(-1)
    k, d = x.shape
    if test.shape[0] != d:
        raise DimensionError(f"test has {test.shape[0]} features, neighbors have {d}")
    if np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > NORM_ATOL) or abs(np.linalg.norm(test) - 1.0) > NORM_ATOL:
        raise NormalizationError("classifier inputs must be unit-norm")

    spec = QbcCircuitSpec(k, d)
    cap = min(max_qubits, MAX_QUBITS)
    if spec.total_qubits > cap:
        raise CapacityError(f"classifier circuit needs {spec.total_qubits} qubits, cap is {cap}")
    iq, fq = spec.index_qubits, spec.feature_qubits

    state = zero_state(spec.total_qubits)
    initialize_register(state, [1], [np.sqrt(0.5), np.sqrt(0.5)])

    # q2 jointly with index and features: training branch |0>|i>|x_i>, test branch |1>|i>|x>
    joint = np.zeros((2, 1 << iq, 1 << fq))
    joint[0, :k, :d] = x
    joint[1, :k, :d] = test
    joint /= np.sqrt(2 * k)
    initialize_register(state, range(2, 3 + iq + fq), joint.reshape(-1))

    # training labels: only b_i = 1 (y_i = -1) needs a flip
    label = spec.label_qubit
    index_qubits = list(spec.index_register)
    apply_x(state, 2)
    for i in np.flatnonzero(neighbors.label_bits):
        zero_bits = [q for pos, q in enumerate(index_qubits) if not (i >> (iq - 1 - pos)) & 1]
        for q in zero_bits:
            apply_x(state, q)
        apply_controlled_x(state, [2, *index_qubits], [1] * (1 + iq), label)
        for q in zero_bits:
            apply_x(state, q)
    apply_x(state, 2)

    # test branch label to |->
    apply_controlled_x(state, [2], [1], label)
    apply_controlled_h(state, 2, label)

    apply_hadamard(state, 0)
    apply_fredkin(state, 0, 1, 2)
    apply_hadamard(state, 0)
    return state


def qbc_p1_statevector(state: QuantumState, spec: QbcCircuitSpec = None) -> float:
    return float(marginal_array(state, [0])[1])


def qbc_p1_sampled(state: QuantumState, spec: QbcCircuitSpec, shots: int, rng) -> float:
    counts = sample_measurements(state, [0], shots, rng)
    return counts.counts.get("1", 0) / counts.shots


def predict_label(p1: float, atol: float = 0.0) -> int:
    """-1 when ``p1`` exceeds 0.25 (by more than ``atol``), +1 otherwise."""
    if not -1e-12 <= p1 <= 1.0 + 1e-12:
        raise ParameterError(f"p1 must be a probability, got {p1}")
    return -1 if p1 > THRESHOLD + atol else 1


def cosine_vote(neighbors: LabeledNeighbors, test) -> float:
    """Label-weighted cosine sum; its sign is the classical model's prediction."""
    return float(np.dot(neighbors.labels, cosine_similarities(neighbors.features, test)))


def classical_cosine_classifier(neighbors: LabeledNeighbors, test, atol: float = 0.0) -> int:
    """Sign of the cosine-weighted label sum, with a zero sum mapped to +1."""
    return -1 if cosine_vote(neighbors, test) < -atol else 1


def vote_to_p1_atol(vote_atol: float, k: int) -> float:
    """Translate a tolerance on the cosine vote into one on P(1)."""
    return vote_atol / (4.0 * np.sqrt(2.0) * k)
