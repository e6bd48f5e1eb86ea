"""Quantum k-nearest-neighbors stage based on the SWAP test.

Register layout (qubit 0 first): ancilla, index register, training-feature
register, test-feature register.  The index and training-feature registers are
loaded jointly with ``sum_i |i>|x_i> / sqrt(N)``; padded index slots (when N is
not a power of two) carry zero amplitude and are never ranked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import ceil_log2, pad_amplitudes
from .errors import (
    CapacityError,
    DegenerateDistributionError,
    DimensionError,
    NormalizationError,
    ParameterError,
)
from .statevector import (
    MAX_QUBITS,
    NORM_ATOL,
    QuantumState,
    apply_fredkin,
    apply_hadamard,
    initialize_register,
    marginal_array,
    sample_measurements,
    zero_state,
)

CLASSICAL = "classical"
STATEVECTOR = "statevector"
SIMULATION = "simulation"
MODALITIES = (CLASSICAL, STATEVECTOR, SIMULATION)

# P(ancilla = 1) below this is treated as exactly zero (all rows equal to the test vector).
DEGENERATE_PROBABILITY = 1e-14
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class QknnCircuitSpec:
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
        return 1 + self.index_qubits + 2 * self.feature_qubits

    @property
    def index_register(self) -> range:
        return range(1, 1 + self.index_qubits)

    @property
    def train_register(self) -> range:
        start = 1 + self.index_qubits
        return range(start, start + self.feature_qubits)

    @property
    def test_register(self) -> range:
        start = 1 + self.index_qubits + self.feature_qubits
        return range(start, start + self.feature_qubits)


@dataclass
class IndexScores:
    q_values: np.ndarray
    modality: str
    degenerate: bool = False
    metadata: dict = field(default_factory=dict)


@dataclass
class NeighborSet:
    indices: np.ndarray
    scores: np.ndarray
    tie_policy_applied: bool = False
    boundary_tie: bool = False


def _check_unit_rows(matrix, what):
    norms = np.linalg.norm(matrix, axis=-1)
    if np.any(np.abs(norms - 1.0) > NORM_ATOL):
        raise NormalizationError(f"{what} must be unit-norm")


def build_qknn_state(train, test, max_qubits: int = MAX_QUBITS) -> QuantumState:
    """Prepare the four registers and apply the SWAP test (no measurement)."""
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float).reshape(-1)
    if train.ndim != 2 or train.shape[1] != test.shape[0]:
        raise DimensionError(f"train {train.shape} and test {test.shape} are inconsistent")
    n_train, d = train.shape
    if n_train < 2:
        raise ParameterError("the k-NN circuit needs at least 2 training instances")
    _check_unit_rows(train, "training rows")
    _check_unit_rows(test[None, :], "test instance")

    spec = QknnCircuitSpec(n_train, d)
    if spec.total_qubits > min(max_qubits, MAX_QUBITS):
        raise CapacityError(
            f"k-NN circuit needs {spec.total_qubits} qubits, cap is {min(max_qubits, MAX_QUBITS)}"
        )

    iq, fq = spec.index_qubits, spec.feature_qubits
    joint = np.zeros((1 << iq, 1 << fq))
    joint[:n_train, :d] = train / np.sqrt(n_train)

    state = zero_state(spec.total_qubits)
    initialize_register(state, range(1, 1 + iq + fq), joint.reshape(-1))
    if fq:
        initialize_register(state, spec.test_register, pad_amplitudes(test, fq))

    apply_hadamard(state, 0)
    for a, b in zip(spec.train_register, spec.test_register):
        apply_fredkin(state, 0, a, b)
    apply_hadamard(state, 0)
    return state


def _joint_ancilla_index(state: QuantumState, spec: QknnCircuitSpec) -> np.ndarray:
    joint = marginal_array(state, (0, *spec.index_register))
    return joint.reshape(2, 1 << spec.index_qubits)


def qknn_scores_statevector(state: QuantumState, spec: QknnCircuitSpec) -> IndexScores:
    """Exact ``Q(i) = P(i|0) - P(i|1)`` from the final amplitudes."""
    joint = _joint_ancilla_index(state, spec)
    p_alpha = joint.sum(axis=1)
    if p_alpha[0] <= 0.0:
        raise DegenerateDistributionError("P(ancilla = 0) is zero")
    if p_alpha[1] <= DEGENERATE_PROBABILITY:
        # every training row equals the test vector: no discriminating information
        return IndexScores(np.zeros(spec.num_train), STATEVECTOR, degenerate=True)
    cond = joint / p_alpha[:, None]
    q = cond[0] - cond[1]
    return IndexScores(q[: spec.num_train], STATEVECTOR, metadata={"p_ancilla": p_alpha.tolist()})


def qknn_scores_sampled(state: QuantumState, spec: QknnCircuitSpec, shots: int, rng) -> IndexScores:
    """Estimate ``Q(i)`` from one batch of joint (ancilla, index) measurements.

    If an ancilla outcome never occurs its conditional distribution is taken as
    all zeros and the outcome is listed under ``metadata["empty_ancilla_outcomes"]``.
    """
    counts = sample_measurements(state, (0, *spec.index_register), shots, rng)
    table = counts.as_array().reshape(2, 1 << spec.index_qubits).astype(float)
    totals = table.sum(axis=1)
    cond = np.zeros_like(table)
    empty = []
    for alpha in (0, 1):
        if totals[alpha] > 0:
            cond[alpha] = table[alpha] / totals[alpha]
        else:
            empty.append(alpha)
    q = cond[0] - cond[1]
    meta = {"shots": int(shots), "ancilla_counts": totals.astype(int).tolist()}
    if empty:
        meta["empty_ancilla_outcomes"] = empty
    return IndexScores(q[: spec.num_train], SIMULATION, degenerate=bool(empty), metadata=meta)


def cosine_similarities(train, test) -> np.ndarray:
    """Cosine similarity of every row to ``test``; zero-norm vectors score 0."""
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float).reshape(-1)
    denom = np.linalg.norm(train, axis=1) * np.linalg.norm(test)
    dots = train @ test
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, dots / safe, 0.0)


def classical_knn_scores(train, test, metric: str = "cosine") -> IndexScores:
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float).reshape(-1)
    if train.ndim != 2 or train.shape[1] != test.shape[0]:
        raise DimensionError(f"train {train.shape} and test {test.shape} are inconsistent")
    if metric == "cosine":
        scores = cosine_similarities(train, test)
    elif metric == "euclidean":
        scores = -np.linalg.norm(train - test, axis=1)
    else:
        raise ParameterError(f"unknown metric {metric!r}")
    return IndexScores(scores, CLASSICAL, metadata={"metric": metric})


def _tie_groups(ordered_scores: np.ndarray, tol: float) -> np.ndarray:
    """Group label per position of a descending score array."""
    gaps = -np.diff(ordered_scores) > tol
    return np.concatenate([[0], np.cumsum(gaps)])


def extract_k_nearest(scores, k: int, tie_rtol: Optional[float] = TIE_RTOL) -> NeighborSet:
    """Indices of the ``k`` largest scores, descending, ties by ascending index.

    Scores closer than ``tie_rtol * max|score|`` count as tied, so rounding noise
    of order 1e-16 cannot reorder instances that are equal in exact arithmetic.
    """
    values = np.asarray(getattr(scores, "q_values", scores), dtype=float).reshape(-1)
    n = values.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    tol = 0.0 if not tie_rtol else tie_rtol * float(np.max(np.abs(values)))
    order = np.lexsort((np.arange(n), -values))
    groups = _tie_groups(values[order], tol)
    # within a tie group fall back to index order
    order = order[np.lexsort((order, groups))]

    chosen = order[:k]
    top_groups = groups[:k]
    applied = bool(np.any(np.bincount(groups)[np.unique(top_groups)] > 1))
    boundary = bool(k < n and groups[k - 1] == groups[k])
    return NeighborSet(chosen, values[chosen], tie_policy_applied=applied, boundary_tie=boundary)
