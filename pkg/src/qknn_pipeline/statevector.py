"""Dense statevector simulator restricted to the gates the two circuits need.

Qubit 0 is the most significant bit of the basis-state index, so on three
qubits ``|q0 q1 q2> = |100>`` is amplitude index 4.  Gate functions mutate the
state in place and also return it so calls can be chained.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import (
    CapacityError,
    DimensionError,
    InitializationOrderError,
    NormalizationError,
    ParameterError,
    QubitIndexError,
)

MAX_QUBITS = 32
NORM_ATOL = 1e-9
_SQRT1_2 = 1.0 / np.sqrt(2.0)


@dataclass(eq=False)
class QuantumState:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise DimensionError(
                f"expected {1 << self.num_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def tensor(self) -> np.ndarray:
        """Writable view with one length-2 axis per qubit (axis 0 = qubit 0)."""
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.probabilities().sum()))

    def copy(self) -> "QuantumState":
        return QuantumState(self.num_qubits, self.amplitudes.copy())


@dataclass
class MeasurementCounts:
    measured_qubits: Tuple[int, ...]
    counts: Dict[str, int]
    shots: int

    def as_array(self) -> np.ndarray:
        """Counts indexed by outcome integer, first measured qubit as MSB."""
        out = np.zeros(1 << len(self.measured_qubits), dtype=np.int64)
        for key, value in self.counts.items():
            out[int(key, 2) if key else 0] += value
        return out


def _validate_qubits(state: QuantumState, qubits: Iterable[int]) -> Tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    for q in qubits:
        if not 0 <= q < state.num_qubits:
            raise QubitIndexError(f"qubit {q} out of range for {state.num_qubits} qubits")
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"qubit indices must be distinct, got {qubits}")
    return qubits


def zero_state(num_qubits: int) -> QuantumState:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise CapacityError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amplitudes = np.zeros(1 << num_qubits, dtype=np.complex128)
    amplitudes[0] = 1.0
    return QuantumState(num_qubits, amplitudes)


def initialize_register(
    state: QuantumState,
    qubits: Union[range, Sequence[int]],
    target_amplitudes,
) -> QuantumState:
    """Load ``target_amplitudes`` into a contiguous block of qubits.

    The block must still be in ``|0...0>``; the rest of the state is left as is,
    so the result is ``rest (x) target`` with the block's internal bit order
    following the array index order.
    """
    qubits = _validate_qubits(state, qubits)
    if not qubits:
        raise QubitIndexError("empty qubit range")
    lo, m = qubits[0], len(qubits)
    if qubits != tuple(range(lo, lo + m)):
        raise QubitIndexError(f"register qubits must be contiguous and ascending, got {qubits}")

    target = np.asarray(target_amplitudes, dtype=np.complex128).reshape(-1)
    if target.shape[0] != 1 << m:
        raise DimensionError(f"{m}-qubit register needs {1 << m} amplitudes, got {target.shape[0]}")
    norm = np.sqrt(np.sum(np.abs(target) ** 2))
    if abs(norm - 1.0) > NORM_ATOL:
        raise NormalizationError(f"target amplitudes have norm {norm:.12g}, expected 1")

    block = state.amplitudes.reshape(1 << lo, 1 << m, -1)
    stray = np.sum(np.abs(block[:, 1:, :]) ** 2)
    if stray > 1e-12:
        raise InitializationOrderError(
            f"qubits {lo}..{lo + m - 1} are not in the zero state (stray weight {stray:.3g})"
        )
    rest = block[:, 0, :]
    state.amplitudes = (rest[:, None, :] * target[None, :, None]).reshape(-1)
    return state


def _axis_views(sub: np.ndarray, fixed: Dict[int, int]) -> np.ndarray:
    # length-1 slices keep every axis, so the result is always a writable view
    index = [slice(None)] * sub.ndim
    for axis, value in fixed.items():
        index[axis] = slice(value, value + 1)
    return sub[tuple(index)]


def _controlled_subspace(state, controls, pattern, targets):
    """View of the amplitudes where ``controls`` match ``pattern``.

    The view keeps one axis per qubit, so ``targets`` index it directly.
    """
    return _axis_views(state.tensor(), dict(zip(controls, pattern))), tuple(targets)


def _apply_1q(state, controls, pattern, target, kind):
    sub, (axis,) = _controlled_subspace(state, controls, pattern, (target,))
    s0 = _axis_views(sub, {axis: 0})
    s1 = _axis_views(sub, {axis: 1})
    a0 = s0.copy()
    if kind == "x":
        s0[...] = s1
        s1[...] = a0
    else:
        a1 = s1.copy()
        s0[...] = (a0 + a1) * _SQRT1_2
        s1[...] = (a0 - a1) * _SQRT1_2
    return state


def apply_hadamard(state: QuantumState, qubit: int) -> QuantumState:
    (qubit,) = _validate_qubits(state, (qubit,))
    return _apply_1q(state, (), (), qubit, "h")


def apply_x(state: QuantumState, qubit: int) -> QuantumState:
    (qubit,) = _validate_qubits(state, (qubit,))
    return _apply_1q(state, (), (), qubit, "x")


def apply_controlled_x(
    state: QuantumState,
    controls: Sequence[int],
    control_pattern: Sequence[int],
    target: int,
) -> QuantumState:
    """Flip ``target`` on basis states whose controls equal ``control_pattern``."""
    controls = tuple(controls)
    pattern = tuple(int(b) for b in control_pattern)
    if len(pattern) != len(controls):
        raise ParameterError("control_pattern length must match controls length")
    if any(b not in (0, 1) for b in pattern):
        raise ParameterError(f"control_pattern must contain bits, got {pattern}")
    *controls, target = _validate_qubits(state, controls + (target,))
    return _apply_1q(state, controls, pattern, target, "x")


def apply_controlled_h(state: QuantumState, control: int, target: int) -> QuantumState:
    control, target = _validate_qubits(state, (control, target))
    return _apply_1q(state, (control,), (1,), target, "h")


def apply_fredkin(state: QuantumState, control: int, a: int, b: int) -> QuantumState:
    """Controlled-SWAP: exchange bits ``a`` and ``b`` where ``control`` is 1."""
    control, a, b = _validate_qubits(state, (control, a, b))
    sub, (ax, bx) = _controlled_subspace(state, (control,), (1,), (a, b))
    v01 = _axis_views(sub, {ax: 0, bx: 1})
    v10 = _axis_views(sub, {ax: 1, bx: 0})
    tmp = v01.copy()
    v01[...] = v10
    v10[...] = tmp
    return state


def marginal_array(state: QuantumState, qubits: Sequence[int]) -> np.ndarray:
    """Outcome probabilities of ``qubits`` as a flat array (first qubit = MSB)."""
    qubits = _validate_qubits(state, qubits)
    probs = state.probabilities().reshape((2,) * state.num_qubits)
    others = tuple(q for q in range(state.num_qubits) if q not in qubits)
    reduced = probs.sum(axis=others) if others else probs
    if not qubits:
        return np.array([float(reduced)])
    kept = sorted(qubits)
    reduced = np.transpose(reduced, [kept.index(q) for q in qubits])
    return reduced.reshape(-1)


def _bitstring(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def marginal_probabilities(state: QuantumState, qubits: Sequence[int]) -> Dict[str, float]:
    probs = marginal_array(state, qubits)
    width = len(tuple(qubits))
    return {_bitstring(i, width): float(p) for i, p in enumerate(probs) if p > 0.0}


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_measurements(
    state: QuantumState,
    qubits: Sequence[int],
    shots: int,
    rng,
) -> MeasurementCounts:
    """Draw ``shots`` i.i.d. joint outcomes of ``qubits``.

    ``rng`` is a ``numpy.random.Generator`` or anything ``default_rng`` accepts.
    """
    if int(shots) < 1:
        raise ParameterError(f"shots must be >= 1, got {shots}")
    qubits = _validate_qubits(state, qubits)
    probs = marginal_array(state, qubits)
    probs = probs / probs.sum()
    drawn = _as_generator(rng).multinomial(int(shots), probs)
    width = len(qubits)
    counts = {_bitstring(i, width): int(c) for i, c in enumerate(drawn) if c}
    return MeasurementCounts(qubits, counts, int(shots))


def fidelity(u, v) -> float:
    u = np.asarray(u, dtype=np.complex128).reshape(-1)
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    for name, w in (("u", u), ("v", v)):
        if abs(np.linalg.norm(w) - 1.0) > NORM_ATOL:
            raise NormalizationError(f"{name} is not unit-norm")
    return float(min(1.0, abs(np.vdot(u, v)) ** 2))


def swap_test(psi, phi) -> QuantumState:
    """Ancilla-first SWAP test on two equal-size registers, without measurement.

    Layout: qubit 0 is the ancilla, then ``psi``'s register, then ``phi``'s.
    Reading qubit 0 gives ``P(0) = (1 + |<psi|phi>|^2) / 2``.
    """
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    phi = np.asarray(phi, dtype=np.complex128).reshape(-1)
    if psi.shape != phi.shape or psi.shape[0] < 2 or psi.shape[0] & (psi.shape[0] - 1):
        raise DimensionError("registers must have equal power-of-two length >= 2")
    n = psi.shape[0].bit_length() - 1
    state = zero_state(1 + 2 * n)
    initialize_register(state, range(1, 1 + n), psi)
    initialize_register(state, range(1 + n, 1 + 2 * n), phi)
    apply_hadamard(state, 0)
    for j in range(n):
        apply_fredkin(state, 0, 1 + j, 1 + n + j)
    apply_hadamard(state, 0)
    return state
