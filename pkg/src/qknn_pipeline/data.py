"""Dataset ingestion, normalization and amplitude encoding."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, IngestionError, NormalizationError
from .statevector import NORM_ATOL, QuantumState

ZERO_NORM_EPSILON = 1e-6
LABEL_COLUMN = "class"


@dataclass
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    label_names: tuple = ()

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise DimensionError("features must be a 2-D matrix")
        n, d = self.features.shape
        if n < 2 or d < 1:
            raise DimensionError(f"need N >= 2 and d >= 1, got N={n}, d={d}")
        if self.labels.shape != (n,):
            raise DimensionError("labels must have one entry per instance")
        if not set(np.unique(self.labels)) <= {-1, 1}:
            raise IngestionError("labels must be in {-1, +1}")
        if len(np.unique(self.labels)) != 2:
            raise IngestionError("both classes must be present")
        if not np.all(np.isfinite(self.features)):
            raise IngestionError("features contain missing or non-finite values")

    @property
    def num_instances(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class NormalizationParams:
    minimum: np.ndarray
    range: np.ndarray


def _map_labels(tokens):
    distinct = sorted(set(tokens))
    if len(distinct) != 2:
        raise IngestionError(f"expected exactly 2 distinct labels, found {len(distinct)}: {distinct[:5]}")
    try:
        numeric = {float(t) for t in distinct}
    except ValueError:
        numeric = None
    if numeric == {-1.0, 1.0}:
        mapping = {t: int(float(t)) for t in distinct}
    else:
        mapping = {distinct[0]: 1, distinct[1]: -1}
    names = tuple(t for t, _ in sorted(mapping.items(), key=lambda kv: -kv[1]))
    return np.array([mapping[t] for t in tokens], dtype=int), names


def load_dataset(path) -> Dataset:
    """Read a dataset CSV: header row, feature columns, then a ``class`` column.

    Labels already in {-1, +1} are kept; any other two tokens are mapped with
    the lexicographically first one to +1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path.name} is empty") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != LABEL_COLUMN:
            raise IngestionError(f"last column must be named '{LABEL_COLUMN}'", row=1)
        d = len(header) - 1
        rows, tokens = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != d + 1:
                raise IngestionError(f"expected {d + 1} cells, got {len(row)}", row=lineno)
            cells = [c.strip() for c in row]
            if any(c == "" for c in cells):
                raise IngestionError("missing value", row=lineno)
            try:
                values = [float(c) for c in cells[:d]]
            except ValueError as exc:
                raise IngestionError(f"unparseable feature ({exc})", row=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise IngestionError("non-finite feature value", row=lineno)
            rows.append(values)
            tokens.append(cells[d])
    if len(rows) < 2:
        raise IngestionError(f"{path.name} has fewer than 2 instances")
    labels, names = _map_labels(tokens)
    return Dataset(path.stem, np.array(rows), labels, names)


def fit_minmax(train) -> NormalizationParams:
    train = np.asarray(train, dtype=float)
    if train.ndim != 2 or train.shape[0] == 0:
        raise DimensionError("training matrix must be 2-D and non-empty")
    lo = train.min(axis=0)
    return NormalizationParams(lo, train.max(axis=0) - lo)


def apply_minmax(params: NormalizationParams, instances) -> np.ndarray:
    """Rescale with training parameters; constant attributes become 0, the rest is clipped to [0, 1]."""
    x = np.asarray(instances, dtype=float)
    if x.shape[-1] != params.minimum.shape[0]:
        raise DimensionError(
            f"instances have {x.shape[-1]} features, params were fit on {params.minimum.shape[0]}"
        )
    constant = params.range == 0
    scaled = (x - params.minimum) / np.where(constant, 1.0, params.range)
    scaled = np.where(constant, 0.0, scaled)
    return np.clip(scaled, 0.0, 1.0)


def unit_norm(instance) -> np.ndarray:
    """Divide by the Euclidean norm; an all-zero vector is first filled with 1e-6."""
    x = np.asarray(instance, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        x = np.full_like(x, ZERO_NORM_EPSILON)
        norm = np.linalg.norm(x)
    return x / norm


def unit_norm_rows(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    return np.vstack([unit_norm(row) for row in m]) if m.size else m


def ceil_log2(size: int) -> int:
    """Qubits needed to address ``size`` slots (0 for a single slot)."""
    if size < 1:
        raise DimensionError("size must be >= 1")
    return (int(size) - 1).bit_length()


def pad_amplitudes(vector, num_qubits: int) -> np.ndarray:
    v = np.asarray(vector, dtype=float).reshape(-1)
    out = np.zeros(1 << num_qubits)
    out[: v.shape[0]] = v
    return out


def amplitude_encode(instance) -> QuantumState:
    x = np.asarray(instance, dtype=float).reshape(-1)
    if abs(np.linalg.norm(x) - 1.0) > NORM_ATOL:
        raise NormalizationError("amplitude encoding needs a unit-norm vector")
    n = max(1, ceil_log2(x.shape[0]))
    return QuantumState(n, pad_amplitudes(x, n).astype(np.complex128))
