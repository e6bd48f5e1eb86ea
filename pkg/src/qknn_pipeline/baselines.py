"""Classical comparison methods, applied to min-max data without unit-norm scaling."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import IngestionError
from .qbc import LabeledNeighbors, classical_cosine_classifier
from .qknn import NeighborSet, classical_knn_scores, extract_k_nearest

EXTERNAL_COLUMNS = ("method", "dataset", "fold", "k", "accuracy")


def nearest_neighbors(train, test, k: int, metric: str = "cosine") -> NeighborSet:
    return extract_k_nearest(classical_knn_scores(train, test, metric), k)


def majority_vote(labels):
    """Majority label, +1 on an even split; returns ``(label, tied)``."""
    total = int(np.sum(labels))
    return (-1 if total < 0 else 1), total == 0


def knn_majority(train, labels, test, k: int, metric: str = "cosine") -> int:
    chosen = nearest_neighbors(train, test, k, metric)
    label, _ = majority_vote(np.asarray(labels)[chosen.indices])
    return label


def knn_plus_classifier(train, labels, test, k: int, metric: str = "cosine") -> int:
    """k-NN selection followed by the cosine classifier on the neighbors."""
    train = np.asarray(train, dtype=float)
    chosen = nearest_neighbors(train, test, k, metric)
    neighbors = LabeledNeighbors(train[chosen.indices], np.asarray(labels)[chosen.indices])
    return classical_cosine_classifier(neighbors, test)


@dataclass(frozen=True)
class ExternalAccuracy:
    method: str
    dataset: str
    fold: int
    k: Optional[int]
    accuracy: float


def load_external_accuracies(path) -> List[ExternalAccuracy]:
    """Read per-fold accuracies produced elsewhere (e.g. random forest, SVM).

    An empty ``k`` cell means the method has no k and pairs with every k.
    """
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != EXTERNAL_COLUMNS:
            raise IngestionError(f"header must be {','.join(EXTERNAL_COLUMNS)}", row=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                k_cell = row["k"].strip()
                accuracy = float(row["accuracy"])
                record = ExternalAccuracy(
                    row["method"].strip(),
                    row["dataset"].strip(),
                    int(row["fold"]),
                    int(k_cell) if k_cell else None,
                    accuracy,
                )
            except (TypeError, ValueError, AttributeError) as exc:
                raise IngestionError(f"bad value ({exc})", row=lineno) from None
            if not 0.0 <= accuracy <= 1.0:
                raise IngestionError(f"accuracy {accuracy} outside [0, 1]", row=lineno)
            rows.append(record)
    return rows
