"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np


def check_feature_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d feature matrix, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("feature matrix must be non-empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    return X


def check_labels(y, n_rows: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_rows:
        raise ValueError(f"labels must be 1-d with {n_rows} entries, got shape {y.shape}")
    return y


def check_sequences(sequences, dim: int | None = None) -> list[np.ndarray]:
    """Coerce an iterable of (n_frames, dim) arrays, enforcing a common dim."""
    seqs = list(sequences)
    if not seqs:
        raise ValueError("at least one sequence is required")
    out = []
    for i, seq in enumerate(seqs):
        arr = np.asarray(seq, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError(f"sequence {i} must be a non-empty (n_frames, dim) array")
        if dim is None:
            dim = arr.shape[1]
        elif arr.shape[1] != dim:
            raise ValueError(f"sequence {i} has dimension {arr.shape[1]}, expected {dim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"sequence {i} contains non-finite values")
        out.append(arr)
    return out
