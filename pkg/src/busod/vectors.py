"""Embedding helpers shared by the tracker and cross-camera matching."""

from __future__ import annotations

import numpy as np

from busod.errors import DegenerateEmbedding, InputSchemaError


def as_vector(e) -> np.ndarray:
    return np.asarray(e, dtype=float).reshape(-1)


def normalize(e) -> np.ndarray:
    v = as_vector(e)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateEmbedding("embedding has zero or non-finite norm")
    return v / norm


def cosine_distance(e1, e2) -> float:
    """1 - cos(e1, e2), clipped to [0, 2]."""
    a, b = as_vector(e1), as_vector(e2)
    if a.shape != b.shape:
        raise InputSchemaError(f"embedding dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateEmbedding("cosine distance undefined for a zero vector")
    d = 1.0 - float(a @ b) / (na * nb)
    return min(2.0, max(0.0, d))


def cosine_distance_matrix(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Pairwise cosine distances between unit-normalised row vectors."""
    if rows.size == 0 or cols.size == 0:
        return np.zeros((rows.shape[0], cols.shape[0]))
    if rows.shape[1] != cols.shape[1]:
        raise InputSchemaError(f"embedding dimensions differ: {rows.shape[1]} vs {cols.shape[1]}")
    rn = np.linalg.norm(rows, axis=1, keepdims=True)
    cn = np.linalg.norm(cols, axis=1, keepdims=True)
    if np.any(rn == 0) or np.any(cn == 0):
        raise DegenerateEmbedding("cosine distance undefined for a zero vector")
    return np.clip(1.0 - (rows / rn) @ (cols / cn).T, 0.0, 2.0)
