"""Pure-numpy distance kernels (fallback backend).

Row-chunked broadcasting keeps the temporary at chunk x m x d instead of
n x m x d, so large inputs stay memory-safe.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def _as2d(a: np.ndarray, name: str) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def pairwise_sq_euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared euclidean distances, shape (len(a), len(b))."""
    a = _as2d(a, "a")
    b = _as2d(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for start in range(0, a.shape[0], _CHUNK):
        stop = min(start + _CHUNK, a.shape[0])
        diff = a[start:stop, None, :] - b[None, :, :]
        np.sum(diff * diff, axis=2, out=out[start:stop])
    return out


def pairwise_manhattan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Manhattan (L1) distances, shape (len(a), len(b))."""
    a = _as2d(a, "a")
    b = _as2d(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for start in range(0, a.shape[0], _CHUNK):
        stop = min(start + _CHUNK, a.shape[0])
        np.sum(np.abs(a[start:stop, None, :] - b[None, :, :]), axis=2, out=out[start:stop])
    return out
