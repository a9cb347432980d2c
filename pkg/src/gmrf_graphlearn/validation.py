"""Input validation helpers shared across the package."""

import numpy as np


def check_vector(v, n, name="v"):
    """Coerce to a 1-D float array of length ``n``."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {arr.shape[0]}")
    return arr


def check_matrix(m, n_rows=None, n_cols=None, name="m"):
    """Coerce to a 2-D float array, optionally checking its shape."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(f"{name} must have {n_rows} rows, got {arr.shape[0]}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {arr.shape[1]}")
    return arr


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_node_index_set(indices, n, name="indices"):
    """Validate a strictly increasing set of node indices in ``[0, n)``.

    Returns the indices as an int array. Raises on duplicates, unsorted
    input, or out-of-range entries.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional")
    if idx.size:
        if idx[0] < 0 or idx[-1] >= n:
            raise ValueError(f"{name} must lie in [0, {n})")
        if np.any(np.diff(idx) <= 0):
            raise ValueError(f"{name} must be strictly increasing with no duplicates")
    return idx


def complement_index_set(indices, n):
    """Sorted complement of an index set within ``[0, n)``."""
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(indices, dtype=np.int64)] = False
    return np.flatnonzero(mask)
