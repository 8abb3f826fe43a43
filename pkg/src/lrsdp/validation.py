"""Input validation helpers for user-facing entry points."""

from __future__ import annotations

import numbers

import numpy as np


def check_measurements(a, y=None):
    """Validate a measurement tensor (and optional observations).

    ``a`` must be a finite (n, p, p) float array; ``y`` a finite (n,) vector.
    Returns the validated arrays (``a`` as float64, not yet symmetrized).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError(f"measurements must have shape (n, p, p), got {a.shape}")
    if a.shape[0] < 1:
        raise ValueError("need at least one measurement")
    if not np.all(np.isfinite(a)):
        raise ValueError("measurements contain non-finite entries")
    if y is None:
        return a
    y = np.asarray(y, dtype=float).ravel()
    if y.size != a.shape[0]:
        raise ValueError(f"got {a.shape[0]} measurement matrices but "
                         f"{y.size} observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations contain non-finite entries")
    return a, y


def check_rank(rank, p: int) -> int:
    if not isinstance(rank, numbers.Integral):
        raise ValueError(f"rank must be an integer, got {rank!r}")
    rank = int(rank)
    if not 1 <= rank <= p:
        raise ValueError(f"rank must satisfy 1 <= rank <= {p}, got {rank}")
    return rank


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
