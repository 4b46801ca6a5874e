"""Input checks for the estimator interface."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .data import CONSTANT, OFFSET

__all__ = ["check_survival_y", "check_covariates", "check_entry", "check_points", "check_kinds"]


def check_survival_y(y):
    """Split ``y`` into ``(exit, event)``.

    Accepts an ``(n, 2)`` array of ``[exit, event]``, a pair of arrays, or a
    structured array with one boolean field (event) and one float field.
    """
    if isinstance(y, np.ndarray) and y.dtype.names:
        names = y.dtype.names
        if len(names) != 2:
            raise ValueError("structured y needs exactly two fields: event and time")
        flags = [n for n in names if y.dtype[n] == np.bool_]
        if len(flags) != 1:
            raise ValueError("structured y needs exactly one boolean event field")
        time_field = names[1 - names.index(flags[0])]
        exit_, event = np.asarray(y[time_field], dtype=float), np.asarray(y[flags[0]])
    elif isinstance(y, (tuple, list)) and len(y) == 2 and np.ndim(y[0]) == 1:
        exit_, event = np.asarray(y[0], dtype=float), np.asarray(y[1])
    else:
        arr = check_array(y, ensure_2d=True, dtype=float)
        if arr.shape[1] != 2:
            raise ValueError(f"y must have two columns [exit, event], got {arr.shape[1]}")
        exit_, event = arr[:, 0], arr[:, 1]
    check_consistent_length(exit_, event)
    if not np.all(np.isfinite(exit_)):
        raise ValueError("exit times must be finite")
    ev = np.asarray(event)
    if ev.dtype != np.bool_:
        ev = ev.astype(float)
        if not np.all(np.isin(ev, (0.0, 1.0))):
            raise ValueError("event indicators must be 0 or 1")
    return exit_, ev.astype(bool)


def check_covariates(X):
    return check_array(X, ensure_2d=True, dtype=float, ensure_min_samples=1)


def check_entry(entry, n):
    if entry is None:
        return np.zeros(n)
    entry = np.asarray(entry, dtype=float).ravel()
    if entry.shape != (n,):
        raise ValueError(f"entry must have length {n}, got {entry.shape[0]}")
    if not np.all(np.isfinite(entry)):
        raise ValueError("entry times must be finite")
    return entry


def check_points(X, n_dims):
    arr = check_array(X, ensure_2d=True, dtype=float)
    if arr.shape[1] != n_dims:
        raise ValueError(f"expected {n_dims} columns (time first), got {arr.shape[1]}")
    return arr


def check_kinds(kinds, d):
    if kinds is None:
        return (CONSTANT,) * d
    kinds = tuple(kinds)
    if len(kinds) != d:
        raise ValueError(f"covariate_kinds has {len(kinds)} entries for {d} covariates")
    for k in kinds:
        if k not in (CONSTANT, OFFSET):
            raise ValueError(f"covariate kind must be {CONSTANT!r} or {OFFSET!r}, got {k!r}")
    return kinds
