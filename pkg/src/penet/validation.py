"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np

from .model import MIN_INPUT_LENGTH, InputTooShortError
from .sde import Trajectory


def check_series(values, min_length: int = MIN_INPUT_LENGTH) -> np.ndarray:
    """Validate one observation sequence: 1-D, finite, long enough."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"series must be 1-D, got shape {values.shape}")
    if values.shape[0] < min_length:
        raise InputTooShortError(
            f"series length {values.shape[0]} below minimum {min_length}"
        )
    if not np.isfinite(values).all():
        raise ValueError("series contains non-finite values")
    return values


def check_frequency(h) -> float:
    h = float(h)
    if not (np.isfinite(h) and h > 0.0):
        raise ValueError(f"observation frequency must be a positive real, got {h}")
    return h


def unpack_sequences(X, min_length: int = MIN_INPUT_LENGTH) -> tuple[list[np.ndarray], np.ndarray]:
    """Normalize a batch of observations to (values list, h array).

    Accepts Trajectory objects, (values, h) pairs, or {"values", "h"} dicts.
    """
    values_list: list[np.ndarray] = []
    hs: list[float] = []
    for item in X:
        if isinstance(item, Trajectory):
            values, h = item.values, item.h
        elif isinstance(item, dict):
            values, h = item["values"], item["h"]
        else:
            values, h = item
        values_list.append(check_series(values, min_length))
        hs.append(check_frequency(h))
    return values_list, np.asarray(hs, dtype=np.float64)


def check_targets(y, n_samples: int, n_outputs: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape != (n_samples, n_outputs):
        raise ValueError(
            f"targets must have shape ({n_samples}, {n_outputs}), got {y.shape}"
        )
    if not np.isfinite(y).all():
        raise ValueError("targets contain non-finite values")
    return y
