"""Input checks in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionError


def check_image(img, channels: tuple[int, ...] = (1, 3)) -> np.ndarray:
    """Return ``img`` as a float64 (H, W, C) array with values in [0, 1]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in channels:
        raise DimensionError(f"expected an (H, W, C) image with C in {channels}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("image contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise DataError("image values must lie in [0, 1]; normalize raw pixels first")
    return arr


def check_batch(X, sample_shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Return ``X`` as a float64 batch, reshaped to ``sample_shape`` when sizes agree."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim < 2:
        raise DimensionError(f"expected a batch with a leading sample axis, got shape {arr.shape}")
    if sample_shape is not None and arr.shape[1:] != tuple(sample_shape):
        if int(np.prod(arr.shape[1:])) != int(np.prod(sample_shape)):
            raise DimensionError(f"samples of shape {arr.shape[1:]} do not fit input {tuple(sample_shape)}")
        arr = arr.reshape((arr.shape[0],) + tuple(sample_shape))
    if not np.all(np.isfinite(arr)):
        raise DataError("input contains non-finite values")
    return arr


def check_labels(y, n_samples: int, n_classes: int | None = None) -> np.ndarray:
    labels = np.asarray(y)
    if labels.ndim != 1 or labels.shape[0] != n_samples:
        raise DimensionError(f"expected {n_samples} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise DataError("labels must be integer class indices")
        labels = labels.astype(np.int64)
    if labels.size and labels.min() < 0:
        raise DataError("labels must be non-negative")
    if n_classes is not None and labels.size and labels.max() >= n_classes:
        raise DataError(f"label {labels.max()} out of range for {n_classes} classes")
    return labels.astype(np.int64)
