"""Input validation shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

N_CHANNELS = 11
N_CLASSES = 3


def check_frames(X, allow_1d=False):
    """Return ``X`` as a finite float array of shape (n, 11)."""
    if allow_1d and np.ndim(X) == 1:
        X = np.asarray(X, dtype=float).reshape(1, -1)
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != N_CHANNELS:
        raise ValueError(f"expected {N_CHANNELS} channels, got {X.shape[1]}")
    return X


def check_labels(y, n_samples):
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("labels must be integer intents")
        y = y.astype(int)
    if y.size and (y.min() < 0 or y.max() >= N_CLASSES):
        raise ValueError("labels must be in {0, 1, 2} (relax, open, close)")
    return y.astype(np.int64)


def check_feature_indices(indices, n_features=N_CHANNELS):
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError("feature subset must be non-empty")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("feature indices must be strictly increasing")
    if idx[0] < 0 or idx[-1] >= n_features:
        raise ValueError(f"feature indices must lie in [0, {n_features})")
    return idx


def check_triple(p, name="p"):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != N_CLASSES:
        raise ValueError(f"{name} must have {N_CLASSES} components")
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} components must lie in [0, 1]")
    return p
