"""Input validation helpers for the estimator-facing API."""

import numpy as np


def check_feature_array(X, n_features=None, dtype=np.float64) -> np.ndarray:
    """Coerce X to a finite 2-D array, optionally pinning the column count."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature array contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_binary_labels(y, n_rows) -> np.ndarray:
    """Coerce y to an int8 vector of 0/1 matching the row count."""
    y = np.asarray(y)
    if hasattr(y, "labels"):
        y = y.labels
    y = np.asarray(y).ravel()
    if y.shape[0] != n_rows:
        raise ValueError(f"X has {n_rows} rows but y has {y.shape[0]} labels")
    y = y.astype(np.int8)
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y


def check_scores_labels(scores, labels):
    """Coerce aligned score/label vectors for curve computation."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if hasattr(labels, "labels"):
        labels = labels.labels
    labels = np.asarray(labels).ravel().astype(np.int8)
    if scores.shape[0] != labels.shape[0]:
        raise ValueError(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return scores, labels
