"""Small input-validation helpers shared by the estimators."""

import math

import numpy as np


class SchemaError(ValueError):
    """Raised when data does not conform to the declared feature schema."""


POSITIVE = "+"
NEGATIVE = "-"

_TRUE_TOKENS = {"+", "1", "true", "yes", "y", "pos", "positive", "good"}
_FALSE_TOKENS = {"-", "0", "false", "no", "n", "neg", "negative", "bad"}


def as_label_array(y):
    """Coerce labels to a ``"+"``/``"-"`` string array.

    Accepts booleans, 0/1 integers and the usual string spellings. Anything
    else raises :class:`SchemaError`.
    """
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise SchemaError(f"labels must be one-dimensional, got shape {arr.shape}")
    if arr.dtype == bool:
        return np.where(arr, POSITIVE, NEGATIVE)
    if np.issubdtype(arr.dtype, np.number):
        values = set(np.unique(arr).tolist())
        if not values <= {0, 1}:
            raise SchemaError(f"numeric labels must be 0/1, got {sorted(values)}")
        return np.where(arr == 1, POSITIVE, NEGATIVE)
    out = np.empty(arr.shape[0], dtype="<U1")
    for i, value in enumerate(arr):
        token = str(value).strip().lower()
        if token in _TRUE_TOKENS:
            out[i] = POSITIVE
        elif token in _FALSE_TOKENS:
            out[i] = NEGATIVE
        else:
            raise SchemaError(f"cannot parse label {value!r} at row {i}")
    return out


def positive_mask(labels):
    return np.asarray(labels) == POSITIVE


def check_both_classes(labels):
    mask = positive_mask(labels)
    if mask.all() or not mask.any():
        raise ValueError("labels must contain both '+' and '-' observations")


def check_alpha(alpha, *, open_interval=True):
    alpha = float(alpha)
    if open_interval and not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not open_interval and not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def cutoff_index(alpha, n):
    """Number of positives for capacity ``alpha`` over ``n`` observations.

    ``ceil(alpha * n)`` after rounding the product to 9 decimals, so that
    e.g. ``0.59 * 200`` yields 118 rather than 119.
    """
    return int(math.ceil(round(alpha * n, 9)))


def check_unit_interval(Z, name="Z"):
    Z = np.asarray(Z, dtype=float)
    if Z.size and (np.nanmin(Z) < 0.0 or np.nanmax(Z) > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if np.isnan(Z).any():
        raise ValueError(f"{name} contains NaN")
    return Z


def check_weights(weights, n_features, name="weights"):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != n_features:
        raise ValueError(
            f"{name} has shape {w.shape}, expected ({n_features},)")
    return w
