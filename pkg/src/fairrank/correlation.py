"""Association between protected and legitimate features.

Rank correlation is used for numeric, binary and ordinal protected
features; the correlation ratio replaces it for non-binary categorical ones.
The per-feature penalty is the largest absolute association with any
protected feature.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import rankdata

__all__ = ["PenaltyVector", "spearman", "correlation_ratio", "penalty_vector"]


def _check_pair(a, x, min_len):
    a = np.asarray(a)
    x = np.asarray(x)
    if a.ndim != 1 or x.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    if a.shape[0] != x.shape[0]:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {x.shape[0]}")
    if a.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} observations")
    return a, x


def spearman(a, x):
    """Spearman's rank correlation with average ranks for ties.

    Returns 0.0 when either sample is constant.

    >>> spearman([1, 2, 3], [10, 20, 30])
    1.0
    """
    a, x = _check_pair(a, x, 2)
    ra = rankdata(a, method="average")
    rx = rankdata(x, method="average")
    ra -= ra.mean()
    rx -= rx.mean()
    denom = np.sqrt(np.dot(ra, ra) * np.dot(rx, rx))
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.dot(ra, rx) / denom, -1.0, 1.0))


def correlation_ratio(categories, x):
    """Correlation ratio eta of a numeric sample across categories.

    eta^2 is the share of the total variance of ``x`` explained by the
    category means. Returns 0.0 when ``x`` is constant.
    """
    categories, x = _check_pair(categories, x, 1)
    x = x.astype(float)
    codes, _ = pd.factorize(pd.Series(categories), sort=True)
    total = x - x.mean()
    ss_total = np.dot(total, total)
    if ss_total == 0.0:
        return 0.0
    counts = np.bincount(codes)
    means = np.bincount(codes, weights=x) / counts
    ss_between = np.dot(counts, (means - x.mean()) ** 2)
    return float(np.sqrt(np.clip(ss_between / ss_total, 0.0, 1.0)))


@dataclass(frozen=True)
class PenaltyVector:
    """``rho_tilde`` per legitimate feature plus the full K x L matrix."""

    legitimate: tuple
    protected: tuple
    matrix: np.ndarray
    methods: tuple

    @property
    def rho_tilde(self):
        return self.matrix.max(axis=0)

    def to_dict(self):
        return {
            "legitimate": list(self.legitimate),
            "protected": list(self.protected),
            "methods": list(self.methods),
            "matrix": self.matrix.tolist(),
            "rho_tilde": self.rho_tilde.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["legitimate"]), tuple(d["protected"]),
                   np.asarray(d["matrix"], dtype=float), tuple(d["methods"]))

    def to_frame(self):
        rows = []
        for k, name in enumerate(self.protected):
            for ell, feat in enumerate(self.legitimate):
                rows.append({"protected": name, "legitimate": feat,
                             "method": self.methods[k],
                             "association": self.matrix[k, ell]})
        return pd.DataFrame(rows)


def _protected_values(series, kind):
    if kind == "binary" and not pd.api.types.is_numeric_dtype(series):
        codes, _ = pd.factorize(series, sort=True)
        return codes
    return series.to_numpy()


def penalty_vector(dataset, Z):
    """Association of each scaled legitimate column with each protected column."""
    protected = dataset.protected
    if not protected:
        raise ValueError("penalty needs at least one protected feature")
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (dataset.n, len(dataset.legitimate)):
        raise ValueError(
            f"Z has shape {Z.shape}, expected {(dataset.n, len(dataset.legitimate))}")
    matrix = np.zeros((len(protected), Z.shape[1]))
    methods = []
    for k, feat in enumerate(protected):
        values = _protected_values(dataset.frame[feat.name], feat.kind)
        if feat.kind == "categorical":
            methods.append("correlation-ratio")
            for ell in range(Z.shape[1]):
                matrix[k, ell] = correlation_ratio(values, Z[:, ell])
        else:
            methods.append("srcc")
            for ell in range(Z.shape[1]):
                matrix[k, ell] = abs(spearman(values, Z[:, ell]))
    return PenaltyVector(tuple(dataset.legitimate_names), tuple(dataset.protected_names),
                         matrix, tuple(methods))
