"""Logistic-regression baselines.

``all`` uses protected and legitimate features; ``ftu`` ("fairness through
unawareness") uses legitimate features only. Inputs are standardized with
training statistics, and the L2-penalized log-likelihood is minimized with
L-BFGS on the analytic gradient.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (NEGATIVE, POSITIVE, SchemaError, as_label_array,
                          check_alpha, check_both_classes, cutoff_index,
                          positive_mask)
from .dataset import Dataset

__all__ = [
    "L2LogisticRegression",
    "LogRegModel",
    "train_logreg",
    "rank_by_probability",
    "label_top_alpha",
    "loss_and_grad",
]

SUBSETS = ("all", "ftu")


def loss_and_grad(params, X, t, l2):
    """Penalized negative log-likelihood and its gradient.

    ``params`` is ``[w_1, ..., w_p, b]``; the intercept is not penalized.
    """
    w, b = params[:-1], params[-1]
    s = X @ w + b
    # log(1 + e^s) - t*s, computed stably
    loss = np.sum(np.logaddexp(0.0, s) - t * s) + 0.5 * l2 * np.dot(w, w)
    r = expit(s) - t
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return loss, grad


class L2LogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression with an L2 penalty on standardized inputs.

    Parameters
    ----------
    l2 : float, default=1.0
        Penalty strength on the coefficients.
    max_iter : int, default=1000
    tol : float, default=1e-8
    """

    def __init__(self, l2=1.0, max_iter=1000, tol=1e-8):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        labels = as_label_array(y)
        check_both_classes(labels)
        t = positive_mask(labels).astype(float)
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Xs = (X - self.mean_) / self.scale_
        res = minimize(loss_and_grad, np.zeros(X.shape[1] + 1), args=(Xs, t, self.l2),
                       jac=True, method="L-BFGS-B",
                       options={"maxiter": self.max_iter, "gtol": self.tol, "ftol": 1e-15})
        self.coef_ = res.x[:-1]
        self.intercept_ = float(res.x[-1])
        self.converged_ = bool(res.success)
        self.n_iter_ = int(res.nit)
        self.classes_ = np.array([POSITIVE, NEGATIVE])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise SchemaError(f"expected {self.n_features_in_} columns, got shape {X.shape}")
        return ((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        """Columns ordered as ``classes_``: P(+), P(-)."""
        p = expit(self.decision_function(X))
        return np.column_stack([p, 1.0 - p])

    def predict(self, X):
        return np.where(self.decision_function(X) > 0, POSITIVE, NEGATIVE)


@dataclass
class LogRegModel:
    estimator: L2LogisticRegression
    subset: str
    columns: tuple
    source_columns: tuple
    encodings: dict = field(default_factory=dict)
    seed: int = 0

    def design(self, rows):
        if isinstance(rows, Dataset):
            rows = rows.frame
        missing = [c for c in self.source_columns if c not in rows.columns]
        if missing:
            raise SchemaError(f"missing columns: {missing}")
        parts = []
        for name in self.source_columns:
            col = rows[name]
            enc = self.encodings.get(name)
            if enc is None:
                parts.append(pd.to_numeric(col).to_numpy(dtype=float)[:, None])
            elif enc["type"] == "binary":
                codes = col.map({v: float(i) for i, v in enumerate(enc["levels"])})
                if codes.isna().any():
                    raise SchemaError(f"unknown value in binary column {name!r}")
                parts.append(codes.to_numpy(dtype=float)[:, None])
            else:
                parts.append(np.column_stack(
                    [(col == level).to_numpy(dtype=float) for level in enc["levels"]]))
        return np.hstack(parts) if parts else np.zeros((len(rows), 0))

    def decision_function(self, rows):
        return self.estimator.decision_function(self.design(rows))

    def predict_proba(self, rows):
        return self.estimator.predict_proba(self.design(rows))[:, 0]

    def predict(self, rows):
        return self.estimator.predict(self.design(rows))

    def to_dict(self):
        est = self.estimator
        return {
            "format": "fairrank.LogRegModel",
            "subset": self.subset,
            "columns": list(self.columns),
            "source_columns": list(self.source_columns),
            "encodings": self.encodings,
            "coef": est.coef_.tolist(),
            "intercept": est.intercept_,
            "mean": est.mean_.tolist(),
            "scale": est.scale_.tolist(),
            "l2": est.l2,
            "converged": est.converged_,
            "seed": self.seed,
        }


def _encode_protected(dataset, feat):
    values = dataset.frame[feat.name]
    levels = sorted(pd.unique(values).tolist(), key=str)
    if feat.kind == "categorical":
        return {"type": "onehot", "levels": levels}, [f"{feat.name}={lv}" for lv in levels]
    if feat.kind == "binary" and not pd.api.types.is_numeric_dtype(values):
        return {"type": "binary", "levels": levels}, [feat.name]
    return None, [feat.name]


def train_logreg(dataset, subset="all", l2=1.0, max_iter=1000, seed=0):
    """Fit a baseline on ``dataset``.

    ``subset="ftu"`` drops every protected column, so the fitted model
    cannot read them.
    """
    if subset not in SUBSETS:
        raise ValueError(f"subset must be one of {SUBSETS}, got {subset!r}")
    if dataset.labels is None:
        raise ValueError("baselines need labels")
    check_both_classes(dataset.labels)
    encodings, columns, sources = {}, [], []
    if subset == "all":
        for feat in dataset.protected:
            enc, cols = _encode_protected(dataset, feat)
            if enc is not None:
                encodings[feat.name] = enc
            columns += cols
            sources.append(feat.name)
    columns += dataset.legitimate_names
    sources += dataset.legitimate_names
    if not columns:
        raise ValueError("empty feature subset")
    model = LogRegModel(L2LogisticRegression(l2=l2, max_iter=max_iter), subset,
                        tuple(columns), tuple(sources), encodings, seed)
    model.estimator.fit(model.design(dataset), dataset.labels)
    return model


def rank_by_probability(model, rows):
    """1-based positions by descending P(+), ties kept in input order.

    The linear score is used for sorting; it orders rows exactly like the
    probability but does not saturate to 1.0 for large scores.
    """
    score = model.decision_function(rows)
    order = np.argsort(-score, kind="stable")
    positions = np.empty(len(score), dtype=int)
    positions[order] = np.arange(1, len(score) + 1)
    return positions


def label_top_alpha(positions, alpha):
    """Label the top ``ceil(alpha * n)`` ranked rows ``"+"``."""
    alpha = check_alpha(alpha, open_interval=False)
    positions = np.asarray(positions)
    nu = cutoff_index(alpha, len(positions))
    return np.where(positions <= nu, POSITIVE, NEGATIVE)
