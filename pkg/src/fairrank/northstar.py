"""Ranking and classification by distance to the all-ones "North Star".

Every observation's scaled legitimate features ``z`` are compared with the
ideal point ``(1, ..., 1)`` under a weighted taxicab distance

    d''(i) = sum_l psi_l * (1 - z_l(i)),    psi_l = omega_l * (1 - rho_tilde_l)

where ``omega`` are importance weights learned from historical labels and
``rho_tilde`` penalizes features associated with protected attributes.
Observations are ranked by ascending distance; the top ``ceil(alpha * N)``
get the positive outcome and the midpoint distance between the last
positive and the first negative becomes the decision threshold for unseen
observations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import (NEGATIVE, POSITIVE, SchemaError, check_alpha,
                          check_both_classes, check_unit_interval, check_weights,
                          cutoff_index, positive_mask)
from .correlation import PenaltyVector, penalty_vector
from .dataset import Dataset, ScalingSpec, apply_scaling, fit_scaling
from .importance import ForestParams, ImportanceWeights, permutation_importance

__all__ = [
    "RankConfig",
    "RankModel",
    "RankedCohort",
    "FairRankingClassifier",
    "north_star",
    "distance_plain",
    "distance_weighted",
    "distance_penalized",
    "effective_weights",
    "fit",
    "predict",
    "rank",
]

MODEL_FORMAT_VERSION = 1


def north_star(n_features):
    return np.ones(n_features)


def _as_rows(Z):
    Z = check_unit_interval(Z)
    return Z if Z.ndim == 2 else Z[None, :]


def _squeeze(d, z):
    return float(d[0]) if np.ndim(z) == 1 else d


def distance_plain(z):
    """Unweighted taxicab distance to the North Star (row or matrix)."""
    rows = _as_rows(z)
    return _squeeze((1.0 - rows).sum(axis=1), z)


def distance_weighted(z, omega):
    rows = _as_rows(z)
    omega = check_weights(omega, rows.shape[1], "omega")
    return _squeeze((1.0 - rows) @ omega, z)


def _penalized(rows, psi):
    # fixed left-to-right accumulation; no BLAS reordering
    d = np.zeros(rows.shape[0])
    for ell in range(rows.shape[1]):
        d += psi[ell] * (1.0 - rows[:, ell])
    return d


def distance_penalized(z, psi):
    """Distance with effective weights ``psi = omega * (1 - rho_tilde)``."""
    rows = _as_rows(z)
    psi = check_weights(psi, rows.shape[1], "psi")
    if np.any(psi < 0) or np.any(psi > 1):
        raise ValueError("psi entries must lie in [0, 1]")
    return _squeeze(_penalized(rows, psi), z)


def effective_weights(omega, rho_tilde):
    omega = np.asarray(omega, dtype=float)
    rho_tilde = np.asarray(rho_tilde, dtype=float)
    return np.clip(omega * (1.0 - rho_tilde), 0.0, 1.0)


def rank_order(distances, Z, psi):
    """Indices sorted by ascending distance.

    Ties in distance are broken lexicographically on ``1 - z`` over features
    with positive weight, then by original index. The lexicographic step
    keeps a dominating row ahead of a dominated one even when floating-point
    rounding makes their distances compare equal.
    """
    n = len(distances)
    active = np.flatnonzero(np.asarray(psi) > 0)
    keys = [np.arange(n)]
    keys += [1.0 - Z[:, ell] for ell in active[::-1]]
    keys.append(np.asarray(distances))
    return np.lexsort(keys)


@dataclass(frozen=True)
class RankConfig:
    forest: ForestParams = field(default_factory=ForestParams)
    n_models: int = 5
    n_permutations: int = 10
    holdout: float = 0.25
    importance_on: str = "holdout"
    gate_margin: float = 0.02

    def to_dict(self):
        d = asdict(self)
        d["forest"] = self.forest.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        forest = ForestParams(**d.pop("forest", {}))
        return cls(forest=forest, **d)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class RankedCohort:
    """Observations with their distance, rank position and outcome.

    Arrays are in the original row order; ``positions[i]`` is the 1-based
    rank of row ``i``.
    """

    ids: np.ndarray
    Z: np.ndarray
    distances: np.ndarray
    positions: np.ndarray
    outcomes: np.ndarray | None = None
    feature_names: tuple = ()

    @property
    def n(self):
        return len(self.distances)

    @property
    def order(self):
        """Row indices from rank 1 to rank N."""
        return np.argsort(self.positions, kind="stable")

    def to_frame(self):
        df = pd.DataFrame({
            "id": self.ids,
            "distance": self.distances,
            "rank": self.positions,
            "outcome": self.outcomes if self.outcomes is not None else "",
        })
        names = self.feature_names or tuple(range(self.Z.shape[1]))
        for ell, name in enumerate(names):
            df[f"z:{name}"] = self.Z[:, ell]
        return df.iloc[self.order].reset_index(drop=True)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path):
        df = pd.read_csv(path, keep_default_na=False, float_precision="round_trip")
        for col in ("id", "distance", "rank", "outcome"):
            if col not in df.columns:
                raise SchemaError(f"cohort CSV lacks column {col!r}")
        zcols = [c for c in df.columns if c.startswith("z:")]
        outcomes = df["outcome"].astype(str).to_numpy()
        if (outcomes == "").all():
            outcomes = None
        return cls(
            ids=df["id"].to_numpy(),
            Z=df[zcols].to_numpy(dtype=float),
            distances=df["distance"].to_numpy(dtype=float),
            positions=df["rank"].to_numpy(dtype=int),
            outcomes=outcomes,
            feature_names=tuple(c[2:] for c in zcols),
        )


@dataclass(frozen=True)
class RankModel:
    scaling: ScalingSpec
    weights: ImportanceWeights
    penalty: PenaltyVector
    psi: np.ndarray
    alpha: float
    nu: int
    delta: float
    metadata: dict = field(default_factory=dict)

    @property
    def feature_names(self):
        return self.scaling.names

    @property
    def protected_names(self):
        return self.penalty.protected

    def to_dict(self):
        return {
            "format": "fairrank.RankModel",
            "version": MODEL_FORMAT_VERSION,
            "scaling": self.scaling.to_dict(),
            "importance": self.weights.to_dict(),
            "penalty": self.penalty.to_dict(),
            "psi": self.psi.tolist(),
            "alpha": self.alpha,
            "nu": self.nu,
            "delta": self.delta,
            "metadata": self.metadata,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, default=_json_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "fairrank.RankModel":
            raise SchemaError("not a RankModel artifact")
        if d.get("version") != MODEL_FORMAT_VERSION:
            raise SchemaError(f"unsupported artifact version {d.get('version')}")
        return cls(
            scaling=ScalingSpec.from_dict(d["scaling"]),
            weights=ImportanceWeights.from_dict(d["importance"]),
            penalty=PenaltyVector.from_dict(d["penalty"]),
            psi=np.asarray(d["psi"], dtype=float),
            alpha=float(d["alpha"]),
            nu=int(d["nu"]),
            delta=float(d["delta"]),
            metadata=d.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _label_cohort(order, n, nu):
    outcomes = np.full(n, NEGATIVE, dtype="<U1")
    outcomes[order[:nu]] = POSITIVE
    return outcomes


def _threshold(sorted_d, nu):
    if nu >= len(sorted_d):
        return float(sorted_d[-1])
    return float((sorted_d[nu - 1] + sorted_d[nu]) / 2.0)


def fit(dataset, alpha=None, config=None, seed=0, weights=None):
    """Scale, weight, penalize, rank and label ``dataset``.

    Parameters
    ----------
    dataset : Dataset
    alpha : float in (0, 1), optional
        Capacity share. Defaults to the share of positive labels.
    config : RankConfig, optional
    seed : int
        Seed for the importance estimation.
    weights : ImportanceWeights or array-like, optional
        Skip importance learning and use these weights instead.

    Returns
    -------
    model : RankModel
    cohort : RankedCohort
    """
    config = config or RankConfig()
    if dataset.n == 0:
        raise SchemaError("cannot fit on an empty dataset")
    if alpha is None:
        if dataset.labels is None:
            raise ValueError("alpha is required when the dataset has no labels")
        alpha = float(positive_mask(dataset.labels).mean())
    alpha = check_alpha(alpha)

    spec = fit_scaling(dataset)
    Z = apply_scaling(spec, dataset)
    names = dataset.legitimate_names
    if weights is not None:
        if not isinstance(weights, ImportanceWeights):
            weights = ImportanceWeights.given(names, weights, spec.degenerate)
        elif spec.degenerate.any() and np.any(weights.omega[spec.degenerate] > 0):
            weights = ImportanceWeights.given(names, weights.omega, spec.degenerate)
    elif dataset.labels is None:
        weights = ImportanceWeights.uniform(names, spec.degenerate)
    else:
        check_both_classes(dataset.labels)
        weights = permutation_importance(
            Z, dataset.labels, config.n_models, config.n_permutations,
            params=config.forest, holdout=config.holdout, on=config.importance_on,
            gate_margin=config.gate_margin, degenerate=spec.degenerate,
            names=names, seed=seed)

    penalty = penalty_vector(dataset, Z)
    psi = effective_weights(weights.omega, penalty.rho_tilde)
    distances = _penalized(Z, psi)
    order = rank_order(distances, Z, psi)
    positions = np.empty(dataset.n, dtype=int)
    positions[order] = np.arange(1, dataset.n + 1)

    nu = cutoff_index(alpha, dataset.n)
    sorted_d = distances[order]
    delta = _threshold(sorted_d, nu)
    tie = nu < dataset.n and sorted_d[nu - 1] == sorted_d[nu]
    metadata = {
        "n": dataset.n,
        "seed": seed,
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "cutoff_tie": bool(tie),
    }
    model = RankModel(spec, weights, penalty, psi, alpha, nu, delta, metadata)
    ids = dataset.ids if dataset.ids is not None else np.arange(1, dataset.n + 1)
    cohort = RankedCohort(ids, Z, distances, positions,
                          _label_cohort(order, dataset.n, nu), tuple(names))
    return model, cohort


def _scale_rows(model, rows):
    if isinstance(rows, Dataset):
        rows = rows.frame[rows.legitimate_names]
    elif isinstance(rows, pd.DataFrame):
        drop = [c for c in rows.columns if c in model.protected_names]
        rows = rows.drop(columns=drop)
    return apply_scaling(model.scaling, rows)


def distances(model, rows):
    return _penalized(_scale_rows(model, rows), model.psi)


def predict(model, rows):
    """Classify rows with the stored threshold: ``"+"`` iff ``d'' <= delta``.

    Returns
    -------
    outcomes : ndarray of {"+", "-"}
    distances : ndarray
    """
    d = distances(model, rows)
    return np.where(d <= model.delta, POSITIVE, NEGATIVE), d


def rank(model, rows, alpha=None, ids=None):
    """Rank arbitrary rows with a fitted model.

    When ``alpha`` in ``[0, 1]`` is given, the top ``ceil(alpha * n)`` rows
    are labeled ``"+"``.
    """
    if ids is None and isinstance(rows, Dataset):
        ids = rows.ids
    Z = _scale_rows(model, rows)
    n = Z.shape[0]
    d = _penalized(Z, model.psi)
    order = rank_order(d, Z, model.psi)
    positions = np.empty(n, dtype=int)
    positions[order] = np.arange(1, n + 1)
    outcomes = None
    if alpha is not None:
        alpha = check_alpha(alpha, open_interval=False)
        outcomes = _label_cohort(order, n, cutoff_index(alpha, n))
    ids = np.arange(1, n + 1) if ids is None else np.asarray(ids)
    return RankedCohort(ids, Z, d, positions, outcomes, tuple(model.feature_names))


class FairRankingClassifier(ClassifierMixin, BaseEstimator):
    """Rank-then-threshold classifier that ignores protected attributes.

    Parameters
    ----------
    directions : dict
        Legitimate column -> ``"up"`` or ``"down"``. Columns of ``X`` are
        addressed by DataFrame label, or by integer position for arrays.
    protected : sequence, default=()
        Protected columns. They are used only to penalize correlated
        legitimate features, never for scoring.
    alpha : float, optional
        Capacity share; defaults to the positive rate of ``y``.
    random_state : int, RandomState or None

    Attributes
    ----------
    model_ : RankModel
    cohort_ : RankedCohort
        Ranking and labels of the training rows.
    """

    def __init__(self, directions=None, protected=(), alpha=None, n_estimators=100,
                 max_depth=8, n_models=5, n_permutations=10, holdout=0.25,
                 importance_on="holdout", gate_margin=0.02, weights=None,
                 random_state=None):
        self.directions = directions
        self.protected = protected
        self.alpha = alpha
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.n_models = n_models
        self.n_permutations = n_permutations
        self.holdout = holdout
        self.importance_on = importance_on
        self.gate_margin = gate_margin
        self.weights = weights
        self.random_state = random_state

    def _frame(self, X):
        return X if isinstance(X, pd.DataFrame) else pd.DataFrame(np.asarray(X))

    def fit(self, X, y=None):
        frame = self._frame(X)
        directions = self.directions
        if directions is None:
            directions = {c: "up" for c in frame.columns if c not in set(self.protected)}
        dataset = Dataset.from_frame(frame, directions, self.protected, labels=y)
        config = RankConfig(
            forest=ForestParams(n_estimators=self.n_estimators, max_depth=self.max_depth),
            n_models=self.n_models, n_permutations=self.n_permutations,
            holdout=self.holdout, importance_on=self.importance_on,
            gate_margin=self.gate_margin)
        seed = int(check_random_state(self.random_state).randint(np.iinfo(np.int32).max))
        self.model_, self.cohort_ = fit(dataset, self.alpha, config, seed, self.weights)
        self.legitimate_ = list(directions)
        self.classes_ = np.array([POSITIVE, NEGATIVE])
        self.n_features_in_ = frame.shape[1]
        return self

    def _rows(self, X):
        check_is_fitted(self, "model_")
        frame = self._frame(X)
        missing = [c for c in self.legitimate_ if c not in frame.columns]
        if missing:
            raise SchemaError(f"missing columns: {missing}")
        return frame[self.legitimate_]

    def predict(self, X):
        return predict(self.model_, self._rows(X))[0]

    def decision_function(self, X):
        """``delta - d''``; non-negative values are classified ``"+"``."""
        return self.model_.delta - distances(self.model_, self._rows(X))

    def distance(self, X):
        return distances(self.model_, self._rows(X))

    def rank(self, X, alpha=None):
        return rank(self.model_, self._rows(X), alpha)
