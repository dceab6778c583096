"""Feature-importance weights learned from historical labels.

A random forest is fit on the scaled legitimate features, then each
feature's column is shuffled on held-out rows and the resulting drop in
accuracy is recorded. Mean drops are clipped at zero and normalized to sum
to one. If the forest cannot beat the majority-class rate by a margin, the
weights fall back to uniform.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from ._validation import check_both_classes, positive_mask

__all__ = [
    "ForestParams",
    "ForestModel",
    "ImportanceWeights",
    "train_forest",
    "forest_predict",
    "permutation_importance",
]


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    max_depth: int | None = 8
    max_features: str | int | float | None = "sqrt"
    min_samples_leaf: int = 1

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ForestModel:
    estimator: RandomForestClassifier
    n_features: int
    train_accuracy: float
    heldout_accuracy: float
    majority_rate: float


def _seed_int(seed):
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1)[0])
    return seed


def _split(n, holdout, rng):
    n_hold = int(round(holdout * n))
    if n_hold == 0 or n_hold >= n:
        idx = np.arange(n)
        return idx, idx[:0]
    perm = rng.permutation(n)
    return np.sort(perm[n_hold:]), np.sort(perm[:n_hold])


def _fit_rf(Z, target, params, seed):
    rf = RandomForestClassifier(
        n_estimators=params.n_estimators,
        max_depth=params.max_depth,
        max_features=params.max_features,
        min_samples_leaf=params.min_samples_leaf,
        bootstrap=True,
        random_state=seed,
        n_jobs=1,
    )
    return rf.fit(Z, target)


def train_forest(Z, y, params=None, seed=0, holdout=0.25):
    """Fit a bootstrapped random forest predicting ``y == "+"`` from ``Z``.

    A ``holdout`` share of rows is kept aside to report out-of-sample
    accuracy (NaN when nothing is held out).
    """
    params = params or ForestParams()
    Z = np.asarray(Z, dtype=float)
    check_both_classes(y)
    target = positive_mask(y)
    ss = np.random.SeedSequence(_seed_int(seed))
    split_ss, fit_ss = ss.spawn(2)
    train_idx, hold_idx = _split(len(target), holdout, np.random.default_rng(split_ss))
    if target[train_idx].all() or not target[train_idx].any():
        train_idx, hold_idx = np.arange(len(target)), np.arange(0)
    rf = _fit_rf(Z[train_idx], target[train_idx], params, _seed_int(fit_ss))
    model = ForestModel(rf, Z.shape[1], np.nan, np.nan, np.nan)
    model.train_accuracy = float(np.mean(
        (forest_predict(model, Z[train_idx]) > 0.5) == target[train_idx]))
    if len(hold_idx):
        model.heldout_accuracy = float(np.mean(
            (forest_predict(model, Z[hold_idx]) > 0.5) == target[hold_idx]))
        # accuracy of the best constant prediction on the held-out rows
        share = target[hold_idx].mean()
        model.majority_rate = float(max(share, 1.0 - share))
    model.train_index = train_idx
    model.holdout_index = hold_idx
    return model


def forest_predict(model, Z):
    """Mean of the trees' leaf class fractions, i.e. an estimate of P(+)."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} columns, got shape {Z.shape}")
    proba = model.estimator.predict_proba(Z)
    classes = list(model.estimator.classes_)
    if True not in classes:
        return np.zeros(Z.shape[0])
    return proba[:, classes.index(True)]


@dataclass(frozen=True)
class ImportanceWeights:
    names: tuple
    omega: np.ndarray
    sigma: np.ndarray
    fallback: bool = False
    heldout_accuracy: float = float("nan")
    train_accuracy: float = float("nan")
    majority_rate: float = float("nan")
    raw_drops: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def uniform(cls, names, degenerate=None, **info):
        L = len(names)
        active = np.ones(L, dtype=bool) if degenerate is None else ~np.asarray(degenerate)
        omega = np.where(active, 1.0, 0.0)
        if active.any():
            omega = omega / omega.sum()
        return cls(tuple(names), omega, np.zeros(L), fallback=True, **info)

    @classmethod
    def given(cls, names, omega, degenerate=None):
        """User-supplied weights, clipped at zero and renormalized."""
        omega = np.clip(np.asarray(omega, dtype=float), 0.0, None)
        if degenerate is not None:
            omega = np.where(degenerate, 0.0, omega)
        if omega.sum() <= 0:
            raise ValueError("weights must have a positive sum")
        return cls(tuple(names), omega / omega.sum(), np.zeros(len(omega)))

    def to_dict(self):
        return {
            "names": list(self.names),
            "omega": self.omega.tolist(),
            "sigma": self.sigma.tolist(),
            "fallback": self.fallback,
            "heldout_accuracy": self.heldout_accuracy,
            "train_accuracy": self.train_accuracy,
            "majority_rate": self.majority_rate,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), np.asarray(d["omega"], dtype=float),
                   np.asarray(d["sigma"], dtype=float), bool(d["fallback"]),
                   d.get("heldout_accuracy", float("nan")),
                   d.get("train_accuracy", float("nan")),
                   d.get("majority_rate", float("nan")))


def _accuracy(model, Z, target):
    return float(np.mean((forest_predict(model, Z) > 0.5) == target))


def permutation_importance(Z, y, n_models=5, n_permutations=10, *, params=None,
                           holdout=0.25, on="holdout", gate_margin=0.02,
                           degenerate=None, names=None, seed=0):
    """Permutation importance averaged over refits and shuffles.

    Parameters
    ----------
    Z : ndarray of shape (n, L)
        Scaled legitimate features.
    y : array-like of {"+", "-"}
        Historical labels.
    n_models : int
        Number of forests, each fit on a fresh train/holdout split.
    n_permutations : int
        Shuffles per feature per forest.
    on : {"holdout", "train"}
        Rows on which the accuracy drop is measured.
    gate_margin : float
        Uniform weights are returned unless mean held-out accuracy exceeds the
        majority-class rate by at least this much.
    degenerate : array-like of bool, optional
        Constant features; their weight is forced to zero.

    Returns
    -------
    ImportanceWeights
    """
    if n_models < 1 or n_permutations < 1:
        raise ValueError("n_models and n_permutations must be at least 1")
    if on not in ("holdout", "train"):
        raise ValueError(f"on must be 'holdout' or 'train', got {on!r}")
    Z = np.asarray(Z, dtype=float)
    n, L = Z.shape
    names = tuple(names) if names is not None else tuple(range(L))
    degenerate = np.zeros(L, dtype=bool) if degenerate is None else np.asarray(degenerate, bool)
    target = positive_mask(y)

    drops = np.zeros((L, n_models * n_permutations))
    held, train_acc, majority = [], [], []
    for r, child in enumerate(np.random.SeedSequence(_seed_int(seed)).spawn(n_models)):
        fit_ss, perm_ss = child.spawn(2)
        model = train_forest(Z, y, params, seed=fit_ss, holdout=holdout)
        train_acc.append(model.train_accuracy)
        if len(model.holdout_index):
            held.append(model.heldout_accuracy)
            majority.append(model.majority_rate)
        rows = model.holdout_index if on == "holdout" and len(model.holdout_index) \
            else model.train_index
        Ze, te = Z[rows], target[rows]
        base = _accuracy(model, Ze, te)
        perm_rngs = [np.random.default_rng(s) for s in perm_ss.spawn(L)]
        for ell in range(L):
            for p in range(n_permutations):
                Zp = Ze.copy()
                Zp[:, ell] = perm_rngs[ell].permutation(Zp[:, ell])
                drops[ell, r * n_permutations + p] = base - _accuracy(model, Zp, te)

    info = dict(
        heldout_accuracy=float(np.mean(held)) if held else float("nan"),
        train_accuracy=float(np.mean(train_acc)),
        majority_rate=float(np.mean(majority)) if majority else float("nan"),
    )
    if held:
        useful = info["heldout_accuracy"] >= info["majority_rate"] + gate_margin
    else:
        useful = info["train_accuracy"] >= np.mean(target == (target.mean() >= 0.5)) + gate_margin
    mean = np.where(degenerate, 0.0, np.clip(drops.mean(axis=1), 0.0, None))
    total = mean.sum()
    if not useful or total <= 0:
        return ImportanceWeights.uniform(names, degenerate, **info)
    return ImportanceWeights(names, mean / total, drops.std(axis=1) / total,
                             fallback=False, raw_drops=drops, **info)
