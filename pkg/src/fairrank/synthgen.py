"""Synthetic graduate-admission cohorts with biased historical labels.

GRE Verbal, Quantitative and Analytical Writing scores are drawn from
gender-specific multivariate normals, rounded to the official increments
and truncated to the official ranges. Two label generators simulate past
admission decisions: a fixed rule that favors men by a constant bonus, and a
score whose gender weight grows with a discrimination knob ``zeta``.

Every observation draws from its own random substream, so a larger cohort
generated with the same seed extends a smaller one.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ._validation import NEGATIVE, POSITIVE
from .dataset import Dataset, apply_scaling, fit_scaling

__all__ = [
    "CohortSpec",
    "LabelGenSpec",
    "sample_cohort",
    "label_running_example",
    "label_zeta",
    "zeta_weights",
    "GENDER",
    "FEATURES",
]

GENDER = "gender"
FEATURES = ("gre_v", "gre_q", "gre_aw")
MALE, FEMALE = "male", "female"

_MU_M = (150.7, 156.1, 3.5)
_MU_F = (150.3, 151.2, 3.7)
_SIGMA_M = ((81.00, 28.15, 5.43),
            (28.15, 84.64, 1.16),
            (5.43, 1.16, 0.81))
_SIGMA_F = ((65.61, 24.51, 4.34),
            (24.51, 79.21, 1.00),
            (4.34, 1.00, 0.64))

# stream tags for per-observation substreams
_FEATURE_STREAM = 0
_NOISE_STREAM = 1


def _as_tuple(x):
    return tuple(tuple(r) if np.ndim(r) else r for r in np.asarray(x).tolist())


@dataclass(frozen=True)
class CohortSpec:
    n: int = 1000
    male_share: float = 0.5
    mu_m: tuple = _MU_M
    mu_f: tuple = _MU_F
    sigma_m: tuple = _SIGMA_M
    sigma_f: tuple = _SIGMA_F
    verbal_range: tuple = (130, 170)
    quant_range: tuple = (130, 170)
    writing_range: tuple = (0.0, 6.0)
    writing_step: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("mu_m", "mu_f", "sigma_m", "sigma_f"):
            object.__setattr__(self, name, _as_tuple(getattr(self, name)))
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 <= self.male_share <= 1.0:
            raise ValueError("male_share must lie in [0, 1]")
        for name in ("sigma_m", "sigma_f"):
            cov = np.asarray(getattr(self, name), dtype=float)
            if cov.shape != (3, 3) or not np.allclose(cov, cov.T):
                raise ValueError(f"{name} must be a symmetric 3x3 matrix")
            if np.linalg.eigvalsh(cov).min() <= 0:
                raise ValueError(f"{name} is not positive definite")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class LabelGenSpec:
    """Label rule: ``"running"`` (uniform noise) or ``"zeta"`` (normal noise)."""

    variant: str = "zeta"
    zeta: float = 0.0
    noise_sd: float = 0.1
    noise_high: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("running", "zeta"):
            raise ValueError(f"unknown label variant {self.variant!r}")
        if self.zeta < 0:
            raise ValueError("zeta must be non-negative")


def _substream(seed, stream, i):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, i)))


def _is_male(n, share):
    # observation i is male when floor((i+1)*share) steps up; exact count, prefix-stable
    i = np.arange(n)
    return np.floor((i + 1) * share + 1e-9) > np.floor(i * share + 1e-9)


def sample_cohort(spec=None):
    """Draw an unlabeled cohort (``gender`` protected, three GRE scores legitimate)."""
    spec = spec or CohortSpec()
    male = _is_male(spec.n, spec.male_share)
    chol = {True: np.linalg.cholesky(np.asarray(spec.sigma_m, dtype=float)),
            False: np.linalg.cholesky(np.asarray(spec.sigma_f, dtype=float))}
    mu = {True: np.asarray(spec.mu_m, dtype=float), False: np.asarray(spec.mu_f, dtype=float)}
    raw = np.empty((spec.n, 3))
    for i in range(spec.n):
        eps = _substream(spec.seed, _FEATURE_STREAM, i).standard_normal(3)
        raw[i] = mu[bool(male[i])] + chol[bool(male[i])] @ eps

    step = spec.writing_step
    scores = np.column_stack([
        np.clip(np.round(raw[:, 0]), *spec.verbal_range),
        np.clip(np.round(raw[:, 1]), *spec.quant_range),
        np.clip(np.round(raw[:, 2] / step) * step, *spec.writing_range),
    ])
    frame = pd.DataFrame(scores, columns=list(FEATURES))
    frame.insert(0, GENDER, np.where(male, MALE, FEMALE))
    return Dataset.from_frame(frame, {f: "up" for f in FEATURES}, [GENDER],
                              ids=np.arange(1, spec.n + 1), kinds={GENDER: "binary"})


def _scaled_scores(cohort):
    # labels use min-max scaling over the cohort itself
    return apply_scaling(fit_scaling(cohort), cohort.frame[list(FEATURES)])


def _noise(n, seed, draw):
    return np.array([draw(_substream(seed, _NOISE_STREAM, i)) for i in range(n)])


def _male_indicator(cohort):
    return (cohort.frame[GENDER].to_numpy() == MALE).astype(float)


def label_running_example(cohort, seed=0, noise_high=0.1):
    """``+`` iff ``0.1*male + 0.2*V + 0.5*Q + 0.2*AW + U(0, 0.1) > 0.5``."""
    Z = _scaled_scores(cohort)
    eps = _noise(cohort.n, seed, lambda g: g.uniform(0.0, noise_high))
    score = 0.1 * _male_indicator(cohort) + Z @ np.array([0.2, 0.5, 0.2]) + eps
    return np.where(score > 0.5, POSITIVE, NEGATIVE)


def zeta_weights(zeta):
    """Weights ``(male, V, Q, AW)`` of the zeta score; they sum to one."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    return np.array([zeta, 1.0, 2.0, 1.0]) / (zeta + 4.0)


def label_zeta(cohort, zeta, seed=0, noise_sd=0.1):
    """``+`` iff ``R > 0.5`` with ``R`` the zeta-weighted score plus N(0, noise_sd^2)."""
    w = zeta_weights(zeta)
    Z = _scaled_scores(cohort)
    eps = _noise(cohort.n, seed, lambda g: g.normal(0.0, noise_sd))
    R = w[0] * _male_indicator(cohort) + Z @ w[1:] + eps
    return np.where(R > 0.5, POSITIVE, NEGATIVE)


def generate_labels(cohort, spec):
    if spec.variant == "running":
        return label_running_example(cohort, spec.seed, spec.noise_high)
    return label_zeta(cohort, spec.zeta, spec.seed, spec.noise_sd)
