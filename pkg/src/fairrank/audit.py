"""Meritocratic unfairness and group statistics.

Observation ``i`` is *more qualified* than ``j`` when its scaled features are
all at least as good and strictly better on some feature that carries
positive effective weight. ``i`` is treated unfairly over ``j`` when it is
more qualified but ranked lower, or labeled ``"-"`` while ``j`` is ``"+"``.

``S`` is the share of observations treated unfairly over at least one other
observation; ``T`` counts the ordered (victim, beneficiary) pairs.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import POSITIVE, check_weights

__all__ = [
    "AuditReport",
    "GroupStats",
    "more_qualified",
    "dominance_matrix",
    "unfairness_of_ranking",
    "unfairness_of_labels",
    "similarity",
    "group_stats",
    "accuracy",
    "audit_report",
]


def more_qualified(zi, zj, psi):
    zi = np.asarray(zi, dtype=float)
    zj = np.asarray(zj, dtype=float)
    psi = check_weights(psi, zi.shape[0], "psi")
    if zj.shape != zi.shape:
        raise ValueError("rows have different lengths")
    return bool(np.all(zi >= zj) and np.any((zi > zj) & (psi > 0)))


def dominance_matrix(Z, psi, chunk=256):
    """Boolean matrix ``M[i, j]`` = row ``i`` is more qualified than row ``j``."""
    Z = np.asarray(Z, dtype=float)
    psi = check_weights(psi, Z.shape[1], "psi")
    active = psi > 0
    n = Z.shape[0]
    out = np.zeros((n, n), dtype=bool)
    for start in range(0, n, chunk):
        block = Z[start:start + chunk, None, :]
        geq = np.all(block >= Z[None, :, :], axis=2)
        strict = np.any((block > Z[None, :, :]) & active, axis=2)
        out[start:start + chunk] = geq & strict
    return out


def _summarize(unfair_pairs):
    n = unfair_pairs.shape[0]
    T = int(unfair_pairs.sum())
    victims = int(unfair_pairs.any(axis=1).sum())
    return (victims / n if n else 0.0), T


def unfairness_of_ranking(cohort, psi, Z=None):
    """``(S, T)`` for a ranking.

    ``cohort`` is a :class:`~fairrank.northstar.RankedCohort` or an array of
    1-based rank positions (then ``Z`` is required).
    """
    if Z is None:
        positions, Z = cohort.positions, cohort.Z
    else:
        positions = cohort
    positions = np.asarray(positions)
    dom = dominance_matrix(Z, psi)
    ranked_lower = positions[:, None] > positions[None, :]
    return _summarize(dom & ranked_lower)


def unfairness_of_labels(outcomes, Z, psi):
    """``(S, T)`` from outcomes only; ranks within a class are not consulted."""
    outcomes = np.asarray(outcomes)
    Z = np.asarray(Z, dtype=float)
    if outcomes.shape[0] != Z.shape[0]:
        raise ValueError("outcomes and Z have different lengths")
    dom = dominance_matrix(Z, psi)
    pos = outcomes == POSITIVE
    return _summarize(dom & (~pos)[:, None] & pos[None, :])


def similarity(zi, zj, psi):
    """Weighted taxicab distance between two scaled observations."""
    zi = np.asarray(zi, dtype=float)
    zj = np.asarray(zj, dtype=float)
    psi = check_weights(psi, zi.shape[0], "psi")
    if zj.shape != zi.shape:
        raise ValueError("rows have different lengths")
    return float(np.sum(psi * np.abs(zi - zj)))


@dataclass
class GroupStats:
    rates: dict
    ratio: float
    disadvantaged: object = None
    reference: object = None
    degenerate: bool = False
    counts: dict = field(default_factory=dict)
    count_ratio: float | None = None


def group_stats(outcomes, protected, disadvantaged=None, reference=None):
    """Admission rate per group and the ratio ``rate[disadvantaged] / rate[reference]``.

    Without explicit groups, the group with the lower rate is taken as
    disadvantaged (the ratio is then at most one). A zero reference rate
    gives ratio 0.0 with ``degenerate=True``.

    ``count_ratio`` divides admitted counts instead of rates, so it also
    reflects unequal group sizes. It follows the same zero convention.
    """
    outcomes = np.asarray(outcomes)
    protected = np.asarray(protected)
    if outcomes.shape[0] != protected.shape[0]:
        raise ValueError("outcomes and protected values have different lengths")
    groups = sorted(set(protected.tolist()), key=str)
    rates = {g: float(np.mean(outcomes[protected == g] == POSITIVE)) for g in groups}
    counts = {g: int(np.sum(outcomes[protected == g] == POSITIVE)) for g in groups}
    for g in (disadvantaged, reference):
        if g is not None and g not in rates:
            raise ValueError(f"unknown group {g!r}; present: {groups}")
    if disadvantaged is None and reference is None:
        if len(groups) < 2:
            return GroupStats(rates, 1.0, degenerate=len(groups) == 0, counts=counts,
                              count_ratio=1.0)
        ordered = sorted(groups, key=lambda g: (rates[g], str(g)))
        disadvantaged, reference = ordered[0], ordered[-1]
    elif reference is None:
        others = [g for g in groups if g != disadvantaged]
        reference = max(others, key=lambda g: rates[g])
    elif disadvantaged is None:
        others = [g for g in groups if g != reference]
        disadvantaged = min(others, key=lambda g: rates[g])
    ref_rate = rates[reference]
    if ref_rate == 0.0:
        return GroupStats(rates, 0.0, disadvantaged, reference, degenerate=True,
                          counts=counts, count_ratio=0.0)
    return GroupStats(rates, rates[disadvantaged] / ref_rate, disadvantaged, reference,
                      counts=counts, count_ratio=counts[disadvantaged] / counts[reference])


def accuracy(outcomes, reference):
    outcomes = np.asarray(outcomes)
    reference = np.asarray(reference)
    if outcomes.shape != reference.shape:
        raise ValueError("length mismatch")
    if outcomes.size == 0:
        return float("nan")
    return float(np.mean(outcomes == reference))


@dataclass
class AuditReport:
    method: str
    basis: str
    n: int
    S: float
    T: int
    alpha: float | None = None
    accuracy: float | None = None
    rates: dict = field(default_factory=dict)
    ratio: float | None = None
    count_ratio: float | None = None
    ratio_degenerate: bool = False

    def __post_init__(self):
        if not 0.0 <= self.S <= 1.0 or self.T < 0 or (self.S == 0) != (self.T == 0):
            raise ValueError(f"inconsistent audit values S={self.S}, T={self.T}")

    def to_dict(self):
        d = asdict(self)
        d["rates"] = {str(k): v for k, v in self.rates.items()}
        return d

    def to_row(self):
        """Flat dict suitable for one CSV row."""
        d = self.to_dict()
        rates = d.pop("rates")
        for group, rate in rates.items():
            d[f"rate[{group}]"] = rate
        return d


def audit_report(Z, psi, *, outcomes=None, positions=None, labels=None,
                 protected=None, disadvantaged=None, reference=None,
                 alpha=None, method="unknown"):
    """Audit a ranking (``positions``) or a labeling (``outcomes``).

    When both are given, S/T come from the ranking and the outcomes feed the
    accuracy and group statistics.
    """
    if positions is None and outcomes is None:
        raise ValueError("need positions or outcomes")
    if positions is not None:
        S, T = unfairness_of_ranking(positions, psi, Z=Z)
        basis = "ranking"
    else:
        S, T = unfairness_of_labels(outcomes, Z, psi)
        basis = "labels"
    report = AuditReport(method=method, basis=basis, n=int(np.asarray(Z).shape[0]),
                         S=S, T=T, alpha=alpha)
    if outcomes is not None:
        if labels is not None:
            report.accuracy = accuracy(outcomes, labels)
        if protected is not None:
            gs = group_stats(outcomes, protected, disadvantaged, reference)
            report.rates, report.ratio = gs.rates, gs.ratio
            report.count_ratio = gs.count_ratio
            report.ratio_degenerate = gs.degenerate
    return report

