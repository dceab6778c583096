"""Fair ranking-based classification with meritocratic-unfairness audits."""

from .audit import AuditReport, unfairness_of_labels, unfairness_of_ranking
from .correlation import correlation_ratio, penalty_vector, spearman
from .dataset import (Dataset, Direction, MonotonicScaler, SchemaError, apply_scaling,
                      fit_scaling, load_csv, load_german_credit, train_test_split)
from .importance import ImportanceWeights, permutation_importance
from .northstar import FairRankingClassifier, RankConfig, RankedCohort, RankModel

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "Dataset",
    "Direction",
    "FairRankingClassifier",
    "ImportanceWeights",
    "MonotonicScaler",
    "RankConfig",
    "RankModel",
    "RankedCohort",
    "SchemaError",
    "apply_scaling",
    "correlation_ratio",
    "fit_scaling",
    "load_csv",
    "load_german_credit",
    "penalty_vector",
    "permutation_importance",
    "spearman",
    "train_test_split",
    "unfairness_of_labels",
    "unfairness_of_ranking",
]
