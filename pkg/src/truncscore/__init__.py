"""Estimation and testing of a clinical score truncated by a terminal event,
jointly with the risk of that event, in two-arm randomized trials."""

from .data import Dataset, LandmarkSpec, SubjectRecord, read_csv, validate_for_estimation, write_csv
from .estimators import EstimationResult, TruncatedScoreEstimator, estimate_truncatedscore
from .numerics import RandomSource
from .simulation import TABLE1, ScenarioParams, replicate_study, simulate_dataset, truth_oracle
from .testing import TestConfig, closed_test, critical_value, signed_wald_intersection, signed_wald_single

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EstimationResult",
    "LandmarkSpec",
    "RandomSource",
    "ScenarioParams",
    "SubjectRecord",
    "TABLE1",
    "TestConfig",
    "TruncatedScoreEstimator",
    "closed_test",
    "critical_value",
    "estimate_truncatedscore",
    "read_csv",
    "replicate_study",
    "signed_wald_intersection",
    "signed_wald_single",
    "simulate_dataset",
    "truth_oracle",
    "validate_for_estimation",
    "write_csv",
]
