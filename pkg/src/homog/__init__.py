"""Measure outcome homogenization: how often a set of classifiers fails the same people."""

from homog._backend import BACKEND
from homog.metrics import (
    GroupWeighting,
    MetricError,
    UndefinedMetricError,
    all_metrics,
    covariance_failures,
    expexp,
    failure_rate,
    failure_rates,
    group_failure_rate,
    homogenization_group,
    homogenization_individual,
    loss_homogenization,
    minexp,
    pearson_failures,
    pmi_failures,
    systemic_failure_rate,
    unfairness,
)
from homog.outcomes import (
    DEGENERATE,
    DEFINED,
    MetricValue,
    OutcomeMatrix,
    RecordError,
    ValidationReport,
    from_long_records,
    validate,
)

__version__ = "0.1.0"
