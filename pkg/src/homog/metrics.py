"""Homogenization metrics over an :class:`~homog.outcomes.OutcomeMatrix`.

The individual metric is the observed rate of systemic failure (every
deployment an individual interacts with fails them) divided by the rate
expected if deployments failed people independently. Group variants replace
individuals with weighted group-level failure rates; the loss variants swap
binary failures for graded losses.

Ratios whose denominator is zero come back as degenerate
:class:`~homog.outcomes.MetricValue` objects rather than numbers.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from homog._backend import kernels
from homog.outcomes import DEFINED, MetricValue, OutcomeMatrix, validate

UNDEFINED = "undefined"
NOT_APPLICABLE = "not-applicable"


class MetricError(ValueError):
    """The matrix does not meet a metric's preconditions."""


class UndefinedMetricError(MetricError):
    """The metric has no value on this matrix (e.g. log of zero)."""


class GroupWeighting(str, Enum):
    AVERAGE = "average"
    UNIFORM = "uniform"
    WORST = "worst"


def _checked(matrix: OutcomeMatrix) -> OutcomeMatrix:
    report = validate(matrix)
    if not report.ok:
        raise MetricError("invalid outcome matrix: " + "; ".join(report.violations))
    return matrix


def _require_full(matrix: OutcomeMatrix, what: str) -> None:
    if not matrix.fully_observed:
        raise MetricError(f"{what} requires an all-ones interaction mask")


def _require_k2(matrix: OutcomeMatrix, what: str) -> None:
    if matrix.n_deployments != 2:
        raise MetricError(f"{what} is defined for exactly 2 deployments, got {matrix.n_deployments}")


def _as_u8(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.uint8)


def _counts(matrix: OutcomeMatrix):
    _checked(matrix)
    return kernels.outcome_counts(_as_u8(matrix.failures), _as_u8(matrix.mask))


def _rates(fail_counts: np.ndarray, counts: np.ndarray) -> list[float]:
    return [int(f) / int(c) for f, c in zip(fail_counts, counts)]


def failure_rates(matrix: OutcomeMatrix) -> list[float]:
    """Per-deployment failure rate over interacting individuals."""
    fc, c, _, _ = _counts(matrix)
    return _rates(fc, c)


def failure_rate(matrix: OutcomeMatrix, deployment: int) -> float:
    if not 0 <= deployment < matrix.n_deployments:
        raise MetricError(f"deployment index {deployment} out of range")
    col = matrix.mask[:, deployment] == 1
    if not col.any():
        raise MetricError(f"no interacting individuals for deployment {deployment}")
    return float(np.count_nonzero(matrix.failures[col, deployment] == 1) / np.count_nonzero(col))


def systemic_failure_rate(matrix: OutcomeMatrix) -> float:
    """Fraction of individuals failed by every deployment."""
    _require_full(matrix, "systemic_failure_rate")
    _, _, n_sys, _ = _counts(matrix)
    return n_sys / matrix.n_individuals


def expected_systemic_rate(matrix: OutcomeMatrix) -> float:
    """Product of per-deployment failure rates (independent-failure baseline)."""
    _require_full(matrix, "expected_systemic_rate")
    return math.prod(failure_rates(matrix))


def _mask_patterns(matrix: OutcomeMatrix, codes: np.ndarray) -> list[tuple[int, list[int]]]:
    if matrix.n_deployments <= 64:
        uniq, cnt = np.unique(codes, return_counts=True)
        return [
            (int(c), [i for i in range(matrix.n_deployments) if (int(u) >> i) & 1])
            for u, c in zip(uniq, cnt)
        ]
    rows, cnt = np.unique(matrix.mask, axis=0, return_counts=True)
    return [(int(c), list(np.flatnonzero(r))) for r, c in zip(rows, cnt)]


def homogenization_individual(matrix: OutcomeMatrix) -> MetricValue:
    """Observed over expected systemic failure, honouring the interaction mask.

    With a mask, each individual's expected rate is the product of failure
    rates over only the deployments they interact with.
    """
    fc, c, n_sys, codes = _counts(matrix)
    rates = _rates(fc, c)
    n = matrix.n_individuals
    num = n_sys / n
    den = 0.0
    for count, members in _mask_patterns(matrix, codes):
        den += (count / n) * math.prod(rates[i] for i in members)
    return MetricValue.ratio(num, den)


# ----------------------------------------------------------------------------
# group metrics


def _group_table(matrix: OutcomeMatrix):
    _checked(matrix)
    if matrix.groups is None:
        raise MetricError("matrix has no group labels")
    labels = matrix.group_labels()
    index = {g: t for t, g in enumerate(labels)}
    codes = np.zeros(matrix.failures.shape, dtype=np.int64)
    seen = matrix.mask == 1
    codes[seen] = [index[g] for g in matrix.groups[seen]]
    fc, cnt = kernels.group_counts(
        _as_u8(matrix.failures), _as_u8(matrix.mask), codes, len(labels))
    return labels, fc, cnt


def group_failure_rate(matrix: OutcomeMatrix, group: str, deployment: int) -> float:
    labels, fc, cnt = _group_table(matrix)
    if not 0 <= deployment < matrix.n_deployments:
        raise MetricError(f"deployment index {deployment} out of range")
    group = str(group)
    if group not in labels or cnt[labels.index(group), deployment] == 0:
        raise MetricError(f"empty group in deployment: {group!r} has no rows in deployment {deployment}")
    t = labels.index(group)
    return int(fc[t, deployment]) / int(cnt[t, deployment])


def group_products(matrix: OutcomeMatrix) -> tuple[dict[str, float], tuple[str, ...]]:
    """Per-group product of failure rates across deployments.

    Returns the products for groups present in every deployment and warnings
    naming the groups excluded for being empty somewhere.
    """
    labels, fc, cnt = _group_table(matrix)
    products: dict[str, float] = {}
    warnings = []
    for t, g in enumerate(labels):
        empty = [matrix.deployment_ids[i] for i in range(matrix.n_deployments) if cnt[t, i] == 0]
        if empty:
            warnings.append(f"group {g!r} empty in deployment(s) {', '.join(empty)}; excluded")
            continue
        products[g] = math.prod(int(fc[t, i]) / int(cnt[t, i]) for i in range(matrix.n_deployments))
    return products, tuple(warnings)


def homogenization_group(matrix: OutcomeMatrix, weighting: GroupWeighting | str = "uniform") -> MetricValue:
    """Weighted group systemic-failure rate over the expected systemic rate.

    ``average`` weights each group by the product of its frequencies across
    deployments, ``uniform`` weights groups equally, ``worst`` keeps only the
    group with the largest product (ties go to the smallest label).
    """
    weighting = GroupWeighting(weighting)
    _require_full(matrix, "group homogenization")
    products, warnings = group_products(matrix)
    if not products:
        raise MetricError("no group is present in every deployment")
    labels, _, cnt = _group_table(matrix)
    den = math.prod(failure_rates(matrix))
    worst = None
    if weighting is GroupWeighting.UNIFORM:
        num = sum(products.values()) / len(products)
    elif weighting is GroupWeighting.AVERAGE:
        n = matrix.n_individuals
        joint = {
            g: math.prod(int(cnt[labels.index(g), i]) / n for i in range(matrix.n_deployments))
            for g in products
        }
        total = sum(joint.values())
        num = sum(joint[g] / total * products[g] for g in products)
    else:
        num = -1.0
        for g in sorted(products):
            if products[g] > num:
                worst, num = g, products[g]
    return MetricValue.ratio(num, den, warnings=warnings, worst_group=worst)


def unfairness(matrix: OutcomeMatrix) -> float:
    """Population variance of group systemic-failure products."""
    _require_full(matrix, "unfairness")
    products, _ = group_products(matrix)
    if not products:
        raise MetricError("unfairness needs at least one group")
    return float(np.var(np.fromiter(products.values(), dtype=np.float64)))


# ----------------------------------------------------------------------------
# two-deployment relatives


def _k2_moments(matrix: OutcomeMatrix, what: str) -> tuple[float, float, float]:
    _require_k2(matrix, what)
    _require_full(matrix, what)
    fc, c, n_sys, _ = _counts(matrix)
    r1, r2 = _rates(fc, c)
    return n_sys / matrix.n_individuals, r1, r2


def covariance_failures(matrix: OutcomeMatrix) -> float:
    joint, r1, r2 = _k2_moments(matrix, "covariance")
    return joint - r1 * r2


def pmi_failures(matrix: OutcomeMatrix) -> float:
    _require_k2(matrix, "PMI")
    _require_full(matrix, "PMI")
    oh = homogenization_individual(matrix)
    if not oh.is_defined or oh.value == 0:
        raise UndefinedMetricError("PMI undefined: homogenization is zero or degenerate")
    return math.log(oh.value)


def pearson_failures(matrix: OutcomeMatrix) -> float:
    joint, r1, r2 = _k2_moments(matrix, "pearson")
    var = r1 * (1 - r1) * r2 * (1 - r2)
    if var == 0:
        raise UndefinedMetricError("correlation undefined: a failure column is constant")
    return (joint - r1 * r2) / math.sqrt(var)


# ----------------------------------------------------------------------------
# loss-based relatives


def _losses(matrix: OutcomeMatrix, what: str) -> np.ndarray:
    _checked(matrix)
    if matrix.losses is None:
        raise MetricError(f"{what} requires losses")
    _require_full(matrix, what)
    return matrix.losses


def loss_homogenization(matrix: OutcomeMatrix) -> MetricValue:
    """Mean over individuals of the loss product, over the product of mean losses."""
    ell = _losses(matrix, "loss_homogenization")
    num = float(np.mean(np.prod(ell, axis=1)))
    den = math.prod(float(v) for v in ell.mean(axis=0))
    return MetricValue.ratio(num, den)


def minexp(matrix: OutcomeMatrix) -> MetricValue:
    """Mean best-case individual loss over the best deployment's mean loss."""
    ell = _losses(matrix, "minexp")
    return MetricValue.ratio(float(np.mean(ell.min(axis=1))), float(ell.mean(axis=0).min()))


def expexp(matrix: OutcomeMatrix) -> MetricValue:
    """Mean best-case individual loss over the average deployment's mean loss."""
    ell = _losses(matrix, "expexp")
    return MetricValue.ratio(float(np.mean(ell.min(axis=1))), float(ell.mean(axis=0).mean()))


# ----------------------------------------------------------------------------


def _wrap(fn, *args) -> MetricValue:
    try:
        out = fn(*args)
    except UndefinedMetricError as exc:
        return MetricValue(None, UNDEFINED, warnings=(str(exc),))
    except MetricError as exc:
        return MetricValue(None, NOT_APPLICABLE, warnings=(str(exc),))
    if isinstance(out, MetricValue):
        return out
    return MetricValue(float(out), DEFINED)


def all_metrics(
    matrix: OutcomeMatrix,
    weightings=tuple(GroupWeighting),
    loss_metrics: bool = True,
) -> dict[str, MetricValue]:
    """Every metric applicable to ``matrix``, keyed by name.

    Inapplicable metrics are present with status ``not-applicable`` and the
    reason in ``warnings``.
    """
    _checked(matrix)
    out: dict[str, MetricValue] = {}
    for i, dep in enumerate(matrix.deployment_ids):
        out[f"failure_rate:{dep}"] = _wrap(failure_rate, matrix, i)
    out["systemic_failure_rate"] = _wrap(systemic_failure_rate, matrix)
    out["expected_systemic_rate"] = _wrap(expected_systemic_rate, matrix)
    out["oh_individual"] = homogenization_individual(matrix)
    for w in weightings:
        w = GroupWeighting(w)
        out[f"oh_group_{w.value}"] = _wrap(homogenization_group, matrix, w)
    out["unfairness"] = _wrap(unfairness, matrix)
    out["covariance"] = _wrap(covariance_failures, matrix)
    out["pmi"] = _wrap(pmi_failures, matrix)
    out["pearson"] = _wrap(pearson_failures, matrix)
    if loss_metrics:
        out["loss_oh"] = _wrap(loss_homogenization, matrix)
        out["minexp"] = _wrap(minexp, matrix)
        out["expexp"] = _wrap(expexp, matrix)
    return out
