import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from homog import metrics
from homog.metrics import GroupWeighting, MetricError, UndefinedMetricError
from homog.outcomes import DEGENERATE, OutcomeMatrix


def matrices(max_n=30, k=None):
    @st.composite
    def build(draw):
        kk = k if k is not None else draw(st.integers(1, 4))
        n = draw(st.integers(2, max_n))
        f = draw(arrays(np.int64, (n, kk), elements=st.integers(0, 1)))
        return OutcomeMatrix.from_arrays(f)
    return build()


# --- golden scenarios ----------------------------------------------------

def test_scenario1(scenario):
    m = scenario(1)
    assert metrics.homogenization_individual(m).value == 0.0
    assert metrics.homogenization_group(m, "average").value == 1.0
    assert metrics.homogenization_group(m, "uniform").value == 1.0


def test_scenario2(scenario):
    m = scenario(2)
    assert metrics.homogenization_individual(m).value == 2.0
    for w in GroupWeighting:
        assert metrics.homogenization_group(m, w).value == 1.0
    assert metrics.systemic_failure_rate(m) == 0.5
    assert metrics.failure_rates(m) == [0.5, 0.5]


def test_independent_columns_give_one():
    # every combination of (F1, F2) once: observed 1/4 = 1/2 * 1/2
    m = OutcomeMatrix.from_arrays([[0, 0], [0, 1], [1, 0], [1, 1]])
    assert metrics.homogenization_individual(m).value == 1.0
    assert metrics.covariance_failures(m) == 0.0
    assert metrics.pmi_failures(m) == 0.0
    assert metrics.pearson_failures(m) == 0.0


def test_no_failures_is_degenerate():
    m = OutcomeMatrix.from_arrays(np.zeros((5, 3), dtype=int))
    v = metrics.homogenization_individual(m)
    assert v.value is None and v.status == DEGENERATE


def test_single_deployment_oh_is_one():
    m = OutcomeMatrix.from_arrays([[1], [0], [0], [1]])
    assert metrics.homogenization_individual(m).value == 1.0


def test_masked_expected_rate_by_hand():
    # deployment rates: x = 1/2 (a, b), y = 1 (a, c)
    f = [[1, 1], [0, 0], [0, 1]]
    mask = [[1, 1], [1, 0], [0, 1]]
    m = OutcomeMatrix.from_arrays(f, mask=mask)
    # observed systemic: a fails both, b fails none of {x}, c fails all of {y} -> 2/3
    # expected: mean(1/2*1, 1/2, 1) = 2/3
    assert metrics.homogenization_individual(m).value == pytest.approx(1.0, abs=1e-15)


def test_systemic_rate_requires_full_mask():
    m = OutcomeMatrix.from_arrays([[1, 1], [0, 1]], mask=[[1, 1], [1, 0]])
    with pytest.raises(MetricError):
        metrics.systemic_failure_rate(m)


def test_group_failure_rate_empty_group():
    m = OutcomeMatrix.from_arrays([[1, 0], [0, 1]], groups=[["a", "a"], ["b", "a"]])
    assert metrics.group_failure_rate(m, "b", 0) == 0.0
    with pytest.raises(MetricError, match="empty group in deployment"):
        metrics.group_failure_rate(m, "b", 1)


def test_empty_group_excluded_with_warning():
    m = OutcomeMatrix.from_arrays([[1, 0], [0, 1], [1, 1]], groups=[["a", "a"], ["b", "a"], ["a", "a"]])
    v = metrics.homogenization_group(m, "uniform")
    assert any("'b'" in w for w in v.warnings)
    products, _ = metrics.group_products(m)
    assert set(products) == {"a"}


def test_average_weights_by_joint_frequency():
    # group p: 1 row, q: 3 rows; k = 1 so weight p = 1/4, q = 3/4 (after normalising)
    m = OutcomeMatrix.from_arrays([[1], [1], [0], [0]], groups=["p", "q", "q", "q"])
    # group rates p = 1, q = 1/3; overall = 1/2
    avg = metrics.homogenization_group(m, "average").value
    assert avg == pytest.approx((0.25 * 1 + 0.75 / 3) / 0.5, rel=1e-15)
    assert metrics.homogenization_group(m, "uniform").value == pytest.approx((1 + 1 / 3) / 2 / 0.5)
    worst = metrics.homogenization_group(m, "worst")
    assert worst.value == 2.0 and worst.worst_group == "p"


def test_worst_tie_smallest_label():
    m = OutcomeMatrix.from_arrays([[1], [1], [0]], groups=["z", "a", "m"])
    assert metrics.homogenization_group(m, "worst").worst_group == "a"


def test_unfairness_is_population_variance():
    m = OutcomeMatrix.from_arrays([[1], [1], [0], [0]], groups=["p", "q", "q", "q"])
    prods = [1.0, 1 / 3]
    assert metrics.unfairness(m) == pytest.approx(np.var(prods), rel=1e-15)


def test_group_metric_without_groups():
    m = OutcomeMatrix.from_arrays([[1, 0]])
    with pytest.raises(MetricError):
        metrics.homogenization_group(m)
    allm = metrics.all_metrics(m)
    assert allm["oh_group_uniform"].value is None
    assert allm["oh_group_uniform"].status == "not-applicable"


def test_k2_metrics_reject_other_k():
    m = OutcomeMatrix.from_arrays(np.ones((3, 3), dtype=int))
    for fn in (metrics.covariance_failures, metrics.pmi_failures, metrics.pearson_failures):
        with pytest.raises(MetricError):
            fn(m)


def test_pmi_undefined_without_joint_failures(scenario):
    with pytest.raises(UndefinedMetricError):
        metrics.pmi_failures(scenario(1))


def test_loss_metrics_by_hand():
    ell = np.array([[1.0, 2.0], [3.0, 1.0]])
    m = OutcomeMatrix.from_arrays([[1, 1], [1, 1]], losses=ell)
    # E[prod] = (2 + 3)/2 = 2.5 ; means 2, 1.5
    assert metrics.loss_homogenization(m).value == pytest.approx(2.5 / 3.0)
    # E[min] = (1 + 1)/2 = 1
    assert metrics.minexp(m).value == pytest.approx(1 / 1.5)
    assert metrics.expexp(m).value == pytest.approx(1 / 1.75)


def test_zero_losses_degenerate():
    m = OutcomeMatrix.from_arrays([[0, 0], [0, 0]], losses=np.zeros((2, 2)))
    assert metrics.minexp(m).status == DEGENERATE


# --- properties ----------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(matrices())
def test_oh_nonnegative_and_bounded(m):
    v = metrics.homogenization_individual(m)
    if v.is_defined:
        assert v.value >= 0
        rates = metrics.failure_rates(m)
        # observed systemic rate cannot exceed the smallest rate
        assert v.value * math.prod(rates) <= min(rates) + 1e-12


@settings(max_examples=200, deadline=None)
@given(matrices())
def test_permuting_rows_leaves_metrics_unchanged(m):
    perm = np.random.default_rng(0).permutation(m.n_individuals)
    p = OutcomeMatrix.from_arrays(m.failures[perm])
    a, b = metrics.homogenization_individual(m), metrics.homogenization_individual(p)
    assert a.status == b.status
    if a.is_defined:
        assert a.value == pytest.approx(b.value, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(matrices(k=2))
def test_k2_identities(m):
    oh = metrics.homogenization_individual(m)
    if not oh.is_defined:
        return
    prod = math.prod(metrics.failure_rates(m))
    cov = metrics.covariance_failures(m)
    assert cov == pytest.approx((oh.value - 1) * prod, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(matrices(), st.integers(1, 4))
def test_group_ordering(m, n_groups):
    labels = [f"g{j % n_groups}" for j in range(m.n_individuals)]
    g = OutcomeMatrix.from_arrays(m.failures, groups=labels)
    w = metrics.homogenization_group(g, "worst")
    if w.is_defined:
        for other in ("uniform", "average"):
            assert w.value >= metrics.homogenization_group(g, other).value - 1e-12


@settings(max_examples=100, deadline=None)
@given(matrices())
def test_single_group_equals_population_ratio(m):
    # one group holding everyone: group product = product of rates -> metric 1
    g = OutcomeMatrix.from_arrays(m.failures, groups=["all"] * m.n_individuals)
    v = metrics.homogenization_group(g, "uniform")
    if v.is_defined:
        assert v.value == pytest.approx(1.0, rel=1e-12)
