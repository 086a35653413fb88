import numpy as np
import pytest

from homog import metrics, reference
from homog.outcomes import OutcomeMatrix


def test_oracle_scenarios(scenario):
    assert reference.oracle_metrics(scenario(2))["oh_individual"] == 2.0
    assert reference.oracle_metrics(scenario(1))["oh_individual"] == 0.0


def test_fuzz_agreement():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        m = reference.random_matrix(rng)
        assert reference.cross_check(m) == []


def test_empty_group_flagged_by_both():
    m = OutcomeMatrix.from_arrays([[1, 0], [0, 1], [1, 1]], groups=[["a", "a"], ["b", "a"], ["a", "a"]])
    assert reference.oracle_metrics(m)["excluded_groups"] == ("b",)
    _, warnings = metrics.group_products(m)
    assert len(warnings) == 1 and "'b'" in warnings[0]
    assert reference.cross_check(m) == []


def test_rank_stats():
    assert reference.oracle_rank_stats([1, 2, 3], [2, 4, 9])[1] == pytest.approx(1.0)
    assert reference.oracle_rank_stats([1, 1, 2], [1, 2, 3])[1] == pytest.approx(3 ** 0.5 / 2, abs=1e-12)


def test_cross_check_catches_fault(monkeypatch):
    m = OutcomeMatrix.from_arrays([[1, 1], [0, 1], [1, 0]])
    real = metrics.homogenization_individual

    def broken(matrix):
        v = real(matrix)
        return type(v)(v.value * 1.001, v.status)

    monkeypatch.setattr(metrics, "homogenization_individual", broken)
    problems = reference.cross_check(m)
    assert problems and problems[0].startswith("oh_individual")
