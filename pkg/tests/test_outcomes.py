import random

import numpy as np
import pytest

from homog.outcomes import (
    DEGENERATE,
    MetricValue,
    OutcomeMatrix,
    RecordError,
    from_long_records,
    validate,
)


def test_complete_grid_has_full_mask():
    m = from_long_records([("a", "x", 1), ("a", "y", 0), ("b", "x", 0), ("b", "y", 1)])
    assert m.failures.tolist() == [[1, 0], [0, 1]]
    assert m.mask.tolist() == [[1, 1], [1, 1]]
    assert m.fully_observed


def test_missing_pair_is_masked():
    m = from_long_records([("a", "x", 1), ("a", "y", 0), ("b", "x", 0)])
    assert m.mask[m.individual_ids.index("b"), m.deployment_ids.index("y")] == 0
    assert not m.fully_observed


def test_scenario2_records():
    fails = {"Alice": 1, "Bob": 1, "Angelique": 0, "Bernardo": 0}
    recs = [(p, h, f) for p, f in fails.items() for h in ("h1", "h2")]
    m = from_long_records(recs)
    # lexicographic order: Alice, Angelique, Bernardo, Bob
    assert m.individual_ids == ("Alice", "Angelique", "Bernardo", "Bob")
    assert m.failures.tolist() == [[1, 1], [0, 0], [0, 0], [1, 1]]


def test_order_insensitive():
    recs = [(f"i{j}", f"d{i}", (i * j) % 2, f"g{j % 3}", float(i + j)) for j in range(7) for i in range(3)]
    a = from_long_records(recs)
    shuffled = recs[:]
    random.Random(3).shuffle(shuffled)
    b = from_long_records(shuffled)
    assert a == b
    assert np.array_equal(a.losses, b.losses)


def test_round_trip_through_long_records():
    recs = [("a", "x", 1, "g", 0.5), ("b", "x", 0, "h", 2.0), ("b", "y", 1, "h", 0.0)]
    m = from_long_records(recs)
    again = from_long_records(m.to_long_records())
    assert m == again
    assert again.to_long_records() == m.to_long_records()


@pytest.mark.parametrize("recs, msg", [
    ([("a", "x", 1), ("a", "x", 0)], "duplicate"),
    ([("a", "x", 2)], "0 or 1"),
    ([("a", "x", 1, None, -1.0)], "non-negative"),
    ([], "empty matrix"),
    ([("a", "x")], "3 to 6"),
])
def test_record_errors(recs, msg):
    with pytest.raises(RecordError, match=msg):
        from_long_records(recs)


def test_interacted_flag_zero_masks_entry():
    m = from_long_records([("a", "x", 0, None, None, 0), ("a", "y", 1), ("b", "x", 1)])
    assert m.mask.tolist() == [[0, 1], [1, 0]]


def test_equality_ignores_masked_entries():
    a = OutcomeMatrix.from_arrays([[1, 0], [1, 1]], mask=[[1, 0], [1, 1]])
    b = OutcomeMatrix.from_arrays([[1, 1], [1, 1]], mask=[[1, 0], [1, 1]])
    assert a == b


def test_arrays_are_read_only():
    m = OutcomeMatrix.from_arrays([[1, 0]])
    with pytest.raises(ValueError):
        m.failures[0, 0] = 0


def test_group_broadcast():
    m = OutcomeMatrix.from_arrays([[1, 0], [0, 0]], groups=["p", "q"])
    assert m.groups.tolist() == [["p", "p"], ["q", "q"]]
    assert m.group_labels() == ["p", "q"]


def test_validate_clean():
    assert validate(OutcomeMatrix.from_arrays([[1, 0], [0, 1]])).ok


def test_validate_lists_every_problem():
    m = OutcomeMatrix(
        failures=np.array([[2, 0], [0, 0]]),
        mask=np.array([[1, 0], [0, 0]]),
        losses=np.array([[-1.0, 0.0], [0.0, 0.0]]),
    )
    rep = validate(m)
    text = " | ".join(rep.violations)
    assert not rep.ok
    assert "failure entries outside" in text
    assert "individual with no interactions: " in text or "individual with no interactions" in text
    assert "deployment with no interactions" in text
    assert "negative loss" in text


def test_validate_no_interaction_names_individual():
    m = OutcomeMatrix.from_arrays([[1, 0], [0, 0]], mask=[[1, 1], [0, 0]], individual_ids=["p", "q"])
    assert "individual with no interactions: q" in validate(m).violations


def test_metric_value_ratio():
    assert MetricValue.ratio(1.0, 2.0).value == 0.5
    d = MetricValue.ratio(0.0, 0.0)
    assert d.value is None and d.status == DEGENERATE and not d.is_defined
