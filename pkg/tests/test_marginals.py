import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tabsyn_assess.dataset import AttributeSpec, Schema, Table
from tabsyn_assess.marginals import (
    MarginalSet, MarginalVariable, build_cost_matrix, enumerate_marginals, extract_marginal,
)

from conftest import make_schema, random_table


def test_enumerate_counts():
    s = make_schema(numeric=("a", "b"), categorical=(("c", ("x", "y")),))
    keys = [v.key for v in enumerate_marginals(s, 2)]
    assert keys == ["a", "b", "c", "a|b", "a|c", "b|c"]
    assert len(enumerate_marginals(s, 1)) == 3
    s14 = make_schema(numeric=tuple(f"n{i}" for i in range(13)), categorical=(("t", ("0", "1")),))
    assert len(enumerate_marginals(s14, 2)) == 14 + 14 * 13 // 2


def test_duplicate_variables_rejected():
    with pytest.raises(ValueError):
        MarginalSet((MarginalVariable(("a", "b")), MarginalVariable(("b", "a"))))


def test_extract_categorical_counts():
    s = Schema([AttributeSpec("c", "categorical", ("A", "B"))], "c", "binary_classification")
    t = Table.from_records(s, [("A",), ("A",), ("B",), ("B",), ("B",)])
    m = extract_marginal(t, MarginalVariable(("c",)))
    assert m.tuples(s) == [("A",), ("B",)]
    np.testing.assert_allclose(m.weights, [0.4, 0.6])


def test_extract_numeric_and_mixed():
    s = Schema([AttributeSpec("c", "categorical", ("A", "B")), AttributeSpec("v", "numerical", (0, 3))], "c",
               "binary_classification")
    t = Table.from_records(s, [("A", 1.0), ("B", 2.0), ("A", 1.0), ("B", 3.0)])
    m = extract_marginal(t.take([0, 1]), MarginalVariable(("v",)))
    assert m.support[:, 0].tolist() == [1.0, 2.0]
    np.testing.assert_allclose(m.weights, [0.5, 0.5])
    mixed = extract_marginal(t, MarginalVariable(("c", "v")))
    assert len(mixed) == 4
    np.testing.assert_allclose(mixed.weights, 0.25)


def test_cost_examples():
    s = Schema([AttributeSpec("c", "categorical", ("A", "B")), AttributeSpec("v", "numerical", (0, 1))], "c",
               "binary_classification")
    t = Table.from_records(s, [("A", 0.2), ("B", 0.7), ("A", 0.0), ("B", 1.0)])
    cat = extract_marginal(t, MarginalVariable(("c",)))
    assert build_cost_matrix(cat, cat).tolist() == [[0, 1], [1, 0]]
    p = extract_marginal(t.take([2, 3]), MarginalVariable(("v",)))
    q = extract_marginal(Table.from_records(s, [("A", 0.5)]), MarginalVariable(("v",)))
    assert build_cost_matrix(p, q).tolist() == [[0.5], [0.5]]
    a = extract_marginal(t.take([0]), MarginalVariable(("c", "v")))
    b = extract_marginal(t.take([1]), MarginalVariable(("c", "v")))
    assert build_cost_matrix(a, b)[0, 0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        build_cost_matrix(cat, p)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n1=st.integers(1, 30), n2=st.integers(1, 30))
def test_cost_properties(seed, n1, n2):
    s = make_schema()
    var = MarginalVariable(("a", "c"))
    p = extract_marginal(random_table(s, n1, seed), var)
    q = extract_marginal(random_table(s, n2, seed + 1), var)
    c = build_cost_matrix(p, q)
    np.testing.assert_array_equal(c, build_cost_matrix(q, p).T)
    assert abs(p.weights.sum() - 1) < 1e-9
    same = np.all(p.support[:, None, :] == q.support[None, :, :], axis=2)
    np.testing.assert_array_equal(c == 0, same)
    # triangle inequality through every point of p
    cpp = build_cost_matrix(p, p)
    assert np.all(c[None, :, :] <= cpp[:, :, None] + c[:, None, :] + 1e-12)


def test_subsample_is_seeded():
    t = random_table(make_schema(), 200, seed=2)
    v = MarginalVariable(("a", "b"))
    m1 = extract_marginal(t, v, (50, 9))
    m2 = extract_marginal(t, v, (50, 9))
    assert len(m1) == 50
    np.testing.assert_array_equal(m1.support, m2.support)
