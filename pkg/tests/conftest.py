import numpy as np
import pytest

from tabsyn_assess.dataset import AttributeSpec, Schema, Table


def make_schema(numeric=("a", "b"), categorical=(("c", ("x", "y", "z")),), target=None):
    attrs = [AttributeSpec(n, "numerical", (0.0, 1.0)) for n in numeric]
    attrs += [AttributeSpec(n, "categorical", dom) for n, dom in categorical]
    target = target or attrs[-1].name
    tattr = next(a for a in attrs if a.name == target)
    if tattr.is_numerical:
        task = "regression"
    else:
        task = "binary_classification" if len(tattr.domain) == 2 else "multiclass_classification"
    return Schema(attrs, target, task)


def random_table(schema, n, seed=0):
    rng = np.random.default_rng(seed)
    cols = {}
    for a in schema.attributes:
        if a.is_numerical:
            lo, hi = a.domain
            cols[a.name] = rng.uniform(lo, hi, n)
        else:
            cols[a.name] = rng.integers(0, len(a.domain), n)
    return Table(schema, cols)


@pytest.fixture
def schema():
    return make_schema()


@pytest.fixture
def table(schema):
    return random_table(schema, 60, seed=1)
