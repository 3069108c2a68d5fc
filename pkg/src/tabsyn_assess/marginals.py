"""Marginal variables, empirical marginal distributions and transport costs."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .dataset import Schema, Table


@dataclass(frozen=True)
class MarginalVariable:
    attributes: tuple

    def __post_init__(self):
        attrs = tuple(self.attributes)
        if not attrs:
            raise ValueError("a marginal needs at least one attribute")
        if len(set(attrs)) != len(attrs):
            raise ValueError(f"duplicate attribute in marginal {attrs}")
        object.__setattr__(self, "attributes", attrs)

    @property
    def order(self) -> int:
        return len(self.attributes)

    @property
    def key(self) -> str:
        return "|".join(self.attributes)

    def check(self, schema: Schema) -> None:
        for a in self.attributes:
            if a not in schema:
                raise KeyError(f"marginal attribute {a!r} not in schema")


@dataclass(frozen=True)
class MarginalSet:
    variables: tuple

    def __post_init__(self):
        vs = tuple(v if isinstance(v, MarginalVariable) else MarginalVariable(tuple(v)) for v in self.variables)
        seen = set()
        for v in vs:
            s = frozenset(v.attributes)
            if s in seen:
                raise ValueError(f"duplicate marginal {v.attributes}")
            seen.add(s)
        object.__setattr__(self, "variables", vs)

    def __iter__(self) -> Iterator[MarginalVariable]:
        return iter(self.variables)

    def __len__(self) -> int:
        return len(self.variables)


def enumerate_marginals(schema: Schema, max_order: int = 2) -> MarginalSet:
    """All attribute subsets of size ``1..max_order``, by size then schema order."""
    names = schema.names
    if not 1 <= max_order <= len(names):
        raise ValueError(f"max_order must be in [1, {len(names)}]")
    out = []
    for k in range(1, max_order + 1):
        out.extend(MarginalVariable(c) for c in combinations(names, k))
    return MarginalSet(tuple(out))


@dataclass(frozen=True)
class MarginalDistribution:
    """Discrete distribution over k-tuples.

    ``support`` is an ``(s, k)`` float array; categorical coordinates hold
    category codes. ``categorical`` flags which coordinates are categorical.
    """

    variable: MarginalVariable
    support: np.ndarray
    weights: np.ndarray
    categorical: tuple

    def __len__(self) -> int:
        return len(self.weights)

    def tuples(self, schema: Schema) -> list[tuple]:
        out = []
        for row in self.support:
            t = []
            for a, v, cat in zip(self.variable.attributes, row, self.categorical):
                t.append(schema[a].domain[int(v)] if cat else float(v))
            out.append(tuple(t))
        return out


def extract_marginal(
    table: Table,
    variable: MarginalVariable,
    subsample: tuple[int, int] | None = None,
) -> MarginalDistribution:
    """Empirical marginal of ``variable`` in ``table``.

    Categorical-only variables give distinct observed tuples weighted by
    relative frequency. Anything with a numerical attribute gives one support
    point per (optionally subsampled) row with uniform weight.

    Parameters
    ----------
    subsample : (count, seed), optional
        Draw ``count`` rows without replacement first when ``count < len(table)``.
    """
    variable.check(table.schema)
    n = len(table)
    if n == 0:
        raise ValueError("cannot extract a marginal from an empty table")
    cat = tuple(table.schema[a].is_categorical for a in variable.attributes)
    pts = table.matrix(variable.attributes)
    if subsample is not None:
        count, seed = subsample
        if count < n:
            idx = np.random.default_rng(seed).choice(n, size=count, replace=False)
            pts = pts[np.sort(idx)]
    if all(cat):
        support, counts = np.unique(pts, axis=0, return_counts=True)
        weights = counts / counts.sum()
    else:
        support = pts
        weights = np.full(len(pts), 1.0 / len(pts))
    return MarginalDistribution(variable, support, weights, cat)


def pairwise_cost(x: np.ndarray, y: np.ndarray, categorical: Sequence[bool]) -> np.ndarray:
    """Sum over coordinates of |x - y| (numerical) or [x != y] (categorical)."""
    c = np.zeros((len(x), len(y)))
    for r, is_cat in enumerate(categorical):
        diff = x[:, r, None] - y[None, :, r]
        c += (diff != 0) if is_cat else np.abs(diff)
    return c


def build_cost_matrix(p: MarginalDistribution, q: MarginalDistribution, schema: Schema | None = None) -> np.ndarray:
    if p.variable != q.variable:
        raise ValueError(f"marginal mismatch: {p.variable.attributes} vs {q.variable.attributes}")
    if schema is not None:
        p.variable.check(schema)
    return pairwise_cost(p.support, q.support, p.categorical)
