"""Built-in synthesizers: HALF, HISTOGRAM (optionally DP), SELF and test fixtures."""

from __future__ import annotations

import numpy as np

from ..dataset import Table, bin_index
from .base import SynthesizerSpec, TrainedSynthesizer


def _provenance(spec: SynthesizerSpec, train: Table | None, seed: int) -> dict:
    return {
        "spec": spec.to_dict(),
        "seed": int(seed),
        "train_rows": None if train is None else len(train),
        "train_fingerprint": None if train is None else train.fingerprint(),
    }


def half_baseline(table: Table, seed: int) -> tuple[Table, Table]:
    """Split rows into two random halves; the first (larger when odd) plays the real role."""
    n = len(table)
    if n < 2:
        raise ValueError("half baseline needs at least 2 rows")
    perm = np.random.default_rng(seed).permutation(n)
    k = (n + 1) // 2
    return table.take(perm[:k]), table.take(perm[k:])


class HistogramSynthesizer(TrainedSynthesizer):
    """Independent per-attribute sampler.

    ``marginals`` maps each attribute to its (possibly noisy) probability
    vector over categories or equal-width bins; ``edges`` holds bin edges
    for numerical attributes.
    """

    def __init__(self, schema, marginals, edges, provenance=None, raw_marginals=None):
        super().__init__(schema, provenance)
        self.marginals = marginals
        self.edges = edges
        # noisy frequencies before clamping, kept for auditing the mechanism
        self.raw_marginals = raw_marginals

    def sample(self, n: int, seed: int) -> Table:
        rng = np.random.default_rng(seed)
        cols = {}
        for attr in self.schema.attributes:
            p = self.marginals[attr.name]
            k = rng.choice(len(p), size=n, p=p)
            if attr.is_numerical:
                e = self.edges[attr.name]
                cols[attr.name] = e[k] + rng.random(n) * (e[k + 1] - e[k])
            else:
                cols[attr.name] = k
        return Table(self.schema, cols)


def histogram_frequencies(train: Table, bins: int) -> tuple[dict, dict]:
    freqs, edges = {}, {}
    n = len(train)
    for attr in train.schema.attributes:
        col = train.column(attr.name)
        if attr.is_numerical:
            lo, hi = attr.domain
            edges[attr.name] = np.linspace(lo, hi, bins + 1)
            counts = np.bincount(bin_index(col, lo, hi, bins), minlength=bins)
        else:
            counts = np.bincount(col, minlength=len(attr.domain))
        freqs[attr.name] = counts / n
    return freqs, edges


def train_histogram(train: Table, bins: int = 10, epsilon: float | None = None, seed: int = 0) -> HistogramSynthesizer:
    """Fit one-way marginals, optionally with the Laplace mechanism.

    With ``epsilon`` set, the budget is split evenly over the ``d`` attributes
    and each frequency vector (sensitivity ``1/|train|`` under add/remove-one)
    gets Laplace noise of scale ``d / (epsilon |train|)``; negative cells are
    clamped to zero and the vector renormalized.
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    if len(train) == 0:
        raise ValueError("cannot train on an empty table")
    freqs, edges = histogram_frequencies(train, bins)
    raw = None
    if epsilon is not None and np.isfinite(epsilon):
        rng = np.random.default_rng(seed)
        scale = len(train.schema) / (epsilon * len(train))
        raw = {}
        for name in train.schema.names:
            raw[name] = freqs[name] + rng.laplace(0.0, scale, size=freqs[name].size)
            noisy = np.clip(raw[name], 0.0, None)
            total = noisy.sum()
            freqs[name] = noisy / total if total > 0 else np.full(noisy.size, 1.0 / noisy.size)
    spec = SynthesizerSpec("histogram", {"bins": int(bins)}, epsilon)
    return HistogramSynthesizer(train.schema, freqs, edges, _provenance(spec, train, seed), raw)


def _row_indices(rng, n_train: int, n: int) -> np.ndarray:
    if n <= n_train:
        return rng.permutation(n_train)[:n]
    return rng.integers(0, n_train, size=n)


class SelfCopySynthesizer(TrainedSynthesizer):
    """Releases training rows verbatim (without replacement while ``n <= |train|``)."""

    def __init__(self, train: Table, provenance=None):
        super().__init__(train.schema, provenance)
        self.train = train

    def sample(self, n: int, seed: int) -> Table:
        rng = np.random.default_rng(seed)
        return self.train.take(_row_indices(rng, len(self.train), n))


def self_baseline(train: Table, seed: int = 0) -> SelfCopySynthesizer:
    return SelfCopySynthesizer(train, _provenance(SynthesizerSpec("self_copy"), train, seed))


class MemorizingSynthesizer(TrainedSynthesizer):
    """Copies training rows and perturbs them.

    Numerical values get Gaussian noise with standard deviation
    ``jitter_sigma * (hi - lo)`` and are clipped to the domain; each
    categorical value is redrawn uniformly with probability ``jitter_sigma``.
    """

    def __init__(self, train: Table, jitter_sigma: float, provenance=None):
        super().__init__(train.schema, provenance)
        self.train = train
        self.jitter_sigma = float(jitter_sigma)

    def sample(self, n: int, seed: int) -> Table:
        rng = np.random.default_rng(seed)
        rows = self.train.take(_row_indices(rng, len(self.train), n))
        sigma = self.jitter_sigma
        if sigma == 0:
            return rows
        cols = {}
        for attr in self.schema.attributes:
            col = rows.column(attr.name)
            if attr.is_numerical:
                lo, hi = attr.domain
                cols[attr.name] = np.clip(col + rng.normal(0.0, sigma * (hi - lo), size=n), lo, hi)
            else:
                redraw = rng.random(n) < sigma
                cols[attr.name] = np.where(redraw, rng.integers(0, len(attr.domain), size=n), col)
        return Table(self.schema, cols)


def memorizing_synthesizer(train: Table, jitter_sigma: float, seed: int = 0,
                           duplication_ratio: float = 0.0) -> MemorizingSynthesizer:
    """Memorize ``train``, optionally after :func:`duplicate_rows` at ``duplication_ratio``.

    Duplicating inside training keeps the training size fixed while some
    records are memorized twice; membership still refers to ``train``.
    """
    if jitter_sigma < 0:
        raise ValueError("jitter_sigma must be non-negative")
    hp = {"jitter_sigma": float(jitter_sigma)}
    if duplication_ratio:
        hp["duplication_ratio"] = float(duplication_ratio)
    spec = SynthesizerSpec("memorizing", hp)
    rows = duplicate_rows(train, duplication_ratio, seed) if duplication_ratio else train
    return MemorizingSynthesizer(rows, jitter_sigma, _provenance(spec, train, seed))


class ConstantSynthesizer(TrainedSynthesizer):
    """Ignores its training data and the sampling seed: same rows every time.

    Rows are drawn uniformly from the schema domains with a fixed generator,
    so any privacy metric must score it as leaking nothing.
    """

    def __init__(self, schema, provenance=None, base_seed: int = 0):
        super().__init__(schema, provenance)
        self.base_seed = base_seed

    def sample(self, n: int, seed: int) -> Table:
        streams = np.random.SeedSequence(self.base_seed).spawn(len(self.schema))
        cols = {}
        for attr, ss in zip(self.schema.attributes, streams):
            rng = np.random.default_rng(ss)
            if attr.is_numerical:
                lo, hi = attr.domain
                cols[attr.name] = rng.uniform(lo, hi, size=n)
            else:
                cols[attr.name] = rng.integers(0, len(attr.domain), size=n)
        return Table(self.schema, cols)


def duplicate_rows(table: Table, ratio: float, seed: int) -> Table:
    """Overwrite ``round(ratio * n)`` random rows with copies of the remaining ones.

    Sources are the retained rows in random order, reused cyclically only
    when there are more victims than retained rows, so at ``ratio <= 0.5``
    each retained row is copied at most once.
    """
    if not 0 <= ratio < 1:
        raise ValueError("ratio must be in [0, 1)")
    n = len(table)
    k = int(round(ratio * n))
    if k == 0:
        return table.take(np.arange(n))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    victims, retained = perm[:k], perm[k:]
    sources = np.resize(rng.permutation(retained), k)
    idx = np.arange(n)
    idx[victims] = sources
    return table.take(idx)
