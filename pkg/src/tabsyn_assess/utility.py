"""Machine Learning Affinity and query error.

MLA trains each evaluator of a suite once on real training data and once on
synthetic data, scores both on held-out real data and averages the relative
gap. Query error compares k-way range/point query frequencies.
"""

from __future__ import annotations

import math
import shutil
import tempfile
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from sklearn.linear_model import LogisticRegression, Ridge
from sklearn.metrics import f1_score, mean_squared_error
from sklearn.ensemble import RandomForestClassifier, RandomForestRegressor
from sklearn.neighbors import KNeighborsClassifier, KNeighborsRegressor
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from .dataset import BINARY, REGRESSION, Schema, Table
from .synth.external import ExternalSynthesizerError, _argv, _run

# ----------------------------------------------------------------------
# feature encoding


class FeatureEncoder:
    """One-hot categorical features over the full domain, min-max numerical
    features with the fitting table's range."""

    def __init__(self, schema: Schema, train: Table):
        self.schema = schema
        self.bounds = {}
        for name in schema.features:
            if schema[name].is_numerical:
                col = train.column(name)
                self.bounds[name] = (float(col.min()), float(col.max())) if col.size else (0.0, 1.0)

    def transform(self, table: Table) -> np.ndarray:
        blocks = []
        for name in self.schema.features:
            attr = self.schema[name]
            col = table.column(name)
            if attr.is_numerical:
                lo, hi = self.bounds[name]
                blocks.append(((col - lo) / (hi - lo) if hi > lo else np.zeros_like(col))[:, None])
            else:
                blocks.append(np.eye(len(attr.domain))[col])
        if not blocks:
            return np.zeros((len(table), 1))
        return np.hstack(blocks)


# ----------------------------------------------------------------------
# evaluators


class _ConstantModel:
    def __init__(self, value):
        self.value = value

    def predict(self, X):
        return np.full(X.shape[0], self.value)


@dataclass
class FittedEvaluator:
    name: str
    task: str
    encoder: FeatureEncoder
    model: object

    def predict(self, rows: Table) -> np.ndarray:
        return np.asarray(self.model.predict(self.encoder.transform(rows)))


@dataclass(frozen=True)
class Evaluator:
    """A named model family. ``make(task, seed)`` returns an unfitted
    scikit-learn style estimator for the schema's task."""

    name: str
    make: Callable[[str, int], object]
    params: dict = field(default_factory=dict, compare=False)

    def fit(self, train: Table, seed: int = 0) -> FittedEvaluator:
        schema = train.schema
        enc = FeatureEncoder(schema, train)
        y = train.column(schema.target)
        if len(train) == 0:
            raise ValueError("cannot fit on an empty table")
        if schema.task != REGRESSION and np.unique(y).size == 1:
            model = _ConstantModel(int(y[0]))
        else:
            model = self.make(schema.task, seed)
            model.fit(enc.transform(train), y)
        return FittedEvaluator(self.name, schema.task, enc, model)


def _linear(task, seed, **kw):
    if task == REGRESSION:
        return Ridge(alpha=kw.get("alpha", 1.0))
    return LogisticRegression(C=kw.get("C", 1.0), max_iter=2000)


def _tree(task, seed, **kw):
    cls = DecisionTreeRegressor if task == REGRESSION else DecisionTreeClassifier
    return cls(max_depth=kw.get("max_depth", 8), random_state=seed)


def _forest(task, seed, **kw):
    cls = RandomForestRegressor if task == REGRESSION else RandomForestClassifier
    return cls(n_estimators=kw.get("n_estimators", 25), max_depth=kw.get("max_depth"), random_state=seed, n_jobs=1)


def _knn(task, seed, **kw):
    cls = KNeighborsRegressor if task == REGRESSION else KNeighborsClassifier
    return cls(n_neighbors=kw.get("n_neighbors", 5))


_FACTORIES = {"linear": _linear, "decision_tree": _tree, "random_forest": _forest, "knn": _knn}

# small per-family grids used by tune_suite
_GRIDS = {
    "linear": [{"C": 0.1, "alpha": 10.0}, {"C": 1.0, "alpha": 1.0}, {"C": 10.0, "alpha": 0.1}],
    "decision_tree": [{"max_depth": 4}, {"max_depth": 6}, {"max_depth": 8}],
    "random_forest": [{"max_depth": 6}, {"max_depth": None}],
    "knn": [{"n_neighbors": 5}, {"n_neighbors": 15}],
}


def _family(name: str, **params) -> Evaluator:
    base = _FACTORIES[name]
    return Evaluator(name, lambda task, seed: base(task, seed, **params), dict(params))


def builtin_suite() -> list[Evaluator]:
    """Linear (logistic / ridge), decision tree (depth 8), random forest
    (25 trees) and 5-nearest-neighbours."""
    return [_family(name) for name in _FACTORIES]


def tune_suite(train: Table, validation: Table, seed: int = 0) -> list[Evaluator]:
    """Pick each family's parameters from a small grid by validation accuracy."""
    suite = []
    for name, grid in _GRIDS.items():
        best, best_score = None, None
        for params in grid:
            ev = _family(name, **params)
            score = accuracy(ev, ev.fit(train, seed), validation)
            if validation.schema.task == REGRESSION:
                score = -score
            if best_score is None or score > best_score:
                best, best_score = ev, score
        suite.append(best)
    return suite


class ExternalEvaluator:
    """Evaluator backed by a subprocess::

        <command> --fit train.csv model_dir
        <command> --predict model_dir rows.csv out.csv

    ``out.csv`` holds one prediction per row (class labels or numbers),
    with a header line.
    """

    def __init__(self, name: str, command, timeout: float = 3600.0, workdir=None):
        self.name = name
        self.command = command
        self.timeout = timeout
        self.workdir = workdir

    def fit(self, train: Table, seed: int = 0) -> FittedEvaluator:
        scratch = Path(tempfile.mkdtemp(prefix="exteval-", dir=self.workdir))
        train.to_csv(scratch / "train.csv")
        model_dir = scratch / "model"
        model_dir.mkdir()
        _run(_argv(self.command) + ["--fit", str(scratch / "train.csv"), str(model_dir)],
             self.timeout, scratch, f"evaluator {self.name} fit")
        return FittedEvaluator(self.name, train.schema.task, None, _ExternalModel(self, scratch, train.schema))


class _ExternalModel:
    def __init__(self, ev: ExternalEvaluator, scratch: Path, schema: Schema):
        self.ev, self.scratch, self.schema = ev, scratch, schema

    def predict_table(self, rows: Table) -> np.ndarray:
        rows_csv, out_csv = self.scratch / "rows.csv", self.scratch / "out.csv"
        rows.to_csv(rows_csv)
        _run(_argv(self.ev.command) + ["--predict", str(self.scratch / "model"), str(rows_csv), str(out_csv)],
             self.ev.timeout, self.scratch, f"evaluator {self.ev.name} predict")
        try:
            raw = pd.read_csv(out_csv, dtype=str, keep_default_na=False).iloc[:, 0].to_numpy()
        except Exception as exc:
            raise ExternalSynthesizerError(f"evaluator {self.ev.name}: unreadable predictions: {exc}") from None
        if raw.size != len(rows):
            raise ExternalSynthesizerError(f"evaluator {self.ev.name}: {raw.size} predictions for {len(rows)} rows")
        target = self.schema[self.schema.target]
        if target.is_numerical:
            return raw.astype(np.float64)
        lookup = {lab: k for k, lab in enumerate(target.domain)}
        return np.array([lookup.get(v, -1) for v in raw], dtype=np.int64)

    def cleanup(self):
        shutil.rmtree(self.scratch, ignore_errors=True)


def _predict(fitted: FittedEvaluator, rows: Table) -> np.ndarray:
    if isinstance(fitted.model, _ExternalModel):
        return fitted.model.predict_table(rows)
    return fitted.predict(rows)


def score_predictions(task: str, y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """F1 of class code 1 (binary), macro-F1 (multiclass) or RMSE (regression)."""
    if task == REGRESSION:
        return float(math.sqrt(mean_squared_error(y_true, y_pred)))
    if task == BINARY:
        return float(f1_score(y_true, y_pred, pos_label=1, average="binary", zero_division=0))
    return float(f1_score(y_true, y_pred, average="macro", zero_division=0))


def accuracy(e, fitted: FittedEvaluator, test: Table) -> float:
    """Score a fitted evaluator on ``test`` (higher is better except RMSE)."""
    if len(test) == 0:
        raise ValueError("test table is empty")
    y = test.column(test.schema.target)
    return score_predictions(test.schema.task, y, _predict(fitted, test))


# ----------------------------------------------------------------------
# MLA


def relative_gap(task: str, acc_real: float, acc_syn: float) -> float:
    """Relative accuracy loss, signed so that lower is better for every task."""
    if task == REGRESSION:
        return (acc_syn - acc_real) / acc_real
    return (acc_real - acc_syn) / acc_real


def _fit_score(ev, train: Table, test: Table, seed: int) -> float:
    fitted = ev.fit(train, seed)
    try:
        return accuracy(ev, fitted, test)
    finally:
        if isinstance(fitted.model, _ExternalModel):
            fitted.model.cleanup()


@dataclass
class MLAResult:
    value: float
    accuracies: dict
    excluded: list = field(default_factory=list)


def mla(real_train: Table, synthetic: Table, test: Table, suite: Sequence | None = None,
        seed: int = 0, details: bool = False):
    """Machine Learning Affinity (lower is better; 0 means no loss).

    Evaluators whose real-trained accuracy is 0 are dropped with a warning.
    Returns a float, or an :class:`MLAResult` when ``details`` is set.
    """
    if not (real_train.schema.names == synthetic.schema.names == test.schema.names):
        raise ValueError("tables must share a schema")
    suite = builtin_suite() if suite is None else list(suite)
    task = test.schema.task
    acc, gaps, excluded = {}, [], []
    for ev in suite:
        a_real = _fit_score(ev, real_train, test, seed)
        a_syn = _fit_score(ev, synthetic, test, seed)
        entry = {"real": a_real, "synthetic": a_syn}
        if a_real == 0:
            warnings.warn(f"evaluator {ev.name}: real-data accuracy is 0, excluded from MLA", RuntimeWarning)
            excluded.append(ev.name)
        else:
            entry["gap"] = relative_gap(task, a_real, a_syn)
            gaps.append(entry["gap"])
        acc[ev.name] = entry
    if not gaps:
        warnings.warn("every evaluator was excluded; MLA is undefined", RuntimeWarning)
        value = float("nan")
    else:
        value = math.fsum(gaps) / len(gaps)
    return MLAResult(value, acc, excluded) if details else value


# ----------------------------------------------------------------------
# query workloads


@dataclass(frozen=True)
class QueryCondition:
    """Conjunction of sub-conditions.

    ``terms`` holds ``(attribute, label)`` for categorical attributes and
    ``(attribute, (start, end))`` with ``start <= end`` for numerical ones.
    """

    terms: tuple

    def __post_init__(self):
        names = [t[0] for t in self.terms]
        if len(set(names)) != len(names):
            raise ValueError("query attributes must be distinct")

    @property
    def attributes(self) -> tuple:
        return tuple(t[0] for t in self.terms)

    @property
    def k(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class QueryWorkload:
    conditions: tuple
    k: int
    seed: int

    def __len__(self):
        return len(self.conditions)

    def __iter__(self):
        return iter(self.conditions)


def generate_workload(schema: Schema, k: int = 3, count: int = 1000, seed: int = 0) -> QueryWorkload:
    """``count`` random ``k``-way conditions drawn uniformly from the schema domains."""
    if not 1 <= k <= len(schema):
        raise ValueError(f"k must be between 1 and {len(schema)}")
    rng = np.random.default_rng(seed)
    attrs = schema.attributes
    out = []
    for _ in range(count):
        terms = []
        for a in rng.choice(len(attrs), size=k, replace=False):
            attr = attrs[a]
            if attr.is_numerical:
                lo, hi = attr.domain
                s, e = np.sort(rng.uniform(lo, hi, size=2))
                terms.append((attr.name, (float(s), float(e))))
            else:
                terms.append((attr.name, attr.domain[int(rng.integers(len(attr.domain)))]))
        out.append(QueryCondition(tuple(terms)))
    return QueryWorkload(tuple(out), k, seed)


def _mask(table: Table, c: QueryCondition) -> np.ndarray:
    mask = np.ones(len(table), dtype=bool)
    for name, value in c.terms:
        attr = table.schema[name]
        col = table.column(name)
        if attr.is_numerical:
            s, e = value
            mask &= (col >= s) & (col <= e)
        else:
            mask &= col == attr.domain.index(value)
    return mask


def execute_query(table: Table, c: QueryCondition) -> float:
    """Fraction of rows satisfying every sub-condition (ranges inclusive)."""
    if len(table) == 0:
        raise ValueError("cannot query an empty table")
    return float(np.count_nonzero(_mask(table, c)) / len(table))


def query_error(real_test: Table, synthetic: Table, workload: QueryWorkload) -> float:
    """Mean absolute difference of query frequencies."""
    if len(real_test) == 0 or len(synthetic) == 0:
        raise ValueError("inputs must be non-empty")
    if len(workload) == 0:
        raise ValueError("workload is empty")
    diffs = [abs(execute_query(real_test, c) - execute_query(synthetic, c)) for c in workload]
    return math.fsum(diffs) / len(diffs)


@dataclass
class UtilityReport:
    mla: float | None
    accuracies: dict
    query_error: float | None
    config: dict
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_utility(real_train: Table, synthetic: Table, test: Table, *, suite=None, workload=None,
                     k: int = 3, count: int = 1000, seed: int = 0,
                     metrics: Sequence[str] = ("mla", "query")) -> UtilityReport:
    """MLA and query error against ``test`` in one call."""
    m = q = None
    acc, excluded = {}, []
    if "mla" in metrics:
        res = mla(real_train, synthetic, test, suite, seed, details=True)
        m, acc, excluded = res.value, res.accuracies, res.excluded
    if "query" in metrics:
        workload = workload or generate_workload(test.schema, k, count, seed)
        q = query_error(test, synthetic, workload)
    cfg = {"seed": seed, "k": k, "count": count, "suite": [e.name for e in (suite or builtin_suite())]}
    return UtilityReport(m, acc, q, cfg, excluded)
