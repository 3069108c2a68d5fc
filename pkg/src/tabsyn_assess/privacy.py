"""Membership Disclosure Score (shadow training) and the DCR / NNDR baselines.

All distances are computed on rows whose numerical attributes are min-max
scaled with the real data's parameters: ``|a - b|`` per numerical attribute
and a 0/1 mismatch per categorical attribute, summed (L1) or combined in
quadrature (``metric="l2"``).
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .dataset import NormalizationParams, Table, fit_normalization
from .synth import SynthesizerSpec, train_synthesizer

METRICS = ("l1", "l2")
DEFAULT_M = 20
DEFAULT_N = 100


@numba.njit(cache=True, nogil=True)
def _k_nearest(Q, R, is_cat, l2, k):
    nq, d = Q.shape
    nr = R.shape[0]
    out = np.empty((nq, k))
    for i in range(nq):
        best = np.full(k, np.inf)
        for j in range(nr):
            acc = 0.0
            bound = best[k - 1]
            for a in range(d):
                if is_cat[a]:
                    if Q[i, a] != R[j, a]:
                        acc += 1.0
                else:
                    diff = abs(Q[i, a] - R[j, a])
                    acc += diff * diff if l2 else diff
                if acc >= bound:
                    break
            if acc < bound:
                # insertion into the sorted k-best list
                p = k - 1
                while p > 0 and best[p - 1] > acc:
                    best[p] = best[p - 1]
                    p -= 1
                best[p] = acc
        for p in range(k):
            out[i, p] = math.sqrt(best[p]) if l2 else best[p]
    return out


def _check_metric(metric: str) -> bool:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    return metric == "l2"


def encode(table: Table, params: NormalizationParams) -> np.ndarray:
    """Rows as floats: scaled numerical values and categorical codes, in schema order."""
    cols = []
    for attr in table.schema.attributes:
        col = table.column(attr.name)
        cols.append(params.scale(attr.name, col) if attr.is_numerical else col.astype(np.float64))
    return np.ascontiguousarray(np.column_stack(cols)) if cols else np.empty((len(table), 0))


def _cat_mask(schema) -> np.ndarray:
    return np.array([a.is_categorical for a in schema.attributes], dtype=np.bool_)


def nearest_distances(queries: Table, reference: Table, params: NormalizationParams | None = None,
                      metric: str = "l1", k: int = 1) -> np.ndarray:
    """Distances from each query row to its ``k`` nearest reference rows.

    Returns an array of shape ``(len(queries), k)`` sorted ascending per row.
    ``params`` defaults to the normalization fitted on ``reference``.
    """
    l2 = _check_metric(metric)
    if queries.schema.names != reference.schema.names:
        raise ValueError("tables must share a schema")
    if len(reference) < k:
        raise ValueError(f"reference needs at least {k} rows")
    if params is None:
        params = fit_normalization(reference)
    Q = encode(queries, params)
    R = encode(reference, params)
    return _k_nearest(Q, R, _cat_mask(queries.schema), l2, k)


def nearest_distance(x, s: Table, params: NormalizationParams | None = None, metric: str = "l1") -> float:
    """Distance from record ``x`` (a one-row Table or a tuple of decoded values) to its nearest row of ``s``."""
    if len(s) == 0:
        raise ValueError("cannot measure distance to an empty table")
    if not isinstance(x, Table):
        x = Table.from_records(s.schema, [tuple(x)], check_domain=False)
    return float(nearest_distances(x, s, params, metric)[0, 0])


# ----------------------------------------------------------------------
# shadow ensemble


class CoverageError(RuntimeError):
    pass


class ShadowTrainingError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"shadow {index}: {cause}")
        self.index = index


def _draw_subsets(n_rows: int, m: int, rng, max_retries: int) -> np.ndarray:
    """Membership matrix ``(n_rows, m)`` of independent uniform half-subsets.

    A record that lands in every subset or in none is repaired by a swap in
    one randomly chosen subset: it trades places with a random partner whose
    own coverage survives the swap. Subset sizes are unchanged.
    """
    h = n_rows // 2
    if h * m < n_rows:
        # too few memberships to put every record inside some subset
        raise CoverageError(f"{m} subsets of {h} rows cannot cover {n_rows} records")
    member = np.zeros((n_rows, m), dtype=bool)
    for i in range(m):
        member[rng.choice(n_rows, size=h, replace=False), i] = True
    for _ in range(max_retries):
        counts = member.sum(axis=1)
        bad = np.flatnonzero((counts == 0) | (counts == m))
        if bad.size == 0:
            return member
        for x in rng.permutation(bad):
            counts = member.sum(axis=1)
            if 0 < counts[x] < m:
                continue
            i = int(rng.integers(m))
            if counts[x] == 0:
                # x joins subset i; a member that stays inside elsewhere leaves
                partners = np.flatnonzero(member[:, i] & (counts >= 2))
            else:
                partners = np.flatnonzero(~member[:, i] & (counts <= m - 2))
            if partners.size == 0:
                continue
            y = int(rng.choice(partners))
            member[x, i], member[y, i] = member[y, i], member[x, i]
    raise CoverageError(
        f"could not place every record both inside and outside some subset after {max_retries} rounds"
    )


@dataclass
class ShadowEnsemble:
    """Shadow synthesizers trained on random halves of ``data``.

    Synthetic tables are not stored: ``synthetic(i, j)`` regenerates table
    ``j`` of shadow ``i`` from its recorded seed.
    """

    data: Table
    membership: np.ndarray
    synthesizers: list
    sample_seeds: np.ndarray
    n: int
    train_seeds: np.ndarray
    seed: int

    @property
    def m(self) -> int:
        return self.membership.shape[1]

    @property
    def subset_size(self) -> int:
        return len(self.data) // 2

    @property
    def subsets(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.membership[:, i]) for i in range(self.m)]

    def synthetic(self, i: int, j: int) -> Table:
        return self.synthesizers[i].sample(self.subset_size, int(self.sample_seeds[i, j]))

    @property
    def synthetic_sets(self) -> list[list[Table]]:
        return [[self.synthetic(i, j) for j in range(self.n)] for i in range(self.m)]


def _ensemble_seeds(seed: int, m: int, n: int):
    ss_subsets, ss_train, ss_sample = np.random.SeedSequence(seed).spawn(3)
    train = ss_train.generate_state(m, dtype=np.uint32).astype(np.int64)
    sample = ss_sample.generate_state(m * n, dtype=np.uint32).astype(np.int64).reshape(m, n)
    return np.random.default_rng(ss_subsets), train, sample


def train_shadow_ensemble(spec: SynthesizerSpec, d: Table, m: int = DEFAULT_M, n: int = DEFAULT_N,
                          seed: int = 0, *, max_retries: int = 100, jobs: int = 1) -> ShadowEnsemble:
    """Train ``m`` shadow synthesizers, each on an independent half of ``d``."""
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and n >= 1")
    if len(d) < 4:
        raise ValueError("need at least 4 records")
    rng, train_seeds, sample_seeds = _ensemble_seeds(seed, m, n)
    member = _draw_subsets(len(d), m, rng, max_retries)

    def fit(i):
        try:
            return train_synthesizer(spec, d.take(np.flatnonzero(member[:, i])), int(train_seeds[i]))
        except Exception as exc:
            raise ShadowTrainingError(i, exc) from exc

    synths = _map(fit, range(m), jobs)
    return ShadowEnsemble(d, member, synths, sample_seeds, n, train_seeds, seed)


def _map(fn, items, jobs):
    items = list(items)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ----------------------------------------------------------------------
# disclosure scores


@dataclass(frozen=True)
class DisclosureRecord:
    index: int
    in_mean: float
    out_mean: float
    in_count: int
    out_count: int

    @property
    def score(self) -> float:
        return abs(self.in_mean - self.out_mean)


def shadow_mean_distances(ensemble: ShadowEnsemble, i: int, records: np.ndarray,
                          params: NormalizationParams, metric: str = "l1") -> np.ndarray:
    """Mean over shadow ``i``'s synthetic tables of each record's nearest distance."""
    l2 = _check_metric(metric)
    d = ensemble.data
    Q = encode(d.take(records), params)
    cat = _cat_mask(d.schema)
    acc = np.zeros(len(records))
    for j in range(ensemble.n):
        R = encode(ensemble.synthetic(i, j), params)
        acc += _k_nearest(Q, R, cat, l2, 1)[:, 0]
    return acc / ensemble.n


def _aggregate(member: np.ndarray, means: np.ndarray):
    # member, means: (records, m)
    in_cnt = member.sum(axis=1)
    out_cnt = member.shape[1] - in_cnt
    in_mean = np.where(member, means, 0.0).sum(axis=1) / in_cnt
    out_mean = np.where(member, 0.0, means).sum(axis=1) / out_cnt
    return in_mean, out_mean, in_cnt, out_cnt


def disclosure_score(x_index: int, ensemble: ShadowEnsemble, params: NormalizationParams | None = None,
                     metric: str = "l1") -> DisclosureRecord:
    """In/out nearest-distance means of one record of ``ensemble.data``."""
    params = params or fit_normalization(ensemble.data)
    rec = np.array([x_index])
    means = np.array([shadow_mean_distances(ensemble, i, rec, params, metric)[0] for i in range(ensemble.m)])
    in_mean, out_mean, ic, oc = _aggregate(ensemble.membership[rec], means[None, :])
    return DisclosureRecord(int(x_index), float(in_mean[0]), float(out_mean[0]), int(ic[0]), int(oc[0]))


@dataclass
class PrivacyReport:
    """MDS together with the per-record evidence behind it.

    ``distance_scale`` is the mean nearest distance over every scored record
    and every synthetic table; it gives MDS a yardstick.
    """

    mds: float
    argmax: int
    records: np.ndarray
    in_mean: np.ndarray
    out_mean: np.ndarray
    in_count: np.ndarray
    out_count: np.ndarray
    distance_scale: float
    config: dict
    measurement: str
    dcr: float | None = None
    nndr: float | None = None
    notes: list = field(default_factory=list)

    @property
    def scores(self) -> np.ndarray:
        return np.abs(self.in_mean - self.out_mean)

    def record(self, k: int) -> DisclosureRecord:
        """Evidence for the ``k``-th scored record."""
        return DisclosureRecord(int(self.records[k]), float(self.in_mean[k]), float(self.out_mean[k]),
                                int(self.in_count[k]), int(self.out_count[k]))

    def to_dict(self, per_record: bool = True) -> dict:
        out = {
            "mds": self.mds,
            "argmax_record": self.argmax,
            "distance_scale": self.distance_scale,
            "measurement": self.measurement,
            "config": self.config,
            "notes": list(self.notes),
        }
        if self.dcr is not None:
            out["dcr"] = {"value": self.dcr, "label": "syntactic baseline"}
        if self.nndr is not None:
            out["nndr"] = {"value": self.nndr, "label": "syntactic baseline"}
        if per_record:
            out["per_record"] = {
                "index": self.records.tolist(),
                "in_mean": self.in_mean.tolist(),
                "out_mean": self.out_mean.tolist(),
            }
        return out


def _run_key(spec, d: Table, m, n, seed, metric, records) -> str:
    blob = json.dumps(
        {"spec": spec.to_dict(), "data": d.fingerprint(), "m": m, "n": n, "seed": seed,
         "metric": metric, "records": hashlib.sha256(records.tobytes()).hexdigest()},
        sort_keys=True, default=str,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def mds(spec: SynthesizerSpec, d: Table, m: int = DEFAULT_M, n: int = DEFAULT_N, seed: int = 0, *,
        metric: str = "l1", record_cap: int | None = None, run_dir=None, jobs: int = 1,
        max_retries: int = 100) -> PrivacyReport:
    """Membership disclosure score of the synthesizer described by ``spec`` on ``d``.

    Parameters
    ----------
    spec : SynthesizerSpec
    d : Table
        The real data; each shadow trains on ``len(d) // 2`` of its rows and
        emits ``n`` tables of that size.
    m, n : int
        Shadow count and synthetic tables per shadow.
    metric : {"l1", "l2"}
    record_cap : int, optional
        Score only this many records (chosen with the run seed). MDS is a
        maximum, so a cap can only under-report; the report says so.
    run_dir : path, optional
        Per-shadow distance means are saved here and reused when the same
        run is repeated, so an interrupted computation resumes.
    jobs : int
        Shadows processed concurrently.
    """
    _check_metric(metric)
    notes = []
    records = np.arange(len(d))
    if record_cap is not None and record_cap < len(d):
        pick = np.random.default_rng([seed, 1]).choice(len(d), size=record_cap, replace=False)
        records = np.sort(pick)
        notes.append(f"record cap: scored {record_cap} of {len(d)} records; MDS may be under-reported")
    ensemble = train_shadow_ensemble(spec, d, m, n, seed, max_retries=max_retries, jobs=jobs)
    params = fit_normalization(d)

    store = None
    if run_dir is not None:
        store = Path(run_dir) / f"mds-{_run_key(spec, d, m, n, seed, metric, records)}"
        store.mkdir(parents=True, exist_ok=True)
        np.save(store / "membership.npy", ensemble.membership)

    def shadow(i):
        path = store / f"shadow-{i:03d}.npy" if store else None
        if path is not None and path.exists():
            return np.load(path)
        means = shadow_mean_distances(ensemble, i, records, params, metric)
        if path is not None:
            tmp = path.with_suffix(".tmp.npy")
            np.save(tmp, means)
            tmp.replace(path)
        return means

    means = np.column_stack(_map(shadow, range(m), jobs))
    in_mean, out_mean, in_cnt, out_cnt = _aggregate(ensemble.membership[records], means)
    scores = np.abs(in_mean - out_mean)
    k = int(np.argmax(scores))
    config = {"m": m, "n": n, "seed": seed, "metric": metric, "records_scored": int(records.size),
              "subset_size": len(d) // 2, "synthetic_size": len(d) // 2, "spec": spec.to_dict()}
    if metric == "l2":
        notes.append("l2 distance: exposed for comparison only")
    return PrivacyReport(
        mds=float(scores[k]),
        argmax=int(records[k]),
        records=records,
        in_mean=in_mean,
        out_mean=out_mean,
        in_count=in_cnt,
        out_count=out_cnt,
        distance_scale=float(means.mean()),
        config=config,
        measurement=f"nearest-distance difference ({metric})",
        notes=notes,
    )


# ----------------------------------------------------------------------
# syntactic baselines


def _check_pair(real: Table, synthetic: Table):
    if len(real) == 0 or len(synthetic) == 0:
        raise ValueError("inputs must be non-empty")
    if real.schema.names != synthetic.schema.names:
        raise ValueError("tables must share a schema")


def dcr(real: Table, synthetic: Table, percentile: float = 5, metric: str = "l1") -> float:
    """Percentile of distances from each synthetic row to its closest real row."""
    _check_pair(real, synthetic)
    dist = nearest_distances(synthetic, real, fit_normalization(real), metric, 1)[:, 0]
    return float(np.percentile(dist, percentile))


def nndr(real: Table, synthetic: Table, percentile: float = 5, metric: str = "l1") -> float:
    """Percentile of nearest / second-nearest real distance ratios (1 where both are 0)."""
    _check_pair(real, synthetic)
    if len(real) < 2:
        raise ValueError("nndr needs at least 2 real rows")
    d = nearest_distances(synthetic, real, fit_normalization(real), metric, 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(d[:, 1] > 0, d[:, 0] / d[:, 1], 1.0)
    return float(np.percentile(ratio, percentile))
