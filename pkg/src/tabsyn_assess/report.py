"""Run orchestration, repeat statistics and report files."""

from __future__ import annotations

import csv
import io
import json
import math
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import __version__
from .dataset import DataSplit, Table, split
from .privacy import dcr, mds, nndr
from .seeds import derive_seed
from .synth import SynthesizerSpec, half_baseline, train_synthesizer
from .transport import FidelityConfig, fidelity
from .utility import builtin_suite, generate_workload, mla, query_error, tune_suite

FORMAT_VERSION = "1.0"
METRICS = ("fidelity", "mds", "dcr", "nndr", "mla", "query")
SYNTHS = ("half", "histogram", "self", "memorizing", "external")
BASELINES = ("half", "histogram", "self")
# larger distances mean more privacy for the syntactic scores
HIGHER_IS_BETTER = ("dcr", "nndr")
SYNTACTIC_LABEL = "syntactic baseline: distance to closest record, not a membership test"

NOT_APPLICABLE = {"half": {"mds": "MDS needs a trainable synthesizer"}}

# stream ids for derive_seed
_SPLIT, _WORKLOAD, _REPEAT, _EVALUATORS = 0, 1, 2, 3


@dataclass
class RunConfig:
    """Everything that determines an evaluation run."""

    data: str | None = None
    schema: str | None = None
    target: str | None = None
    task: str | None = None
    synth: str = "histogram"
    epsilon: float | None = None
    bins: int | None = None
    jitter_sigma: float | None = None
    command: str | None = None
    metrics: tuple = ("fidelity", "mla", "query")
    split: str = "test"
    repeats: int = 20
    seed: int = 0
    jobs: int = 1
    out: str | None = None
    max_order: int = 2
    mds_m: int = 20
    mds_n: int = 100
    mds_record_cap: int | None = None
    workload_k: int = 3
    workload_count: int = 1000
    alpha1: float = 1 / 3
    alpha2: float = 1 / 3
    alpha3: float = 1 / 3
    baselines: tuple = ()
    tune_evaluators: bool = False

    def __post_init__(self):
        self.metrics = tuple(self.metrics)
        self.baselines = tuple(self.baselines)
        if self.synth not in SYNTHS:
            raise ValueError(f"--synth must be one of {SYNTHS}")
        bad = [m for m in self.metrics if m not in METRICS]
        if bad or not self.metrics:
            raise ValueError(f"unknown metrics {bad}; choose from {METRICS}")
        bad = [b for b in self.baselines if b not in BASELINES]
        if bad:
            raise ValueError(f"unknown baselines {bad}; choose from {BASELINES}")
        if self.split not in ("train", "test"):
            raise ValueError("--split must be train or test")
        if self.repeats < 1:
            raise ValueError("--repeats must be at least 1")
        if self.epsilon is not None and self.synth != "histogram":
            raise ValueError("--epsilon only applies to --synth histogram")
        if self.bins is not None and self.synth != "histogram":
            raise ValueError("--bins only applies to --synth histogram")
        if self.jitter_sigma is not None and self.synth != "memorizing":
            raise ValueError("--jitter-sigma only applies to --synth memorizing")
        if (self.command is None) != (self.synth != "external"):
            raise ValueError("--command is required with, and only with, --synth external")

    def to_dict(self) -> dict:
        """Config echo; the output location is left out so reports do not depend on it."""
        d = asdict(self)
        d.pop("out")
        d["metrics"] = list(self.metrics)
        d["baselines"] = list(self.baselines)
        return d


def synth_spec(kind: str, *, epsilon=None, bins=None, jitter_sigma=None, command=None) -> SynthesizerSpec:
    """Map CLI names onto a :class:`SynthesizerSpec` (``half`` has no spec)."""
    hp = {}
    if kind == "histogram":
        hp["bins"] = 10 if bins is None else int(bins)
    elif kind == "memorizing":
        hp["jitter_sigma"] = 0.0 if jitter_sigma is None else float(jitter_sigma)
    elif kind == "external":
        hp["command"] = command
    return SynthesizerSpec({"self": "self_copy"}.get(kind, kind), hp, epsilon)


def run_split(table: Table, seed: int) -> DataSplit:
    return split(table, derive_seed(seed, _SPLIT))


# ----------------------------------------------------------------------
# one repeat


def evaluate_repeat(kind: str, spec: SynthesizerSpec | None, data: DataSplit, cfg: RunConfig,
                    r: int, workload, suite=None) -> dict:
    """Metric values (or error strings) for repeat ``r``; never raises."""
    seed_r = derive_seed(cfg.seed, _REPEAT, r)
    out = {"repeat": r, "seed": seed_r, "values": {}, "errors": {}}
    try:
        if kind == "half":
            # the first half stands in for the training data everywhere
            real_train, syn = half_baseline(data.train, seed_r)
        else:
            synth = train_synthesizer(spec, data.train, seed_r)
            syn = synth.sample(len(data.train), derive_seed(seed_r, 1))
            real_train = data.train
    except Exception as exc:  # noqa: BLE001
        msg = f"synthesis failed: {type(exc).__name__}: {exc}"
        out["errors"] = {m: msg for m in cfg.metrics}
        return out
    fid_ref = real_train if cfg.split == "train" else data.test

    def compute(metric):
        if metric == "fidelity":
            return fidelity(fid_ref, syn, config=FidelityConfig(max_order=cfg.max_order)).overall
        if metric == "mds":
            return mds(spec, data.train, cfg.mds_m, cfg.mds_n, seed_r, record_cap=cfg.mds_record_cap).mds
        if metric == "dcr":
            return dcr(real_train, syn)
        if metric == "nndr":
            return nndr(real_train, syn)
        if metric == "mla":
            return mla(real_train, syn, data.test, suite, seed=seed_r)
        if metric == "query":
            return query_error(data.test, syn, workload)
        raise ValueError(metric)

    for metric in cfg.metrics:
        if metric in NOT_APPLICABLE.get(kind, {}):
            continue
        try:
            value = float(compute(metric))
            if not math.isfinite(value):
                raise ValueError(f"non-finite value {value}")
            out["values"][metric] = value
        except Exception as exc:  # noqa: BLE001 - recorded per repeat, the run goes on
            out["errors"][metric] = f"{type(exc).__name__}: {exc}"
    return out


def summarize(repeats: list[dict], metrics, kind: str = "") -> dict:
    """Per-metric mean, sample standard deviation and raw values (None marks a failed repeat)."""
    summary = {}
    for metric in metrics:
        raw = [rep["values"].get(metric) for rep in repeats]
        vals = [v for v in raw if v is not None]
        entry = {
            "values": raw,
            "n": len(vals),
            "mean": float(np.mean(vals)) if vals else None,
            "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else (0.0 if vals else None),
            "failures": [{"repeat": rep["repeat"], "error": rep["errors"][metric]}
                         for rep in repeats if metric in rep["errors"]],
        }
        if metric in ("dcr", "nndr"):
            entry["label"] = SYNTACTIC_LABEL
        if metric in NOT_APPLICABLE.get(kind, {}):
            entry["not_applicable"] = NOT_APPLICABLE[kind][metric]
        summary[metric] = entry
    return summary


def evaluate_synthesizer(kind: str, spec, data: DataSplit, cfg: RunConfig, workload, suite=None) -> dict:
    def work(r):
        return evaluate_repeat(kind, spec, data, cfg, r, workload, suite)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            repeats = list(pool.map(work, range(cfg.repeats)))
    else:
        repeats = [work(r) for r in range(cfg.repeats)]
    return {
        "synthesizer": kind,
        "spec": None if spec is None else spec.to_dict(),
        "seeds": [rep["seed"] for rep in repeats],
        "metrics": summarize(repeats, cfg.metrics, kind),
    }


def run_evaluation(table: Table, cfg: RunConfig) -> dict:
    """Evaluate the configured synthesizer (and requested baselines) over ``cfg.repeats`` seeds."""
    data = run_split(table, cfg.seed)
    workload = None
    if "query" in cfg.metrics:
        workload = generate_workload(table.schema, min(cfg.workload_k, len(table.schema)),
                                     cfg.workload_count, derive_seed(cfg.seed, _WORKLOAD))
    spec = None if cfg.synth == "half" else synth_spec(
        cfg.synth, epsilon=cfg.epsilon, bins=cfg.bins, jitter_sigma=cfg.jitter_sigma, command=cfg.command)
    suite = None
    if "mla" in cfg.metrics:
        suite = (tune_suite(data.train, data.validation, derive_seed(cfg.seed, _EVALUATORS))
                 if cfg.tune_evaluators else builtin_suite())
    main = evaluate_synthesizer(cfg.synth, spec, data, cfg, workload, suite)
    baselines = {}
    for b in cfg.baselines:
        bspec = None if b == "half" else synth_spec(b)
        baselines[b] = evaluate_synthesizer(b, bspec, data, cfg, workload, suite)
    failures = sum(len(e["failures"]) for res in [main, *baselines.values()] for e in res["metrics"].values())
    return {
        "format_version": FORMAT_VERSION,
        "tool": {"name": "tabsyn-assess", "version": __version__},
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
        "data": {"rows": len(table), "fingerprint": table.fingerprint(),
                 "split_sizes": [len(data.train), len(data.validation), len(data.test)]},
        "evaluators": None if suite is None else [{"name": e.name, "params": e.params} for e in suite],
        "result": main,
        "baselines": baselines,
        "partial_failure": failures > 0,
        "failure_count": failures,
    }


# ----------------------------------------------------------------------
# files


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def raw_values_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["synthesizer", "repeat", "seed", "metric", "value"])
    for res in [report["result"], *report["baselines"].values()]:
        for metric, entry in res["metrics"].items():
            for r, (seed, v) in enumerate(zip(res["seeds"], entry["values"])):
                w.writerow([res["synthesizer"], r, seed, metric, "" if v is None else repr(v)])
    return buf.getvalue()


def write_report(report: dict, out_dir, stem: str = "report") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath, cpath = out / f"{stem}.json", out / f"{stem}_raw.csv"
    jpath.write_text(report_json(report), encoding="utf-8")
    cpath.write_text(raw_values_csv(report), encoding="utf-8")
    return jpath, cpath


def strip_volatile(report: dict) -> dict:
    """Copy without the timestamp, for comparing runs."""
    return {k: v for k, v in report.items() if k != "generated_at"}


# ----------------------------------------------------------------------
# ranking


@dataclass
class RankTable:
    synthesizers: list
    metrics: list
    means: np.ndarray
    ranks: np.ndarray
    average_rank: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.average_rank is None:
            self.average_rank = np.nanmean(self.ranks, axis=1) if self.ranks.size else np.array([])

    def to_dict(self) -> dict:
        return {
            "synthesizers": self.synthesizers,
            "metrics": self.metrics,
            "means": self.means.tolist(),
            "ranks": self.ranks.tolist(),
            "average_rank": self.average_rank.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["synthesizer", *[f"rank_{m}" for m in self.metrics], "average_rank"])
        for i, s in enumerate(self.synthesizers):
            w.writerow([s, *[repr(float(x)) for x in self.ranks[i]], repr(float(self.average_rank[i]))])
        return buf.getvalue()


def _entries(report: dict, label: str | None):
    yield label or report["result"]["synthesizer"], report["result"]
    for name, res in report.get("baselines", {}).items():
        yield name, res


def rank_reports(reports: list[dict], labels: list[str] | None = None) -> RankTable:
    """Rank synthesizers per metric by mean, rank 1 best, ties averaged.

    Lower is better except for DCR and NNDR.

    Baselines inside the reports are included once each. Only metrics
    present with a mean for every synthesizer are ranked.
    """
    rows = {}
    for k, rep in enumerate(reports):
        for name, res in _entries(rep, labels[k] if labels else None):
            if name in rows and rows[name] is not res and name in BASELINES:
                continue
            if name in rows:
                name = f"{name}#{k}"
            rows[name] = res
    names = list(rows)
    metric_sets = [{m for m, e in rows[n]["metrics"].items() if e["mean"] is not None} for n in names]
    metrics = [m for m in METRICS if all(m in s for s in metric_sets)]
    means = np.array([[rows[n]["metrics"][m]["mean"] for m in metrics] for n in names], dtype=float)
    means = means.reshape(len(names), len(metrics))
    signs = np.array([-1.0 if m in HIGHER_IS_BETTER else 1.0 for m in metrics])
    ranks = np.column_stack([rankdata(signs[j] * means[:, j], method="average") for j in range(len(metrics))]) \
        if metrics else np.empty((len(names), 0))
    return RankTable(names, metrics, means, ranks)


def format_traceback(exc: BaseException) -> str:
    return "".join(traceback.format_exception_only(type(exc), exc)).strip()
