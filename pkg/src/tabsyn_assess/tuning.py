"""Unified tuning objective and grid search over synthesizer hyperparameters."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import DataSplit
from .seeds import derive_seed
from .synth import SynthesizerSpec, train_synthesizer
from .transport import FidelityConfig, fidelity
from .utility import generate_workload, mla, query_error


@dataclass
class TuningConfig:
    """Weights of the objective and the settings of its three metrics.

    ``suite`` is a list of evaluators (``None`` for the built-in suite).
    """

    alpha1: float = 1 / 3
    alpha2: float = 1 / 3
    alpha3: float = 1 / 3
    max_order: int = 2
    workload_k: int = 3
    workload_count: int = 1000
    suite: list | None = None
    repeats: int = 3
    jobs: int = 1

    def __post_init__(self):
        alphas = (self.alpha1, self.alpha2, self.alpha3)
        if any(not math.isfinite(a) or a < 0 for a in alphas):
            raise ValueError("alphas must be finite and non-negative")
        if not any(a > 0 for a in alphas):
            raise ValueError("at least one alpha must be positive")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "suite"}
        d["suite"] = None if self.suite is None else [e.name for e in self.suite]
        return d


def tuning_objective(fidelity: float, mla: float, query_error: float, cfg: TuningConfig | None = None) -> float:
    """``alpha1 * fidelity + alpha2 * mla + alpha3 * query_error``."""
    cfg = cfg or TuningConfig()
    vals = (fidelity, mla, query_error)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"objective inputs must be finite, got {vals}")
    return cfg.alpha1 * fidelity + cfg.alpha2 * mla + cfg.alpha3 * query_error


def integer_grid(lo: int, hi: int, max_points: int = 8) -> list[int]:
    """Evenly spaced integers covering ``[lo, hi]``, at most ``max_points`` of them."""
    if hi < lo:
        raise ValueError("empty range")
    if hi - lo + 1 <= max_points:
        return list(range(lo, hi + 1))
    return sorted({int(round(v)) for v in np.linspace(lo, hi, max_points)})


@dataclass(frozen=True)
class GridSpace:
    """Cartesian grid; ``axes`` maps hyperparameter names to value lists."""

    axes: dict

    def __post_init__(self):
        if not self.axes or any(len(v) == 0 for v in self.axes.values()):
            raise ValueError("grid must be non-empty on every axis")

    def points(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[n] for n in names))]

    def __len__(self):
        return math.prod(len(v) for v in self.axes.values())


DEFAULT_SPACES = {"histogram": GridSpace({"bins": integer_grid(5, 20, 4)})}


@dataclass
class GridPoint:
    params: dict
    fidelity: float | None = None
    mla: float | None = None
    query_error: float | None = None
    objective: float | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class TuningResult:
    best_params: dict
    best_index: int
    points: list
    seeds: list
    config: dict

    @property
    def best(self) -> GridPoint:
        return self.points[self.best_index]

    def to_dict(self) -> dict:
        return {
            "best_params": self.best_params,
            "best_index": self.best_index,
            "points": [asdict(p) for p in self.points],
            "seeds": self.seeds,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def evaluate_point(spec: SynthesizerSpec, split: DataSplit, cfg: TuningConfig, seeds, workload) -> tuple:
    """Mean (fidelity, mla, query error) over the repeats, against the validation split."""
    fid_cfg = FidelityConfig(max_order=cfg.max_order)
    rows = []
    for train_seed, sample_seed in seeds:
        synth = train_synthesizer(spec, split.train, train_seed)
        syn = synth.sample(len(split.train), sample_seed)
        rows.append((
            fidelity(split.validation, syn, config=fid_cfg).overall,
            mla(split.train, syn, split.validation, cfg.suite, seed=train_seed),
            query_error(split.validation, syn, workload),
        ))
    return tuple(float(v) for v in np.mean(rows, axis=0))


def grid_search(spec_template: SynthesizerSpec, space: GridSpace, split: DataSplit,
                cfg: TuningConfig | None = None, seed: int = 0) -> TuningResult:
    """Evaluate every grid point and return the minimizer of the objective.

    All grid points share the same per-repeat seeds and query workload, so
    differences between points are not blurred by seed noise. Failing points
    are recorded and skipped; ties go to the earlier point.
    """
    cfg = cfg or TuningConfig()
    seeds = [(derive_seed(seed, r, 0), derive_seed(seed, r, 1)) for r in range(cfg.repeats)]
    workload = generate_workload(split.validation.schema, cfg.workload_k, cfg.workload_count, derive_seed(seed, 10**6))
    grid = space.points()

    def work(k):
        point = GridPoint(grid[k])
        try:
            spec = spec_template.with_params(**grid[k])
            point.fidelity, point.mla, point.query_error = evaluate_point(spec, split, cfg, seeds, workload)
            point.objective = tuning_objective(point.fidelity, point.mla, point.query_error, cfg)
        except Exception as exc:  # noqa: BLE001 - one bad point must not stop the search
            point.error = f"{type(exc).__name__}: {exc}"
        return point

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            points = list(pool.map(work, range(len(grid))))
    else:
        points = [work(k) for k in range(len(grid))]
    ok = [k for k, p in enumerate(points) if not p.failed]
    if not ok:
        raise RuntimeError("every grid point failed: " + "; ".join(p.error for p in points))
    best = min(ok, key=lambda k: (points[k].objective, k))
    config = cfg.to_dict() | {"spec": spec_template.to_dict(), "seed": seed, "grid": space.axes}
    return TuningResult(dict(grid[best]), best, points, [list(s) for s in seeds], config)
