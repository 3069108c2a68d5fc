"""Wasserstein distances between marginals and the marginal-averaged fidelity score."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _simplex
from .dataset import Table, normalize
from .marginals import (
    MarginalDistribution,
    MarginalSet,
    build_cost_matrix,
    enumerate_marginals,
    extract_marginal,
)

log = logging.getLogger(__name__)


def _check_weights(a, b, C):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost matrix shape {C.shape} does not match weights ({a.size}, {b.size})")
    if np.any(a < 0) or np.any(b < 0) or np.any(C < 0):
        raise ValueError("weights and costs must be non-negative")
    if not math.isclose(a.sum(), b.sum(), rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"weights sum to different totals ({a.sum()} vs {b.sum()})")
    return a, b, C


def emd(a, b, C, max_iter: int | None = None):
    """Exact optimal transport between weight vectors ``a`` and ``b``.

    Returns ``(distance, plan)``. Zero-weight points are dropped before the
    network simplex runs and re-inserted as zero rows/columns in the plan.
    """
    a, b, C = _check_weights(a, b, C)
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    sub = np.ascontiguousarray(C[np.ix_(ia, ib)])
    if max_iter is None:
        max_iter = 100 * (ia.size + ib.size) * max(ia.size, ib.size) + 10_000
    plan_sub, _, status = _simplex.network_simplex(a[ia], b[ib], sub, max_iter)
    if status != 0:
        raise RuntimeError(f"network simplex failed (status {status})")
    plan = np.zeros(C.shape)
    plan[np.ix_(ia, ib)] = plan_sub
    return float(np.sum(sub * plan_sub)), plan


def wasserstein_exact(p: MarginalDistribution, q: MarginalDistribution, c: np.ndarray):
    """Exact W1 between two marginals under cost ``c``; returns ``(distance, plan)``."""
    return emd(p.weights, q.weights, c)


def wasserstein_1d(p: MarginalDistribution, q: MarginalDistribution) -> float:
    """Closed-form W1 for a single numerical attribute: the integral of |F_p - F_q|."""
    if p.variable.order != 1 or q.variable.order != 1 or p.categorical[0] or q.categorical[0]:
        raise ValueError("wasserstein_1d needs a single numerical attribute")
    return cdf_distance(p.support[:, 0], q.support[:, 0], p.weights, q.weights)


def cdf_distance(x, y, wx=None, wy=None) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    wx = np.full(x.size, 1.0 / x.size) if wx is None else np.asarray(wx, dtype=np.float64) / np.sum(wx)
    wy = np.full(y.size, 1.0 / y.size) if wy is None else np.asarray(wy, dtype=np.float64) / np.sum(wy)
    xs = np.argsort(x, kind="stable")
    ys = np.argsort(y, kind="stable")
    grid = np.concatenate([x, y])
    grid.sort(kind="stable")
    gaps = np.diff(grid)
    # CDF of each side evaluated on [grid[k], grid[k+1])
    cx = np.concatenate([[0.0], np.cumsum(wx[xs])])[np.searchsorted(x[xs], grid[:-1], side="right")]
    cy = np.concatenate([[0.0], np.cumsum(wy[ys])])[np.searchsorted(y[ys], grid[:-1], side="right")]
    return float(np.sum(np.abs(cx - cy) * gaps))


@dataclass
class SinkhornResult:
    distance: float
    plan: np.ndarray
    converged: bool
    iterations: int
    marginal_error: float


def _log_update(loga, C, g, reg):
    return reg * (loga - logsumexp((g[None, :] - C) / reg, axis=1))


def _sinkhorn_stage(a, b, C, reg, f, g, max_iters, tol, check_every=10):
    """Scaling iterations on a kernel absorbed into the dual potentials ``f``, ``g``."""
    loga = np.log(a)
    logb = np.log(b)
    K = np.exp((f[:, None] + g[None, :] - C) / reg)
    u = np.ones_like(a)
    v = np.ones_like(b)
    err = np.inf
    it = 0
    while it < max_iters:
        it += 1
        Kv = K @ v
        if not np.all(Kv > 0):
            # a whole row underflowed: fall back to an exact log-domain step
            f = _log_update(loga, C, g + reg * np.log(v), reg)
            g = g + reg * np.log(v)
            K = np.exp((f[:, None] + g[None, :] - C) / reg)
            u = np.ones_like(a)
            v = np.ones_like(b)
            Kv = K @ v
        u = a / Kv
        Ktu = K.T @ u
        if not np.all(Ktu > 0):
            f = f + reg * np.log(u)
            g = _log_update(logb, C.T, f, reg)
            K = np.exp((f[:, None] + g[None, :] - C) / reg)
            u = np.ones_like(a)
            v = np.ones_like(b)
            continue
        v = b / Ktu
        if np.max(np.abs(u)) > 1e50 or np.max(np.abs(v)) > 1e50 or np.min(u) < 1e-50 or np.min(v) < 1e-50:
            f = f + reg * np.log(u)
            g = g + reg * np.log(v)
            K = np.exp((f[:, None] + g[None, :] - C) / reg)
            u = np.ones_like(a)
            v = np.ones_like(b)
        if it % check_every == 0 or it == max_iters:
            err = float(np.sum(np.abs(u * (K @ v) - a)))
            if err < tol:
                break
    f = f + reg * np.log(u)
    g = g + reg * np.log(v)
    return f, g, it, err


def sinkhorn(a, b, C, reg: float, max_iters: int = 10_000, tol: float = 1e-6, scaling: float = 0.5):
    """Entropic optimal transport in the log-stabilized domain.

    The regularization is annealed geometrically from ``max(C)`` down to
    ``reg`` (warm-starting the dual potentials), which keeps small ``reg``
    tractable. Non-convergence is reported through ``SinkhornResult.converged``
    rather than raised.
    """
    if not reg > 0:
        raise ValueError("reg must be positive")
    a, b, C = _check_weights(a, b, C)
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    a_, b_ = a[ia], b[ib]
    C_ = C[np.ix_(ia, ib)]
    f = np.zeros(a_.size)
    g = np.zeros(b_.size)
    schedule = []
    r = max(float(C_.max()), reg)
    while r > reg:
        schedule.append(r)
        r *= scaling
    schedule.append(reg)
    total = 0
    for r in schedule[:-1]:
        f, g, it, _ = _sinkhorn_stage(a_, b_, C_, r, f, g, max(50, max_iters // 20), max(tol, 1e-6))
        total += it
    f, g, it, err = _sinkhorn_stage(a_, b_, C_, reg, f, g, max_iters, tol)
    total += it
    plan_ = np.exp((f[:, None] + g[None, :] - C_) / reg)
    err = float(np.sum(np.abs(plan_.sum(axis=1) - a_)) + np.sum(np.abs(plan_.sum(axis=0) - b_)))
    plan = np.zeros(C.shape)
    plan[np.ix_(ia, ib)] = plan_
    return SinkhornResult(float(np.sum(C_ * plan_)), plan, err < 2 * tol, total, err)


def wasserstein_sinkhorn(p, q, c, reg: float, max_iters: int = 10_000, tol: float = 1e-6) -> float:
    res = sinkhorn(p.weights, q.weights, c, reg, max_iters=max_iters, tol=tol)
    if not res.converged:
        warnings.warn(
            f"Sinkhorn did not converge (marginal error {res.marginal_error:.2e} after {res.iterations} iterations)",
            RuntimeWarning,
            stacklevel=2,
        )
    return res.distance


# ----------------------------------------------------------------------
# fidelity


@dataclass
class FidelityConfig:
    """Solver selection and subsampling for :func:`fidelity`.

    ``solver`` is ``"auto"`` (1-D closed form for single numerical attributes,
    exact LP up to ``exact_max_support`` points per side, Sinkhorn beyond),
    ``"exact"`` or ``"sinkhorn"``. Marginals with more than
    ``subsample_threshold`` support rows are subsampled to half, then capped
    at ``max_support``; with the defaults every support the auto path sees
    fits the exact solver.
    """

    max_order: int = 2
    solver: str = "auto"
    exact_max_support: int = 5000
    subsample_threshold: int = 5000
    max_support: int = 5000
    sinkhorn_reg_factor: float = 0.05
    sinkhorn_max_iters: int = 10_000
    sinkhorn_tol: float = 1e-6
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.solver not in ("auto", "exact", "sinkhorn"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass
class FidelityScore:
    overall: float
    per_marginal: dict
    solvers: dict
    config: dict
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _subsample_size(n: int, cfg: FidelityConfig) -> int:
    if n <= cfg.subsample_threshold:
        return n
    return min(math.ceil(n / 2), cfg.max_support)


def marginal_distance(real: Table, synthetic: Table, variable, cfg: FidelityConfig, index: int = 0):
    """Distance for one marginal of already-normalized tables; returns ``(value, solver, note)``."""
    has_num = any(real.schema[a].is_numerical for a in variable.attributes)
    sub_p = sub_q = None
    note = None
    if has_num:
        sp = _subsample_size(len(real), cfg)
        sq = _subsample_size(len(synthetic), cfg)
        ss = np.random.SeedSequence([cfg.seed, index])
        seed_p, seed_q = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
        if sp < len(real):
            sub_p = (sp, seed_p)
        if sq < len(synthetic):
            sub_q = (sq, seed_q)
        if sub_p or sub_q:
            note = f"{variable.key}: subsampled to {sp} real / {sq} synthetic rows"
    p = extract_marginal(real, variable, sub_p)
    q = extract_marginal(synthetic, variable, sub_q)
    if variable.order == 1 and not p.categorical[0] and cfg.solver == "auto":
        return wasserstein_1d(p, q), "1d", note
    c = build_cost_matrix(p, q)
    use_exact = cfg.solver == "exact" or (
        cfg.solver == "auto" and max(len(p), len(q)) <= cfg.exact_max_support
    )
    if use_exact:
        return wasserstein_exact(p, q, c)[0], "exact", note
    reg = cfg.sinkhorn_reg_factor * float(c.mean()) if c.mean() > 0 else 1e-3
    res = sinkhorn(p.weights, q.weights, c, reg, max_iters=cfg.sinkhorn_max_iters, tol=cfg.sinkhorn_tol)
    if not res.converged:
        msg = f"{variable.key}: Sinkhorn not converged (error {res.marginal_error:.2e})"
        note = msg if note is None else f"{note}; {msg}"
    return res.distance, "sinkhorn", note


def fidelity(
    real: Table,
    synthetic: Table,
    marginal_set: MarginalSet | None = None,
    config: FidelityConfig | None = None,
) -> FidelityScore:
    """Mean Wasserstein distance over a set of marginals (lower is better).

    Numerical attributes of both tables are min-max scaled with the real
    table's parameters first; synthetic values are not clipped.
    """
    cfg = config or FidelityConfig()
    if real.schema.names != synthetic.schema.names:
        raise ValueError("real and synthetic tables must share a schema")
    if len(real) == 0 or len(synthetic) == 0:
        raise ValueError("fidelity needs non-empty tables")
    if marginal_set is None:
        marginal_set = enumerate_marginals(real.schema, min(cfg.max_order, len(real.schema)))
    real_n, params = normalize(real)
    syn_n, _ = normalize(synthetic, params)
    variables = list(marginal_set)

    def work(k):
        return marginal_distance(real_n, syn_n, variables[k], cfg, k)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(work, range(len(variables))))
    else:
        results = [work(k) for k in range(len(variables))]
    per = {v.key: float(r[0]) for v, r in zip(variables, results)}
    solvers = {v.key: r[1] for v, r in zip(variables, results)}
    notes = [r[2] for r in results if r[2]]
    overall = float(math.fsum(per[v.key] for v in variables) / len(variables))
    return FidelityScore(overall, per, solvers, asdict(cfg), notes)
