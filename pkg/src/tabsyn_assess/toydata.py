"""Small generated tables used by the demos and the acceptance checks."""

from __future__ import annotations

import numpy as np

from .dataset import CATEGORICAL, MULTICLASS, NUMERICAL, REGRESSION, AttributeSpec, Schema, Table


def _bounds(v) -> tuple[float, float]:
    return float(np.min(v)), float(np.max(v))


def correlated_mixed(n: int = 4000, rho: float = 0.9, seed: int = 0) -> Table:
    """Two numerical and two categorical attributes driven by one latent factor.

    Numerical attributes are ``rho * z + sqrt(1 - rho^2) * noise``; the
    categorical ones threshold other noisy copies of ``z`` (2 and 4 levels),
    so every pair is strongly dependent. ``y`` (4 levels) is the target.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    s = np.sqrt(1.0 - rho**2)
    x1 = rho * z + s * rng.standard_normal(n)
    x2 = rho * z + s * rng.standard_normal(n)
    c = (rho * z + s * rng.standard_normal(n) > 0).astype(np.int64)
    y = np.digitize(rho * z + s * rng.standard_normal(n), [-0.8, 0.0, 0.8]).astype(np.int64)
    schema = Schema(
        [
            AttributeSpec("x1", NUMERICAL, _bounds(x1)),
            AttributeSpec("x2", NUMERICAL, _bounds(x2)),
            AttributeSpec("c", CATEGORICAL, ("lo", "hi")),
            AttributeSpec("y", CATEGORICAL, ("q1", "q2", "q3", "q4")),
        ],
        target="y",
        task=MULTICLASS,
    )
    return Table(schema, {"x1": x1, "x2": x2, "c": c, "y": y})


def heavy_tailed(n: int = 1000, numeric: int = 2, sigma: float = 1.2, seed: int = 0) -> Table:
    """Log-normal numerical attributes plus a uniform 3-level target.

    The long right tails leave a few records isolated, as income-like
    columns do in real tables.
    """
    rng = np.random.default_rng(seed)
    specs, cols = [], {}
    for k in range(numeric):
        v = rng.lognormal(0.0, sigma, n)
        cols[f"x{k}"] = v
        specs.append(AttributeSpec(f"x{k}", NUMERICAL, (0.0, float(v.max()))))
    cols["y"] = rng.integers(0, 3, n)
    specs.append(AttributeSpec("y", CATEGORICAL, ("a", "b", "c")))
    return Table(Schema(specs, target="y", task=MULTICLASS), cols)


def bimodal(n: int = 3000, modes=(0.125, 0.875), width: float = 0.005, noise: float = 0.3, seed: int = 0) -> Table:
    """Two sharply bimodal numerical attributes, a categorical side attribute
    and a noisy numerical target ``t = x1 + noise``.

    The modes sit at the centres of 20-bin cells on ``[0, 1]``, so coarser
    equal-width histograms smear them.
    """
    rng = np.random.default_rng(seed)
    cols = {}
    for name in ("x1", "x2"):
        centre = np.asarray(modes)[rng.integers(0, len(modes), n)]
        cols[name] = np.clip(centre + width * rng.standard_normal(n), 0.0, 1.0)
    cols["g"] = (rng.random(n) < 0.3).astype(np.int64)
    cols["t"] = cols["x1"] + noise * rng.standard_normal(n)
    schema = Schema(
        [
            AttributeSpec("x1", NUMERICAL, (0.0, 1.0)),
            AttributeSpec("x2", NUMERICAL, (0.0, 1.0)),
            AttributeSpec("g", CATEGORICAL, ("u", "v")),
            AttributeSpec("t", NUMERICAL, _bounds(cols["t"])),
        ],
        target="t",
        task=REGRESSION,
    )
    return Table(schema, cols)


def linear_regression(n: int = 1000, noise: float = 0.1, seed: int = 0) -> Table:
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, n)
    b = rng.integers(0, 3, n)
    t = 2.0 * a + 0.5 * b + noise * rng.standard_normal(n)
    schema = Schema(
        [
            AttributeSpec("a", NUMERICAL, (0.0, 1.0)),
            AttributeSpec("b", CATEGORICAL, ("p", "q", "r")),
            AttributeSpec("t", NUMERICAL, _bounds(t)),
        ],
        target="t",
        task=REGRESSION,
    )
    return Table(schema, {"a": a, "b": b, "t": t})
