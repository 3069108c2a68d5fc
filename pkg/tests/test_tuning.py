import numpy as np
import pytest
from hypothesis import given, strategies as st

from tabsyn_assess.dataset import split
from tabsyn_assess.synth import SynthesizerSpec
from tabsyn_assess.toydata import bimodal
from tabsyn_assess.tuning import GridSpace, TuningConfig, grid_search, integer_grid, tuning_objective
from tabsyn_assess.utility import builtin_suite

HIST = SynthesizerSpec("histogram", {"bins": 10})


@pytest.fixture(scope="module")
def parts():
    return split(bimodal(600, seed=0), 0)


def fast(**kw):
    base = dict(suite=builtin_suite()[:1], workload_count=100, repeats=2)
    return TuningConfig(**(base | kw))


def test_objective_arithmetic():
    assert tuning_objective(0.3, 0.06, 0.03) == pytest.approx(0.13)
    assert tuning_objective(0.3, 0.06, 0.03, TuningConfig(1, 0, 0)) == 0.3
    with pytest.raises(ValueError):
        tuning_objective(float("nan"), 0, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        TuningConfig(-1, 1, 1)
    with pytest.raises(ValueError):
        TuningConfig(0, 0, 0)
    with pytest.raises(ValueError):
        TuningConfig(repeats=0)


def test_fidelity_only_weights_pick_fidelity_argmin(parts):
    res = grid_search(HIST, GridSpace({"bins": [2, 5, 20]}), parts, fast(alpha1=1, alpha2=0, alpha3=0))
    fids = [p.fidelity for p in res.points]
    assert res.best_index == int(np.argmin(fids))
    assert all(p.objective == p.fidelity for p in res.points)


def test_single_point_grid(parts):
    res = grid_search(HIST, GridSpace({"bins": [7]}), parts, fast())
    assert res.best_params == {"bins": 7} and res.best_index == 0
    assert res.best.objective == pytest.approx(
        tuning_objective(res.best.fidelity, res.best.mla, res.best.query_error))


def test_determinism_and_parallel(parts):
    space = GridSpace({"bins": [4, 12]})
    a = grid_search(HIST, space, parts, fast(), seed=5).to_json()
    assert a == grid_search(HIST, space, parts, fast(), seed=5).to_json()
    b = grid_search(HIST, space, parts, fast(jobs=2), seed=5).to_dict()
    assert b["points"] == grid_search(HIST, space, parts, fast(), seed=5).to_dict()["points"]


def test_alpha_scaling_invariance(parts):
    space = GridSpace({"bins": [3, 8, 16]})
    a = grid_search(HIST, space, parts, fast(alpha1=0.2, alpha2=0.3, alpha3=0.5))
    b = grid_search(HIST, space, parts, fast(alpha1=2, alpha2=3, alpha3=5))
    assert a.best_index == b.best_index
    np.testing.assert_allclose([p.objective * 10 for p in a.points], [p.objective for p in b.points])


def test_failed_points_recorded(parts):
    res = grid_search(HIST, GridSpace({"bins": [0, 6]}), parts, fast())
    assert res.points[0].failed and "bins" in res.points[0].error
    assert res.best_params == {"bins": 6}
    with pytest.raises(RuntimeError, match="every grid point failed"):
        grid_search(HIST, GridSpace({"bins": [0, -1]}), parts, fast())


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        GridSpace({"bins": []})


@given(st.integers(-50, 50), st.integers(0, 500), st.integers(2, 10))
def test_integer_grid(lo, width, cap):
    g = integer_grid(lo, lo + width, cap)
    assert g[0] == lo and g[-1] == lo + width
    assert len(g) <= cap and g == sorted(set(g))
    if width + 1 <= cap:
        assert len(g) == width + 1


def test_integer_grid_examples():
    assert integer_grid(5, 20, 4) == [5, 10, 15, 20]
    assert len(integer_grid(1, 1000)) == 8


def test_bimodal_prefers_fine_bins():
    parts = split(bimodal(3000, seed=0), 0)
    res = grid_search(HIST, GridSpace({"bins": [5, 20]}), parts, TuningConfig(), seed=0)
    assert res.best_params == {"bins": 20}
    # the fine grid keeps the modes: fidelity dominates
    assert res.points[1].fidelity < res.points[0].fidelity
