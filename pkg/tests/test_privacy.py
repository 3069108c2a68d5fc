import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tabsyn_assess import privacy
from tabsyn_assess.dataset import AttributeSpec, NormalizationParams, Schema, Table, fit_normalization
from tabsyn_assess.privacy import (
    CoverageError, ShadowTrainingError, _draw_subsets, dcr, disclosure_score, mds, nearest_distance,
    nearest_distances, nndr, train_shadow_ensemble,
)
from tabsyn_assess.synth import SynthesizerSpec
from tabsyn_assess.toydata import correlated_mixed

from conftest import make_schema, random_table
from oracles import percentile_linear, scan_nearest

TWO = Schema([AttributeSpec("v", "numerical", (0.0, 1.0)), AttributeSpec("k", "categorical", ("A", "B"))],
             target="k", task="binary_classification")
UNIT = NormalizationParams({"v": (0.0, 1.0)})


def test_nearest_distance_examples():
    s = Table.from_records(TWO, [(1.0, "B")])
    assert nearest_distance((0.0, "A"), s, UNIT) == pytest.approx(2.0)
    s = Table.from_records(TWO, [(1.0, "B"), (0.25, "A"), (0.5, "B")])
    assert nearest_distance((0.25, "A"), s, UNIT) == 0.0
    assert nearest_distance((0.0, "A"), s, UNIT) == pytest.approx(0.25)
    assert nearest_distance((0.0, "A"), s, UNIT, metric="l2") == pytest.approx(0.25)
    with pytest.raises(ValueError):
        nearest_distance((0.0, "A"), s, UNIT, metric="cosine")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_nearest_matches_scan(nq, nr, seed):
    schema = make_schema()
    q, r = random_table(schema, nq, seed), random_table(schema, nr, seed + 1)
    params = fit_normalization(r)
    got = nearest_distances(q, r, params, k=2)
    cat = [False, False, True]

    def scaled(t):
        a, b = params.scale("a", t.column("a")), params.scale("b", t.column("b"))
        return list(zip(a, b, t.column("c")))

    for i, x in enumerate(scaled(q)):
        np.testing.assert_allclose(got[i], scan_nearest(x, scaled(r), cat, k=2), rtol=0, atol=1e-12)


def test_member_distance_zero(table):
    for x in table.take([0, 7, 59]).records():
        assert nearest_distance(x, table) == 0.0


def test_two_shadows_on_four_rows_are_complements():
    rng = np.random.default_rng(0)
    member = _draw_subsets(4, 2, rng, 100)
    assert member.sum(axis=0).tolist() == [2, 2]
    assert np.all(member[:, 0] ^ member[:, 1])
    with pytest.raises(CoverageError):
        _draw_subsets(4, 1, rng, 5)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 300), st.integers(2, 25), st.integers(0, 2**31 - 1))
def test_subsets_cover_every_record(n, m, seed):
    if (n // 2) * m < n:
        with pytest.raises(CoverageError, match="cannot cover"):
            _draw_subsets(n, m, np.random.default_rng(seed), 100)
        return
    member = _draw_subsets(n, m, np.random.default_rng(seed), 100)
    assert np.all(member.sum(axis=0) == n // 2)
    c = member.sum(axis=1)
    assert np.all((c > 0) & (c < m))


def test_ensemble_determinism(table):
    spec = SynthesizerSpec("histogram")
    a = train_shadow_ensemble(spec, table, 4, 3, seed=9)
    b = train_shadow_ensemble(spec, table, 4, 3, seed=9)
    np.testing.assert_array_equal(a.membership, b.membership)
    assert a.synthetic(2, 1).equals(b.synthetic(2, 1))
    assert len(a.synthetic(0, 0)) == a.subset_size == 30
    assert len(a.synthetic_sets) == 4 and len(a.synthetic_sets[0]) == 3
    r1, r2 = mds(spec, table, 4, 3, seed=9), mds(spec, table, 4, 3, seed=9)
    assert r1.mds == r2.mds and r1.argmax == r2.argmax


def test_self_copy_in_mean_zero():
    d = correlated_mixed(80, seed=1)
    rep = mds(SynthesizerSpec("self_copy"), d, m=6, n=3, seed=2)
    np.testing.assert_array_equal(rep.in_mean, 0.0)
    np.testing.assert_allclose(rep.scores, rep.out_mean)
    assert rep.mds == pytest.approx(rep.out_mean.max())
    assert np.all(rep.in_count + rep.out_count == 6)


def test_mds_is_max_of_record_scores(table):
    spec = SynthesizerSpec("histogram")
    rep = mds(spec, table, 5, 4, seed=3)
    assert rep.mds == pytest.approx(rep.scores.max())
    assert rep.record(int(np.argmax(rep.scores))).score == pytest.approx(rep.mds)
    ens = train_shadow_ensemble(spec, table, 5, 4, seed=3)
    rec = disclosure_score(rep.argmax, ens)
    assert rec.score == pytest.approx(rep.mds)


def test_constant_synthesizer_scores_near_zero():
    d = correlated_mixed(200, seed=4)
    rep = mds(SynthesizerSpec("constant"), d, m=6, n=4, seed=0)
    assert rep.mds < 0.05 * rep.distance_scale


def test_memorizing_discloses_more_than_histogram():
    d = correlated_mixed(200, seed=5)
    mem = mds(SynthesizerSpec("memorizing", {"jitter_sigma": 0.01}), d, m=8, n=5, seed=1)
    hist = mds(SynthesizerSpec("histogram"), d, m=8, n=5, seed=1)
    k = mem.argmax
    assert mem.scores[k] > hist.scores[k]
    assert mem.mds > hist.mds


def test_shadow_failure_is_attributed(table, monkeypatch):
    import tabsyn_assess.privacy as P

    def boom(spec, train, seed):
        raise RuntimeError("nope")

    monkeypatch.setattr(P, "train_synthesizer", boom)
    with pytest.raises(ShadowTrainingError, match="shadow 0"):
        train_shadow_ensemble(SynthesizerSpec("histogram"), table, 3, 2)


def test_run_dir_resume(tmp_path, table, monkeypatch):
    spec = SynthesizerSpec("histogram")
    first = mds(spec, table, 4, 3, seed=1, run_dir=tmp_path)
    (store,) = tmp_path.glob("mds-*")
    assert len(list(store.glob("shadow-*.npy"))) == 4
    (store / "shadow-002.npy").unlink()
    calls = []
    real = privacy.shadow_mean_distances
    monkeypatch.setattr(privacy, "shadow_mean_distances", lambda e, i, *a, **k: calls.append(i) or real(e, i, *a, **k))
    again = mds(spec, table, 4, 3, seed=1, run_dir=tmp_path)
    assert calls == [2]
    assert again.mds == first.mds
    np.testing.assert_array_equal(again.in_mean, first.in_mean)


def test_record_cap_and_l2_notes(table):
    rep = mds(SynthesizerSpec("histogram"), table, 3, 2, seed=0, record_cap=10)
    assert rep.records.size == 10 and rep.config["records_scored"] == 10
    assert any("record cap" in n for n in rep.notes)
    rep2 = mds(SynthesizerSpec("histogram"), table, 3, 2, seed=0, metric="l2")
    assert any("l2" in n for n in rep2.notes)
    assert "per_record" not in rep.to_dict(per_record=False)


def test_dcr_nndr_examples(table):
    assert dcr(table, table) == 0.0
    assert nndr(table, table) == 0.0
    dup = Table.concat([table, table])
    # every synthetic row has two identical real neighbours
    assert nndr(dup, table) == 1.0
    with pytest.raises(ValueError):
        dcr(table.take([]), table)


def test_dcr_matches_percentile_oracle():
    schema = make_schema()
    real, syn = random_table(schema, 50, 1), random_table(schema, 40, 2)
    params = fit_normalization(real)

    def scaled(t):
        return list(zip(params.scale("a", t.column("a")), params.scale("b", t.column("b")), t.column("c")))

    near = [scan_nearest(x, scaled(real), [False, False, True], k=2) for x in scaled(syn)]
    assert dcr(real, syn) == pytest.approx(percentile_linear([n[0] for n in near], 5), abs=1e-12)
    ratios = [n[0] / n[1] if n[1] > 0 else 1.0 for n in near]
    assert nndr(real, syn) == pytest.approx(percentile_linear(ratios, 5), abs=1e-12)
    assert dcr(real, syn, percentile=50) == pytest.approx(percentile_linear([n[0] for n in near], 50), abs=1e-12)
