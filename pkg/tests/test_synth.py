import sys
import textwrap
from collections import Counter

import numpy as np
import pytest
from sklearn.metrics import mutual_info_score

from tabsyn_assess.dataset import bin_index
from tabsyn_assess.privacy import mds, nearest_distances
from tabsyn_assess.synth import (
    ConstantSynthesizer, ExternalSynthesizerError, MalformedOutputError, SynthesizerSpec, duplicate_rows,
    external_synthesizer, half_baseline, memorizing_synthesizer, self_baseline, train_histogram,
    train_synthesizer,
)
from tabsyn_assess.toydata import correlated_mixed
from tabsyn_assess.transport import fidelity

from conftest import make_schema, random_table


def in_domain(t):
    for a in t.schema.attributes:
        col = t.column(a.name)
        if a.is_numerical:
            assert np.all((col >= a.domain[0]) & (col <= a.domain[1]))
        else:
            assert np.all((col >= 0) & (col < len(a.domain)))


def test_spec_validation():
    assert SynthesizerSpec("self").kind == "self_copy"
    assert SynthesizerSpec("histogram", epsilon=float("inf")).epsilon is None
    with pytest.raises(ValueError):
        SynthesizerSpec("self_copy", epsilon=1.0)
    with pytest.raises(ValueError):
        SynthesizerSpec("histogram", epsilon=0.0)
    with pytest.raises(ValueError):
        SynthesizerSpec("gan")
    with pytest.raises(ValueError):
        train_synthesizer(SynthesizerSpec("half"), random_table(make_schema(), 10))


def test_half_baseline():
    t = random_table(make_schema(), 10)
    a, b = half_baseline(t, 3)
    assert (len(a), len(b)) == (5, 5)
    assert Counter(a.records()) + Counter(b.records()) == Counter(t.records())
    a11, b11 = half_baseline(random_table(make_schema(), 11), 3)
    assert (len(a11), len(b11)) == (6, 5)
    a2, b2 = half_baseline(t, 3)
    assert a.equals(a2) and b.equals(b2)
    with pytest.raises(ValueError):
        half_baseline(t.take([0]), 0)


@pytest.mark.parametrize("kind", ["histogram", "self_copy", "memorizing", "constant"])
def test_builtin_determinism_and_conformance(kind, table):
    spec = SynthesizerSpec(kind, {"jitter_sigma": 0.3} if kind == "memorizing" else {})
    synth = train_synthesizer(spec, table, seed=4)
    s1, s2 = synth.sample(80, 11), synth.sample(80, 11)
    assert s1.to_csv() == s2.to_csv()
    in_domain(s1)
    assert synth.provenance["spec"]["kind"] == kind


def test_histogram_noiseless_frequencies_are_empirical(table):
    h = train_histogram(table, bins=4)
    np.testing.assert_array_equal(h.marginals["c"], np.bincount(table.column("c"), minlength=3) / len(table))
    counts = np.bincount(bin_index(table.column("a"), 0.0, 1.0, 4), minlength=4)
    np.testing.assert_array_equal(h.marginals["a"], counts / len(table))
    assert h.raw_marginals is None


def test_histogram_samples_are_independent():
    data = correlated_mixed(3000, seed=2)
    syn = train_histogram(data, 10, seed=0).sample(10_000, 1)
    rng = np.random.default_rng(0)

    def codes(name):
        a = syn.schema[name]
        col = syn.column(name)
        return bin_index(col, *a.domain, 10) if a.is_numerical else col

    names = syn.schema.names
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    # 99% family-wise: Bonferroni over the pairs
    q = 100 * (1 - 0.01 / len(pairs))
    for a, b in pairs:
        x, y = codes(a), codes(b)
        observed = mutual_info_score(x, y)
        null = [mutual_info_score(x, rng.permutation(y)) for _ in range(1200)]
        assert observed <= np.percentile(null, q), (a, b)


def test_dp_noise_mean_and_variance(table):
    eps = 2.0
    b = len(table.schema) / (eps * len(table))
    truth = train_histogram(table, 5).marginals["c"]
    noise = np.array([train_histogram(table, 5, eps, seed=s).raw_marginals["c"] - truth for s in range(1000)])
    # standard errors: mean b*sqrt(2/1000), variance about 2b^2 * sqrt(5/1000)
    assert np.all(np.abs(noise.mean(axis=0)) < 4 * b * np.sqrt(2 / 1000))
    np.testing.assert_allclose(noise.var(axis=0), 2 * b**2, rtol=0.3)


def test_dp_distortion_decreases_with_epsilon(table):
    truth = train_histogram(table, 10).marginals

    def distortion(eps):
        out = []
        for s in range(100):
            m = train_histogram(table, 10, eps, seed=s).marginals
            out.append(sum(np.abs(m[k] - truth[k]).sum() for k in truth))
        return np.mean(out)

    assert distortion(0.5) > distortion(8.0)


def test_self_baseline(table):
    synth = self_baseline(table)
    perm = synth.sample(len(table), 0)
    assert Counter(perm.records()) == Counter(table.records())
    more = synth.sample(3 * len(table), 1)
    assert set(more.records()) <= set(table.records())
    assert np.all(nearest_distances(table, perm)[:, 0] == 0)


def test_memorizing_zero_jitter_is_self(table):
    a = memorizing_synthesizer(table, 0.0).sample(40, 5)
    b = self_baseline(table).sample(40, 5)
    assert a.equals(b)
    with pytest.raises(ValueError):
        memorizing_synthesizer(table, -0.1)


def test_constant_ignores_data_and_seed(table):
    c = ConstantSynthesizer(table.schema)
    assert c.sample(20, 1).equals(c.sample(20, 2))
    other = train_synthesizer(SynthesizerSpec("constant"), random_table(table.schema, 30, 99), seed=7)
    assert other.sample(20, 3).equals(c.sample(20, 1))


def test_duplicate_rows(table):
    assert duplicate_rows(table, 0.0, 1).equals(table)
    t = random_table(table.schema, 100, seed=5)
    d = duplicate_rows(t, 0.5, 2)
    assert len(d) == 100
    counts = Counter(d.records())
    assert sum(c for c in counts.values() if c >= 2) == 100
    assert set(counts) <= set(t.records())
    for r in (0.1, 0.25, 0.9):
        assert len(duplicate_rows(t, r, 0)) == 100
    with pytest.raises(ValueError):
        duplicate_rows(t, 1.0, 0)


def test_memorizing_jitter_lowers_mds():
    data = correlated_mixed(200, seed=3)
    vals = [np.mean([mds(SynthesizerSpec("memorizing", {"jitter_sigma": j}), data, 10, 10, seed=s).mds
                     for s in range(5)]) for j in (0.0, 0.05, 0.2)]
    assert vals[0] >= vals[1] >= vals[2]


# ----------------------------------------------------------------------
# external protocol

STUB = textwrap.dedent('''
    import argparse, shutil, sys, time, json
    p = argparse.ArgumentParser()
    for f in ("--train", "--schema", "--model-out", "--seed", "--hyperparams", "--model", "--n", "--out"):
        p.add_argument(f)
    a = p.parse_args()
    mode = "{mode}"
    if a.train:
        json.load(open(a.hyperparams))
        shutil.copy(a.train, a.model_out + "/train.csv")
        sys.exit(0)
    if mode == "sleep":
        time.sleep(10)
    if mode == "fail":
        print("stub exploded", file=sys.stderr)
        sys.exit(4)
    lines = open(a.model + "/train.csv").read().splitlines()
    if mode == "badcols":
        lines = [l + ",extra" for l in lines]
    if mode == "badlabel":
        lines[1] = ",".join(lines[1].split(",")[:-1] + ["nope"])
    open(a.out, "w").write("\\n".join(lines[: int(a.n) + 1]) + "\\n")
''')


def stub_spec(tmp_path, mode, **hp):
    path = tmp_path / f"stub_{mode}.py"
    path.write_text(STUB.format(mode=mode))
    return SynthesizerSpec("external", {"command": [sys.executable, str(path)], "workdir": str(tmp_path), **hp})


def test_external_copy_stub_behaves_like_self(tmp_path, table):
    synth = external_synthesizer(stub_spec(tmp_path, "copy"), table, seed=1)
    out = synth.sample(len(table), 0)
    assert out.equals(table)
    assert np.all(nearest_distances(table, out)[:, 0] == 0)
    assert fidelity(table, out).overall == pytest.approx(0.0, abs=1e-12)
    assert synth.provenance["train_fingerprint"] == table.fingerprint()


def test_external_malformed_output(tmp_path, table):
    synth = external_synthesizer(stub_spec(tmp_path, "badcols"), table)
    with pytest.raises(MalformedOutputError):
        synth.sample(5, 0)
    synth = external_synthesizer(stub_spec(tmp_path, "badlabel"), table)
    with pytest.raises(MalformedOutputError, match="unknown category"):
        synth.sample(5, 0)


def test_external_failure_carries_stderr(tmp_path, table):
    synth = external_synthesizer(stub_spec(tmp_path, "fail"), table)
    with pytest.raises(ExternalSynthesizerError, match="stub exploded") as err:
        synth.sample(5, 0)
    assert err.value.returncode == 4


def test_external_timeout(tmp_path, table):
    synth = external_synthesizer(stub_spec(tmp_path, "sleep", timeout=1), table)
    with pytest.raises(ExternalSynthesizerError, match="timed out"):
        synth.sample(5, 0)


def test_external_domain_violations_reported(tmp_path, table):
    wide = table.with_columns(a=table.column("a") * 3.0)
    synth = external_synthesizer(stub_spec(tmp_path, "copy"), wide)
    with pytest.warns(RuntimeWarning, match="out-of-domain"):
        out = synth.sample(len(table), 0)
    assert synth.domain_violations == int(np.sum(wide.column("a") > 1.0))
    np.testing.assert_array_equal(out.column("a"), wide.column("a"))


def test_external_scratch_from_env(tmp_path, table, monkeypatch):
    monkeypatch.setenv("TABSYN_ASSESS_TMP", str(tmp_path / "scratch"))
    spec = stub_spec(tmp_path, "copy")
    spec = SynthesizerSpec("external", {"command": spec.hyperparameters["command"]})
    synth = external_synthesizer(spec, table)
    assert str(synth.model_dir).startswith(str(tmp_path / "scratch"))


def test_memorizing_duplication_ratio_keeps_train_size(table):
    synth = train_synthesizer(SynthesizerSpec("memorizing", {"duplication_ratio": 0.5}), table, seed=3)
    expected = duplicate_rows(table, 0.5, 3)
    assert synth.train.equals(expected) and len(synth.train) == len(table)
    assert set(synth.sample(200, 0).records()) <= set(expected.records())
    assert synth.provenance["train_fingerprint"] == table.fingerprint()
