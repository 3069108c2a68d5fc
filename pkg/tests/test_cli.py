import csv
import json
import sys

import numpy as np
import pytest

from tabsyn_assess.cli import main
from tabsyn_assess.dataset import Schema, load_table
from tabsyn_assess.report import rank_reports, strip_volatile
from tabsyn_assess.toydata import correlated_mixed


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    t = correlated_mixed(300, seed=0)
    t.to_csv(d / "data.csv")
    t.schema.save(d / "schema.json")
    return d


def args(data, *rest):
    return ["--data", str(data / "data.csv"), "--schema", str(data / "schema.json"), *rest]


def raw_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_schema_inference(data, tmp_path):
    out = tmp_path / "s.json"
    assert main(["schema", "--data", str(data / "data.csv"), "--target", "y", "--out", str(out)]) == 0
    s = Schema.load(out)
    assert s.target == "y" and s["c"].is_categorical and s["x1"].is_numerical


def test_split_sizes(data, tmp_path):
    assert main(["split", *args(data, "--seed", "3", "--out", str(tmp_path))]) == 0
    schema = Schema.load(tmp_path / "schema.json")
    sizes = [len(load_table(tmp_path / f"{n}.csv", schema)) for n in ("train", "validation", "test")]
    assert sum(sizes) == 300 and sizes == [192, 48, 60]


def test_synth_writes_rows(data, tmp_path):
    out = tmp_path / "syn.csv"
    assert main(["synth", *args(data, "--synth", "histogram", "--bins", "7", "--n", "50", "--out", str(out))]) == 0
    assert len(load_table(out, Schema.load(data / "schema.json"))) == 50


def test_eval_twenty_repeats(data, tmp_path):
    code = main(["eval", *args(data, "--metrics", "fidelity,query", "--workload-count", "50",
                               "--out", str(tmp_path))])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert len(rep["result"]["metrics"]["fidelity"]["values"]) == 20
    rows = raw_rows(tmp_path / "report_raw.csv")
    assert sum(r["metric"] == "fidelity" for r in rows) == 20
    vals = [float(r["value"]) for r in rows if r["metric"] == "fidelity"]
    assert rep["result"]["metrics"]["fidelity"]["mean"] == pytest.approx(np.mean(vals))
    assert rep["result"]["metrics"]["fidelity"]["std"] == pytest.approx(np.std(vals, ddof=1))


def test_config_file_and_flag_override(data, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"repeats": 5, "metrics": ["fidelity"], "synth": "self"}))
    assert main(["--config", str(cfg), "eval", *args(data, "--repeats", "2", "--out", str(tmp_path))]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["config"]["repeats"] == 2 and rep["config"]["synth"] == "self"
    assert len(rep["result"]["metrics"]["fidelity"]["values"]) == 2
    assert list(rep["result"]["metrics"]) == ["fidelity"]
    assert main(["eval", "--config", str(cfg), *args(data, "--out", str(tmp_path / "after"))]) == 0
    rep = json.loads((tmp_path / "after" / "report.json").read_text())
    assert rep["config"]["repeats"] == 5


@pytest.mark.parametrize("extra", [
    ["--synth", "self", "--epsilon", "1"],
    ["--synth", "histogram", "--jitter-sigma", "0.1"],
    ["--synth", "external"],
    ["--synth", "memorizing", "--bins", "5"],
    ["--repeats", "0"],
])
def test_conflicting_flags_exit_2(data, extra, capsys):
    assert main(["eval", *args(data, *extra)]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_choice_is_usage_error(data):
    with pytest.raises(SystemExit) as e:
        main(["eval", *args(data, "--metrics", "fidelity,bogus")])
    assert e.value.code == 2


def test_missing_file_exit_1(tmp_path):
    assert main(["eval", "--data", str(tmp_path / "nope.csv"), "--schema", str(tmp_path / "nope.json")]) == 1


def test_partial_failure_exit_3(data, tmp_path):
    stub = tmp_path / "fail.py"
    stub.write_text("import sys\nsys.exit(5)\n")
    code = main(["eval", *args(data, "--synth", "external", "--command", f"{sys.executable} {stub}",
                               "--metrics", "fidelity", "--repeats", "2", "--out", str(tmp_path))])
    assert code == 3
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["partial_failure"] and rep["failure_count"] == 2
    assert rep["result"]["metrics"]["fidelity"]["values"] == [None, None]


def test_eval_is_deterministic(data, tmp_path):
    opts = ["--metrics", "fidelity,dcr,mla", "--repeats", "2", "--baselines", "half,self"]
    assert main(["eval", *args(data, *opts, "--out", str(tmp_path / "a"))]) == 0
    assert main(["eval", *args(data, *opts, "--out", str(tmp_path / "b"))]) == 0
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert strip_volatile(a) == strip_volatile(b)
    assert (tmp_path / "a" / "report_raw.csv").read_text() == (tmp_path / "b" / "report_raw.csv").read_text()


def test_report_ranks_with_ties(data, tmp_path):
    for name in ("one", "two"):
        assert main(["eval", *args(data, "--synth", "self", "--metrics", "fidelity,dcr", "--repeats", "2",
                                   "--out", str(tmp_path / name))]) == 0
    assert main(["eval", *args(data, "--metrics", "fidelity,dcr", "--repeats", "2",
                               "--out", str(tmp_path / "hist"))]) == 0
    paths = [str(tmp_path / n / "report.json") for n in ("one", "two", "hist")]
    assert main(["report", *paths, "--labels", "selfA,selfB,hist", "--out", str(tmp_path / "rank")]) == 0
    table = json.loads((tmp_path / "rank" / "ranking.json").read_text())
    assert table["synthesizers"] == ["selfA", "selfB", "hist"]
    ranks = dict(zip(table["metrics"], np.array(table["ranks"]).T.tolist()))
    # identical SELF runs tie on fidelity (best) and on DCR (worst: 0 distance)
    assert ranks["fidelity"] == [1.5, 1.5, 3.0]
    assert ranks["dcr"] == [2.5, 2.5, 1.0]
    assert main(["report", *paths, "--labels", "x,y"]) == 2


def test_rank_direction_for_syntactic_metrics():
    def rep(name, fid, dcr_):
        m = {"fidelity": {"mean": fid}, "dcr": {"mean": dcr_}}
        return {"result": {"synthesizer": name, "metrics": m}, "baselines": {}}

    t = rank_reports([rep("a", 0.1, 0.5), rep("b", 0.2, 0.1)])
    assert t.ranks.tolist() == [[1.0, 1.0], [2.0, 2.0]]


def test_tune_writes_result(data, tmp_path):
    code = main(["tune", *args(data, "--synth", "histogram", "--grid", '{"bins": [4, 8]}', "--repeats", "1",
                               "--workload-count", "50", "--out", str(tmp_path))])
    assert code == 0
    res = json.loads((tmp_path / "tuning.json").read_text())
    assert res["best_params"]["bins"] in (4, 8) and len(res["points"]) == 2


def test_tune_half_rejected(data):
    assert main(["tune", *args(data, "--synth", "half")]) == 2
