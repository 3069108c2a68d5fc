"""``tabsyn-assess`` command line.

Subcommands: schema, split, synth, eval, tune, report. Options can also come
from a JSON file given with ``--config``; flags on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import Schema, infer_schema, load_table
from .report import (
    BASELINES, METRICS, SYNTHS, RunConfig, format_traceback, rank_reports, report_json, run_evaluation,
    run_split, synth_spec, write_report,
)
from .synth import train_synthesizer
from .utility import tune_suite
from .tuning import GridSpace, TuningConfig, grid_search, integer_grid

log = logging.getLogger("tabsyn_assess")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3


def _csv_list(choices):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        bad = [t for t in items if t not in choices]
        if bad:
            raise argparse.ArgumentTypeError(f"invalid choice(s) {bad}; choose from {list(choices)}")
        return items
    return parse


def _add_data(p, schema_required=True):
    p.add_argument("--data", help="input CSV")
    p.add_argument("--schema", help="schema JSON" + ("" if schema_required else " (inferred when absent)"))
    p.add_argument("--target", help="target attribute (schema inference)")
    p.add_argument("--task", help="task override (schema inference)")


def _add_synth(p):
    p.add_argument("--synth", choices=SYNTHS)
    p.add_argument("--epsilon", type=float, help="DP budget for the histogram synthesizer")
    p.add_argument("--bins", type=int, help="histogram bins")
    p.add_argument("--jitter-sigma", type=float, dest="jitter_sigma", help="memorizing synthesizer jitter")
    p.add_argument("--command", help="external synthesizer command")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabsyn-assess", description="Evaluate tabular data synthesizers.")
    parser.add_argument("--config", help="JSON file with default option values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command_name", required=True)

    p = sub.add_parser("schema", help="infer a schema from a CSV")
    _add_data(p, schema_required=False)
    p.add_argument("--categorical-threshold", type=int, default=None)
    p.add_argument("--out", help="schema JSON path (stdout when absent)")

    p = sub.add_parser("split", help="write train/validation/test CSVs")
    _add_data(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("synth", help="train a synthesizer and write a synthetic CSV")
    _add_data(p)
    _add_synth(p)
    p.add_argument("--n", type=int, help="rows to sample (default: input size)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="synthetic CSV path")

    p = sub.add_parser("eval", help="evaluate a synthesizer over repeated seeds")
    _add_data(p)
    _add_synth(p)
    p.add_argument("--metrics", type=_csv_list(METRICS), help="comma list of " + ",".join(METRICS))
    p.add_argument("--split", choices=("train", "test"), help="fidelity reference: training or test data")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--max-order", type=int, dest="max_order")
    p.add_argument("--mds-m", type=int, dest="mds_m")
    p.add_argument("--mds-n", type=int, dest="mds_n")
    p.add_argument("--mds-record-cap", type=int, dest="mds_record_cap")
    p.add_argument("--workload-k", type=int, dest="workload_k")
    p.add_argument("--workload-count", type=int, dest="workload_count")
    p.add_argument("--baselines", type=_csv_list(BASELINES), help="comma list of " + ",".join(BASELINES))
    p.add_argument("--tune-evaluators", dest="tune_evaluators", action="store_const", const=True,
                   help="pick MLA evaluator parameters on the validation split")

    p = sub.add_parser("tune", help="grid search on the validation split")
    _add_data(p)
    _add_synth(p)
    p.add_argument("--grid", help='JSON object of value lists, e.g. {"bins": [5, 10, 15, 20]}')
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--max-order", type=int, dest="max_order")
    p.add_argument("--workload-k", type=int, dest="workload_k")
    p.add_argument("--workload-count", type=int, dest="workload_count")
    for k in (1, 2, 3):
        p.add_argument(f"--alpha{k}", type=float)
    p.add_argument("--tune-evaluators", dest="tune_evaluators", action="store_const", const=True,
                   help="pick MLA evaluator parameters on the validation split")

    p = sub.add_parser("report", help="merge evaluation reports into a rank table")
    p.add_argument("reports", nargs="+", help="report JSON files")
    p.add_argument("--labels", help="comma list naming each report's synthesizer")
    p.add_argument("--out", help="output directory (stdout when absent)")
    # --config and -v are also accepted after the subcommand
    for p in sub.choices.values():
        p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with default option values")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return parser


def merged_options(args: argparse.Namespace) -> dict:
    """Config-file values overridden by flags that were given."""
    opts = {}
    if args.config:
        opts.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    opts.update({k: v for k, v in vars(args).items() if v is not None})
    for key in ("config", "verbose", "command_name"):
        opts.pop(key, None)
    return opts


def load_input(opts: dict):
    if not opts.get("data"):
        raise ValueError("--data is required")
    if opts.get("schema"):
        schema = Schema.load(opts["schema"])
    elif opts.get("target"):
        schema = infer_schema(opts["data"], opts["target"], task=opts.get("task"))
        log.info("schema inferred from %s", opts["data"])
    else:
        raise ValueError("either --schema or --target is required")
    return load_table(opts["data"], schema)


def cmd_schema(opts) -> int:
    if not opts.get("data") or not opts.get("target"):
        raise ValueError("schema needs --data and --target")
    kw = {}
    if opts.get("categorical_threshold") is not None:
        kw["categorical_threshold"] = opts["categorical_threshold"]
    schema = infer_schema(opts["data"], opts["target"], task=opts.get("task"), **kw)
    text = json.dumps(schema.to_dict(), indent=2) + "\n"
    if opts.get("out"):
        Path(opts["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_split(opts) -> int:
    table = load_input(opts)
    parts = run_split(table, int(opts.get("seed", 0)))
    out = Path(opts.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "validation", "test"):
        getattr(parts, name).to_csv(out / f"{name}.csv")
    table.schema.save(out / "schema.json")
    return EXIT_OK


def _spec_from(opts):
    kind = opts.get("synth", "histogram")
    if kind == "half":
        raise ValueError("half is an evaluation baseline, not a trainable synthesizer")
    return synth_spec(kind, epsilon=opts.get("epsilon"), bins=opts.get("bins"),
                      jitter_sigma=opts.get("jitter_sigma"), command=opts.get("command"))


def cmd_synth(opts) -> int:
    table = load_input(opts)
    seed = int(opts.get("seed", 0))
    synth = train_synthesizer(_spec_from(opts), table, seed)
    out = synth.sample(int(opts.get("n") or len(table)), seed + 1)
    if not opts.get("out"):
        raise ValueError("--out is required")
    out.to_csv(opts["out"])
    return EXIT_OK


_RUN_FIELDS = set(RunConfig.__dataclass_fields__)


def cmd_eval(opts) -> int:
    table = load_input(opts)
    cfg = RunConfig(**{k: v for k, v in opts.items() if k in _RUN_FIELDS})
    report = run_evaluation(table, cfg)
    if cfg.out:
        paths = write_report(report, cfg.out)
        log.info("wrote %s and %s", *paths)
    else:
        sys.stdout.write(report_json(report))
    if report["partial_failure"]:
        log.warning("%d metric evaluations failed; see the report", report["failure_count"])
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_tune(opts) -> int:
    table = load_input(opts)
    spec = _spec_from(opts)
    if opts.get("grid"):
        axes = json.loads(opts["grid"]) if isinstance(opts["grid"], str) else dict(opts["grid"])
    elif spec.kind == "histogram":
        axes = {"bins": integer_grid(5, 20, 4)}
    elif spec.kind == "memorizing":
        axes = {"jitter_sigma": [0.0, 0.01, 0.05, 0.1]}
    else:
        raise ValueError("--grid is required for this synthesizer")
    cfg = TuningConfig(
        alpha1=opts.get("alpha1", 1 / 3), alpha2=opts.get("alpha2", 1 / 3), alpha3=opts.get("alpha3", 1 / 3),
        max_order=opts.get("max_order", 2), workload_k=min(opts.get("workload_k", 3), len(table.schema)),
        workload_count=opts.get("workload_count", 1000), repeats=opts.get("repeats", 3), jobs=opts.get("jobs", 1),
    )
    seed = int(opts.get("seed", 0))
    parts = run_split(table, seed)
    if opts.get("tune_evaluators"):
        cfg.suite = tune_suite(parts.train, parts.validation, seed)
    result = grid_search(spec, GridSpace(axes), parts, cfg, seed)
    text = result.to_json() + "\n"
    if opts.get("out"):
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "tuning.json").write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(opts) -> int:
    reports = [json.loads(Path(p).read_text(encoding="utf-8")) for p in opts["reports"]]
    labels = opts.get("labels")
    if isinstance(labels, str):
        labels = [s.strip() for s in labels.split(",")]
    if labels and len(labels) != len(reports):
        raise ValueError("--labels must name every report")
    table = rank_reports(reports, labels)
    if opts.get("out"):
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "ranking.json").write_text(json.dumps(table.to_dict(), indent=2) + "\n", encoding="utf-8")
        (out / "ranking.csv").write_text(table.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(table.to_csv())
    return EXIT_OK


COMMANDS = {"schema": cmd_schema, "split": cmd_split, "synth": cmd_synth,
            "eval": cmd_eval, "tune": cmd_tune, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        opts = merged_options(args)
        return COMMANDS[args.command_name](opts)
    except (ValueError, FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        print(f"tabsyn-assess: error: {format_traceback(exc)}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ValueError) else EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
