"""Adapter for synthesizers that live in another process.

Training runs::

    <command> --train TRAIN.csv --schema SCHEMA.json --model-out MODEL_DIR
              --seed SEED --hyperparams HP.json

and sampling runs::

    <command> --model MODEL_DIR --n N --seed SEED --out OUT.csv

Each call is a fresh process; the model directory is opaque to us.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import tempfile
import threading
import uuid
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from ..dataset import Table
from .base import SynthesizerSpec, TrainedSynthesizer

DEFAULT_TIMEOUT = 3600.0
TMP_ENV = "TABSYN_ASSESS_TMP"

_dir_locks: dict[str, threading.Lock] = {}
_dir_locks_guard = threading.Lock()


class ExternalSynthesizerError(RuntimeError):
    def __init__(self, message, stderr="", returncode=None):
        if stderr:
            message = f"{message}\n--- stderr ---\n{stderr.strip()}"
        super().__init__(message)
        self.stderr = stderr
        self.returncode = returncode


class MalformedOutputError(ExternalSynthesizerError):
    pass


def _lock_for(path: Path) -> threading.Lock:
    key = str(path.resolve())
    with _dir_locks_guard:
        return _dir_locks.setdefault(key, threading.Lock())


def _scratch_root(spec: SynthesizerSpec) -> Path:
    root = spec.hyperparameters.get("workdir") or os.environ.get(TMP_ENV)
    if root:
        Path(root).mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix="extsynth-", dir=root))


def _argv(command) -> list[str]:
    return shlex.split(command) if isinstance(command, str) else [str(c) for c in command]


def _run(argv, timeout, cwd, what):
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, cwd=cwd)
    except subprocess.TimeoutExpired as exc:
        stderr = exc.stderr.decode(errors="replace") if isinstance(exc.stderr, bytes) else (exc.stderr or "")
        raise ExternalSynthesizerError(f"{what} timed out after {timeout} s", stderr) from None
    except OSError as exc:
        raise ExternalSynthesizerError(f"{what} could not start: {exc}") from None
    if proc.returncode != 0:
        raise ExternalSynthesizerError(f"{what} exited with status {proc.returncode}", proc.stderr, proc.returncode)
    return proc


def read_output_csv(path: Path, schema) -> tuple[Table, int]:
    """Parse a synthesizer's CSV against the schema kinds.

    Returns the table and the number of numerical cells outside their domain
    (kept as-is, not clipped).
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, FileNotFoundError) as exc:
        raise MalformedOutputError(f"unreadable output {path}: {exc}") from None
    if frame.shape[1] != len(schema) or sorted(frame.columns) != sorted(schema.names):
        raise MalformedOutputError(
            f"output columns {list(frame.columns)} do not match schema {schema.names}"
        )
    if len(frame) == 0:
        raise MalformedOutputError("output has no rows")
    cols = {}
    violations = 0
    for attr in schema.attributes:
        raw = frame[attr.name]
        if attr.is_numerical:
            # float() round-trips %.17g exactly; pandas' fast parser does not
            vals = np.array([_parse_float(t) for t in raw], dtype=np.float64)
            bad = np.flatnonzero(~np.isfinite(vals))
            if bad.size:
                r = int(bad[0])
                raise MalformedOutputError(f"row {r + 1}, column {attr.name!r}: {raw.iloc[r]!r} is not a number")
            lo, hi = attr.domain
            violations += int(np.sum((vals < lo) | (vals > hi)))
            cols[attr.name] = vals
        else:
            lookup = {lab: k for k, lab in enumerate(attr.domain)}
            codes = raw.str.strip().map(lookup)
            if codes.isna().any():
                r = int(np.flatnonzero(codes.isna().to_numpy())[0])
                raise MalformedOutputError(
                    f"row {r + 1}, column {attr.name!r}: unknown category {raw.iloc[r]!r}"
                )
            cols[attr.name] = codes.to_numpy(dtype=np.int64)
    return Table(schema, cols, check_domain=False), violations


def _parse_float(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        return np.nan


class ExternalSynthesizer(TrainedSynthesizer):
    def __init__(self, schema, command, model_dir: Path, scratch: Path, timeout: float, provenance=None):
        super().__init__(schema, provenance)
        self.command = command
        self.model_dir = Path(model_dir)
        self.scratch = Path(scratch)
        self.timeout = timeout
        self.domain_violations = 0

    def sample(self, n: int, seed: int) -> Table:
        out = self.scratch / f"sample-{int(seed)}-{int(n)}-{uuid.uuid4().hex[:8]}.csv"
        argv = _argv(self.command) + [
            "--model", str(self.model_dir), "--n", str(int(n)), "--seed", str(int(seed)), "--out", str(out),
        ]
        # one process at a time per model directory
        with _lock_for(self.model_dir):
            _run(argv, self.timeout, self.scratch, "sampling")
        table, violations = read_output_csv(out, self.schema)
        out.unlink(missing_ok=True)
        if violations:
            self.domain_violations += violations
            warnings.warn(f"external synthesizer emitted {violations} out-of-domain values", RuntimeWarning)
        return table


def external_synthesizer(spec: SynthesizerSpec, train: Table, seed: int = 0) -> ExternalSynthesizer:
    """Train an external synthesizer on ``train`` through the file protocol."""
    hp = dict(spec.hyperparameters)
    command = hp.pop("command", None)
    if not command:
        raise ValueError("external synthesizer needs a 'command' hyperparameter")
    timeout = float(hp.pop("timeout", DEFAULT_TIMEOUT))
    hp.pop("workdir", None)
    scratch = _scratch_root(spec)
    train_csv = scratch / "train.csv"
    schema_json = scratch / "schema.json"
    hp_json = scratch / "hyperparams.json"
    model_dir = scratch / "model"
    model_dir.mkdir()
    train.to_csv(train_csv)
    train.schema.save(schema_json)
    hp_json.write_text(json.dumps(hp, sort_keys=True), encoding="utf-8")
    argv = _argv(command) + [
        "--train", str(train_csv), "--schema", str(schema_json), "--model-out", str(model_dir),
        "--seed", str(int(seed)), "--hyperparams", str(hp_json),
    ]
    _run(argv, timeout, scratch, "training")
    provenance = {
        "spec": spec.to_dict(),
        "seed": int(seed),
        "train_rows": len(train),
        "train_fingerprint": train.fingerprint(),
        "model_dir": str(model_dir),
    }
    return ExternalSynthesizer(train.schema, command, model_dir, scratch, timeout, provenance)
