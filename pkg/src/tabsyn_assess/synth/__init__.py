"""Synthesizer contract, baselines and the external-process adapter."""

from ..dataset import Table
from .base import KINDS, SynthesizerSpec, TrainedSynthesizer
from .baselines import (
    ConstantSynthesizer,
    HistogramSynthesizer,
    MemorizingSynthesizer,
    SelfCopySynthesizer,
    duplicate_rows,
    half_baseline,
    memorizing_synthesizer,
    self_baseline,
    train_histogram,
)
from .external import (
    ExternalSynthesizer,
    ExternalSynthesizerError,
    MalformedOutputError,
    external_synthesizer,
)

DEFAULT_BINS = 10


def train_synthesizer(spec: SynthesizerSpec, train: Table, seed: int = 0) -> TrainedSynthesizer:
    """Fit the synthesizer described by ``spec`` on ``train``."""
    hp = spec.hyperparameters
    if spec.kind == "histogram":
        return train_histogram(train, int(hp.get("bins", DEFAULT_BINS)), spec.epsilon, seed)
    if spec.kind == "self_copy":
        return self_baseline(train, seed)
    if spec.kind == "memorizing":
        return memorizing_synthesizer(train, float(hp.get("jitter_sigma", 0.0)), seed,
                                      float(hp.get("duplication_ratio", 0.0)))
    if spec.kind == "constant":
        return ConstantSynthesizer(train.schema, {"spec": spec.to_dict(), "seed": int(seed)})
    if spec.kind == "external":
        return external_synthesizer(spec, train, seed)
    raise ValueError(f"{spec.kind!r} is not trainable (use half_baseline for the HALF split)")


__all__ = [
    "KINDS",
    "ConstantSynthesizer",
    "ExternalSynthesizer",
    "ExternalSynthesizerError",
    "HistogramSynthesizer",
    "MalformedOutputError",
    "MemorizingSynthesizer",
    "SelfCopySynthesizer",
    "SynthesizerSpec",
    "TrainedSynthesizer",
    "duplicate_rows",
    "external_synthesizer",
    "half_baseline",
    "memorizing_synthesizer",
    "self_baseline",
    "train_histogram",
    "train_synthesizer",
]
