from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

from ..dataset import Schema, Table

KINDS = ("half", "histogram", "self_copy", "memorizing", "external", "constant")
_ALIASES = {"self": "self_copy"}


@dataclass(frozen=True)
class SynthesizerSpec:
    """What to train: a kind, its hyperparameters and an optional DP budget.

    Hyperparameters by kind: ``histogram`` takes ``bins``; ``memorizing``
    takes ``jitter_sigma`` and ``duplication_ratio``; ``external`` takes ``command`` (string or argv
    list) plus optional ``workdir``, ``timeout`` and free-form entries that
    are forwarded to the external process.
    """

    kind: str
    hyperparameters: dict = field(default_factory=dict)
    epsilon: float | None = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown synthesizer kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))
        if self.epsilon is not None:
            if kind != "histogram":
                raise ValueError("epsilon is only supported by the histogram synthesizer")
            if not (self.epsilon > 0):
                raise ValueError("epsilon must be positive")
            if math.isinf(self.epsilon):
                object.__setattr__(self, "epsilon", None)

    def with_params(self, **params) -> "SynthesizerSpec":
        hp = dict(self.hyperparameters)
        eps = params.pop("epsilon", self.epsilon)
        hp.update(params)
        return SynthesizerSpec(self.kind, hp, eps)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": self.hyperparameters, "epsilon": self.epsilon}


class TrainedSynthesizer(abc.ABC):
    """A fitted generator. ``sample(n, seed)`` must be deterministic in ``(n, seed)``."""

    def __init__(self, schema: Schema, provenance: dict | None = None):
        self.schema = schema
        self.provenance = dict(provenance or {})

    @abc.abstractmethod
    def sample(self, n: int, seed: int) -> Table:
        ...

    def __repr__(self):
        return f"{type(self).__name__}({self.provenance.get('spec', {})})"
