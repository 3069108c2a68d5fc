"""Seed derivation shared by the tuning loop and the CLI runner."""

import numpy as np


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 31-bit seed for ``(master, *path)``; independent streams for distinct paths."""
    return int(np.random.SeedSequence([int(master), *map(int, path)]).generate_state(1)[0] >> 1)
