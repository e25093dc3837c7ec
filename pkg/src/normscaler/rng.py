"""Deterministic randomness for instance generation and experiments.

All sampling goes through numpy's Philox bit generator, a counter-based
64-bit generator; Gaussian variates come from ``Generator.standard_normal``
(ziggurat method).  Both choices are fixed here so that one seed reproduces
an instance bit-identically within this implementation.

Stream splitting: trial ``t`` of experiment ``e`` uses
``seed = base_seed XOR split_key(e, t)`` where ``split_key`` is the first
8 bytes of BLAKE2b over the pair.  Distinct (experiment, trial) labels get
statistically independent streams without any global coordination, and the
mapping is stable across processes and platforms (unlike builtin ``hash``).
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def split_key(experiment: str, trial: int) -> int:
    """Stable 64-bit key for an (experiment, trial) pair."""
    digest = hashlib.blake2b(f"{experiment}\x1f{trial}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def derive_seed(base_seed: int, experiment: str, trial: int) -> int:
    return (int(base_seed) ^ split_key(experiment, trial)) & _MASK64


def generator(seed: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
