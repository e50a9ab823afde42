"""Keyed random substreams for reproducible parallel work.

Every stochastic component draws from a counter-based Philox generator whose
key is a hash of a seed plus a tag path, e.g. ``(seed, cell_id, rep)``. The
resulting stream depends only on the tag, never on worker scheduling, so
results are bit-identical for any worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(*parts) -> np.random.Generator:
    """Return a Generator keyed by the hash of the tag tuple ``parts``."""
    tag = "|".join(repr(p) for p in parts)
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))
