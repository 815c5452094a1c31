"""Named RNG substreams derived from one root seed."""

from __future__ import annotations

import hashlib

import numpy as np

STREAMS = ("placement", "signatures", "activity", "channels", "noise", "trial", "pairs", "coordinate_order")


def _stream_key(name: str) -> int:
    return int(hashlib.sha256(name.encode("utf-8")).hexdigest()[:8], 16)


def substream(seed: int, name: str, *index: int) -> np.random.Generator:
    """
    Independent generator for (seed, name, *index).

    Each draw class gets its own stream, so drawing more placements never shifts
    the signatures or the noise.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_stream_key(name), *index))
    return np.random.default_rng(ss)


def derive_seed(seed: int, name: str, *index: int) -> int:
    """64-bit child seed, used to give each Monte-Carlo trial its own scenario."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_stream_key(name), *index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
