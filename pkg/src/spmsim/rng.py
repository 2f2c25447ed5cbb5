"""Counter-based random streams.

All randomness in the package flows from one integer seed through named
streams.  A stream is addressed by (seed, purpose, path_index, step_index)
and is realized as a Philox generator with key (seed, crc32(purpose)) and
counter (path_index, step_index).  Identical addresses give identical
output regardless of call order, which is what makes ensembles
reproducible and lambda-coupled runs share their driving noise.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream"]


def _purpose_code(purpose: str) -> int:
    # crc32 is stable across processes, unlike hash() under PYTHONHASHSEED.
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, path_index: int = 0, step_index: int = 0) -> np.random.Generator:
    """Return the generator addressed by (seed, purpose, path_index, step_index)."""
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    if path_index < 0 or step_index < 0:
        raise ValueError("path_index and step_index must be nonnegative")
    key = np.array([seed, _purpose_code(purpose)], dtype=np.uint64)
    counter = np.array([path_index, step_index, 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
