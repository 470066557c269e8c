"""Counter-based random streams.

All randomness in a run comes from Philox generators keyed by the run seed,
so a stream can be recreated from (seed, stream id) alone.
"""

from typing import Optional, Union

import numpy as np

Seed = Union[int, np.random.Generator, None]

# stream ids keep independent consumers from sharing a counter
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_DROPOUT = 3
STREAM_SPLIT = 4
STREAM_TSNE = 5
STREAM_SUBSAMPLE = 6


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & 0xFFFFFFFFFFFFFFFF, stream]))


def ensure_rng(seed: Seed, stream: int = 0) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return philox(0 if seed is None else seed, stream)


def derived_seed(seed: int, index: int) -> int:
    """Per-item seed for parallel work (seed xor item index)."""
    return (int(seed) ^ int(index)) & 0xFFFFFFFF


def file_rng(seed: int, index: int, stream: Optional[int] = None) -> np.random.Generator:
    return philox(derived_seed(seed, index), 0 if stream is None else stream)
