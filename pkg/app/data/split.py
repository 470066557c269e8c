from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from app.exceptions import ConfigError
from app.tensor.random import STREAM_SPLIT, philox

T = TypeVar("T")


def stratified_split(
    entries: Sequence[T],
    fraction: float,
    seed: int,
    key: Optional[Callable[[T], Hashable]] = None,
) -> Tuple[List[T], List[T]]:
    """Hold out ``round(fraction * n_c)`` entries of every class c.

    ``key`` maps an entry to its class (the entry itself by default). Classes
    are visited in sorted order with one seeded generator, and both parts keep
    the original entry order.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must be in (0, 1), got {fraction}")
    key = key or (lambda e: e)
    by_class: Dict[Hashable, List[int]] = {}
    for i, entry in enumerate(entries):
        by_class.setdefault(key(entry), []).append(i)

    rng = philox(seed, STREAM_SPLIT)
    held_out = set()
    for label in sorted(by_class, key=str):
        members = by_class[label]
        n_val = min(int(round(fraction * len(members))), len(members) - 1)
        if n_val <= 0:
            continue
        picked = rng.permutation(len(members))[:n_val]
        held_out.update(members[j] for j in picked)

    train = [e for i, e in enumerate(entries) if i not in held_out]
    val = [e for i, e in enumerate(entries) if i in held_out]
    return train, val
