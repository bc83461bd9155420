"""Counter-based random streams.

Every random draw in the toolkit flows through :func:`substream`, which keys
a Philox generator on ``(seed, stream)``.  Philox is counter-based, so the
same pair yields the same draws on any platform and substreams never
overlap, which is what makes per-epoch generation order-independent.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]

_U64_MAX = 2**64 - 1


def substream(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a Generator for the given (seed, stream) pair.

    Parameters
    ----------
    seed : int
        64-bit base seed shared by all streams of one run.
    stream : int
        Substream index (e.g. an epoch number); 0 is the default stream.
    """
    seed = int(seed)
    stream = int(stream)
    if not 0 <= seed <= _U64_MAX:
        raise ValueError(f"seed must be in [0, 2**64): got {seed}")
    if not 0 <= stream <= _U64_MAX:
        raise ValueError(f"stream must be in [0, 2**64): got {stream}")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
