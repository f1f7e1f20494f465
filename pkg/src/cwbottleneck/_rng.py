"""Counter-based random streams.

Every consumer draws from a Philox generator keyed by ``(seed, stream)``. The
stream index is the spawn key of the seed sequence, so stream ``i`` of seed ``s``
is the same bit stream no matter how many other streams exist or which thread
consumes it.
"""

import numpy as np

# stream ids reserved for the mask and conditional-uniform draws
MASK_STREAM = 0
CONFIG_STREAM = 1
CHAIN_STREAM = 2


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for ``(seed, *stream)``; the stream tuple is the spawn key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream) or (0,))
    return np.random.Generator(np.random.Philox(ss))


def bernoulli_mask(length: int, p: float, seed: int) -> np.ndarray:
    """iid Bernoulli(p) bits of the given length, as int8."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    rng = make_rng(seed, MASK_STREAM)
    return (rng.random(length) < p).astype(np.int8)
