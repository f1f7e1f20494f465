"""Exhaustive enumeration over all 2^N spin configurations.

Independent of the combinatorial sums in ``exact``: it only uses the
configuration-level energy functions, so it is the reference the exact tables
are checked against at small N.
"""

import numpy as np

from .models import ModelSpec, energy

MAX_N = 20


def all_configs(N: int) -> np.ndarray:
    """All 2^N configurations as a (2^N, N) int8 array of +-1."""
    if N > MAX_N:
        raise ValueError(f"enumeration limited to N <= {MAX_N}")
    bits = (np.arange(2 ** N)[:, None] >> np.arange(N)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def brute_force_prob(spec: ModelSpec) -> np.ndarray:
    """Gibbs law of the block plus-counts by direct summation of exp(-H)."""
    configs = all_configs(spec.N)
    neg_e = -np.asarray(energy(spec, configs), dtype=np.float64)
    w = np.exp(neg_e - neg_e.max())
    shape = tuple(s + 1 for s in spec.sizes)
    counts = []
    start = 0
    for s in spec.sizes:
        counts.append((configs[:, start:start + s] > 0).sum(axis=1))
        start += s
    flat = np.ravel_multi_index(tuple(counts), shape)
    prob = np.bincount(flat, weights=w, minlength=int(np.prod(shape)))
    return (prob / prob.sum()).reshape(shape)
