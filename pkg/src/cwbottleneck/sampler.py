"""Single-spin-flip MCMC for the bottleneck models, plus the auxiliary samplers
used by the concentration checks (dilution masks, conditional-uniform
configurations).

All three models are run through one kernel that understands

    H = -sum_k (J_k / 2) s_k^2 - sum_{k<l} K_kl s_k s_l - sum_pairs w_i sigma_i sigma_partner(i)

with s_k the spin sum of block k. Flipping sigma_i in block k changes it by

    dH = 2 J_k (sigma_i s_k - 1) + 2 sigma_i sum_l K_kl s_l + 2 w_i sigma_i sigma_partner(i)

so every proposal costs O(1) given the running block sums.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numba
import numpy as np

from ._rng import CHAIN_STREAM, CONFIG_STREAM, bernoulli_mask, make_rng
from .exact import LogWeightTable
from .models import (
    DilutedSpec,
    MagnetizationPoint,
    ModelSpec,
    SpecError,
    SpinConfig,
    ThreeBlockSpec,
    TwoBlockSpec,
    energy,
)

GLAUBER = 0
METROPOLIS = 1
_DYNAMICS = {"glauber": GLAUBER, "metropolis": METROPOLIS}

# proposals generated per batch of random numbers
_CHUNK_FLIPS = 1 << 20


@dataclass(frozen=True)
class ChainConfig:
    seed: int
    sweeps: int
    burn_in: int = 0
    thin: int = 1
    dynamics: str = "glauber"
    chain_index: int = 0

    def __post_init__(self):
        if not self.sweeps > self.burn_in >= 0:
            raise ValueError("need sweeps > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.dynamics not in _DYNAMICS:
            raise ValueError(f"dynamics must be one of {sorted(_DYNAMICS)}")

    @property
    def n_samples(self) -> int:
        return (self.sweeps - self.burn_in) // self.thin


@dataclass
class Trajectory:
    plus_counts: np.ndarray  # (T, n_blocks)
    sizes: tuple[int, ...]
    acceptance_rate: float | None = None

    def __len__(self):
        return len(self.plus_counts)

    @property
    def samples(self) -> list[MagnetizationPoint]:
        return [MagnetizationPoint(tuple(row), self.sizes) for row in self.plus_counts]

    @property
    def m(self) -> np.ndarray:
        return 2.0 * self.plus_counts / np.asarray(self.sizes) - 1.0

    def histogram(self) -> np.ndarray:
        """Empirical probability array indexed by plus-counts."""
        hist = np.zeros(tuple(s + 1 for s in self.sizes))
        np.add.at(hist, tuple(self.plus_counts.T), 1.0)
        return hist / max(1, len(self))

    def to_csv(self, target=None, burn_in: int = 0, thin: int = 1) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sweep"] + [f"k{j + 1}" for j in range(len(self.sizes))])
        for t, row in enumerate(self.plus_counts):
            w.writerow([burn_in + (t + 1) * thin] + [int(k) for k in row])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class ChainModel:
    """Coefficient arrays of the generic block Hamiltonian for one spec."""

    block_of: np.ndarray
    sizes: np.ndarray
    J: np.ndarray
    K: np.ndarray
    partner: np.ndarray
    w: np.ndarray

    @property
    def N(self) -> int:
        return self.block_of.size


def _pair_weights(alpha: float, mask: np.ndarray) -> np.ndarray:
    return alpha * mask.astype(np.float64)


def chain_model(spec: ModelSpec, coupling_scale: float = 1.0) -> ChainModel:
    if isinstance(spec, (TwoBlockSpec, DilutedSpec)):
        N, L = spec.N, spec.L
        mask = np.ones(L) if isinstance(spec, TwoBlockSpec) else np.asarray(spec.mask)
        block_of = np.repeat(np.arange(2), L).astype(np.int64)
        J = np.full(2, spec.beta / N)
        K = np.zeros((2, 2))
        partner = np.concatenate([np.arange(L, N), np.arange(L)]).astype(np.int64)
        wl = _pair_weights(spec.alpha, mask)
        w = np.concatenate([wl, wl])
    elif isinstance(spec, ThreeBlockSpec):
        n, b = spec.n_outer, spec.b
        block_of = np.repeat(np.arange(3), [n, b, n]).astype(np.int64)
        J = spec.beta / np.array([n, b, n], dtype=np.float64)
        k = spec.alpha / math.sqrt(n * b)
        K = np.array([[0.0, k, 0.0], [k, 0.0, k], [0.0, k, 0.0]])
        partner = np.full(spec.N, -1, dtype=np.int64)
        w = np.zeros(spec.N)
    else:
        raise TypeError(f"unknown model spec {type(spec).__name__}")
    sizes = np.asarray(spec.sizes, dtype=np.int64)
    c = float(coupling_scale)
    return ChainModel(block_of, sizes, J * c, K * c, partner, w * c)


@numba.njit(cache=True, nogil=True)
def _delta(i, spins, s, block_of, J, K, partner, w):
    k = block_of[i]
    si = spins[i]
    d = 2.0 * J[k] * (si * s[k] - 1.0)
    acc = 0.0
    for l in range(s.size):
        acc += K[k, l] * s[l]
    d += 2.0 * si * acc
    p = partner[i]
    if p >= 0:
        d += 2.0 * w[i] * si * spins[p]
    return d


@numba.njit(cache=True, nogil=True)
def _run_sweeps(spins, s, block_of, sizes, J, K, partner, w, sites, u, dynamics,
                first_sweep, n_sweeps, burn_in, thin, out):
    N = spins.size
    accepted = 0
    for t in range(n_sweeps):
        base = t * N
        for r in range(N):
            i = sites[base + r]
            d = _delta(i, spins, s, block_of, J, K, partner, w)
            if dynamics == 0:
                flip = u[base + r] < 1.0 / (1.0 + math.exp(d))
            else:
                flip = d <= 0.0 or u[base + r] < math.exp(-d)
            if flip:
                s[block_of[i]] -= 2 * spins[i]
                spins[i] = -spins[i]
                accepted += 1
        sweep = first_sweep + t + 1
        if sweep > burn_in and (sweep - burn_in) % thin == 0:
            row = (sweep - burn_in) // thin - 1
            if row < out.shape[0]:
                for k in range(s.size):
                    out[row, k] = (s[k] + sizes[k]) // 2
    return accepted


def delta_energy(spec: ModelSpec, spins, site: int, coupling_scale: float = 1.0) -> float:
    """Energy change of flipping ``site``, as computed inside the chain."""
    cm = chain_model(spec, coupling_scale)
    spins = np.asarray(spins.spins if isinstance(spins, SpinConfig) else spins, dtype=np.int64)
    s = np.array([spins[cm.block_of == k].sum() for k in range(len(cm.sizes))], dtype=np.int64)
    return float(_delta(int(site), spins, s, cm.block_of, cm.J, cm.K, cm.partner, cm.w))


def log_flip_probability(dH: float, dynamics: str = "glauber") -> float:
    if dynamics == "glauber":
        return -float(np.logaddexp(0.0, dH))
    if dynamics == "metropolis":
        return min(0.0, -dH)
    raise ValueError(f"unknown dynamics {dynamics!r}")


def detailed_balance_residual(spec: ModelSpec, spins, site: int, dynamics: str = "glauber") -> float:
    """| log pi(s) P(s -> s') - log pi(s') P(s' -> s) | with pi ~ exp(-H) from the model energy.

    The uniform site-selection factor 1/N appears on both sides and is dropped.
    """
    spins = np.asarray(spins.spins if isinstance(spins, SpinConfig) else spins, dtype=np.int64)
    flipped = spins.copy()
    flipped[site] = -flipped[site]
    fwd = -energy(spec, spins) + log_flip_probability(delta_energy(spec, spins, site), dynamics)
    bwd = -energy(spec, flipped) + log_flip_probability(delta_energy(spec, flipped, site), dynamics)
    return abs(fwd - bwd)


def run_chain(spec: ModelSpec, chain: ChainConfig, coupling_scale: float = 1.0,
              init=None) -> Trajectory:
    """Run one chain; a sweep is N proposals at uniformly random sites.

    The initial state is ``init`` (spin array or SpinConfig) or uniform random.
    Identical (spec, chain, coupling_scale, init) give identical trajectories.
    """
    cm = chain_model(spec, coupling_scale)
    N = cm.N
    rng = make_rng(chain.seed, CHAIN_STREAM, chain.chain_index)
    if init is None:
        spins = np.where(rng.random(N) < 0.5, 1, -1).astype(np.int64)
    else:
        spins = np.array(init.spins if isinstance(init, SpinConfig) else init, dtype=np.int64)
        if spins.shape != (N,) or not np.all(np.abs(spins) == 1):
            raise SpecError("init must be a +-1 vector of length N")
    s = np.array([spins[cm.block_of == k].sum() for k in range(len(cm.sizes))], dtype=np.int64)
    out = np.zeros((chain.n_samples, len(cm.sizes)), dtype=np.int64)
    dyn = _DYNAMICS[chain.dynamics]
    per_chunk = max(1, _CHUNK_FLIPS // N)
    accepted = 0
    done = 0
    while done < chain.sweeps:
        n = min(per_chunk, chain.sweeps - done)
        sites = rng.integers(0, N, size=n * N)
        u = rng.random(n * N)
        accepted += _run_sweeps(spins, s, cm.block_of, cm.sizes, cm.J, cm.K, cm.partner,
                                cm.w, sites, u, dyn, done, n, chain.burn_in, chain.thin, out)
        done += n
    rate = accepted / (chain.sweeps * N) if chain.dynamics == "metropolis" else None
    return Trajectory(out, tuple(int(x) for x in cm.sizes), rate)


def tv_to_table(traj: Trajectory, table: LogWeightTable) -> float:
    """Total variation distance between the empirical histogram and an exact table."""
    if traj.sizes != table.sizes:
        raise ValueError("trajectory and table sizes differ")
    return 0.5 * float(np.abs(traj.histogram() - table.prob).sum())


# --- auxiliary samplers ----------------------------------------------------

@dataclass(frozen=True)
class MaskSample:
    mask: np.ndarray
    M: int
    expected: float
    deviation: float


def sample_mask(N: int, p: float, seed: int) -> MaskSample:
    """iid Bernoulli(p) dilution mask over the N/2 matching edges."""
    L = N // 2
    mask = bernoulli_mask(L, p, seed)
    M = int(mask.sum())
    return MaskSample(mask, M, L * p, abs(M - L * p))


def conditional_uniform_batch(N: int, mu1: float, mu2: float, size: int, seed: int) -> np.ndarray:
    """``size`` independent uniform configurations with block magnetizations (mu1, mu2).

    Returns an int8 array of shape (size, N).
    """
    L = N // 2
    a, b = MagnetizationPoint.from_m((mu1, mu2), (L, L)).plus_counts
    rng = make_rng(seed, CONFIG_STREAM)
    b1 = np.tile(np.where(np.arange(L) < a, 1, -1).astype(np.int8), (size, 1))
    b2 = np.tile(np.where(np.arange(L) < b, 1, -1).astype(np.int8), (size, 1))
    return np.concatenate([rng.permuted(b1, axis=1), rng.permuted(b2, axis=1)], axis=1)


def sample_conditional_uniform(N: int, mu1: float, mu2: float, seed: int) -> SpinConfig:
    return SpinConfig(conditional_uniform_batch(N, mu1, mu2, 1, seed)[0], (N // 2, N // 2))


@dataclass
class ThinnedReport:
    N: int
    p: float
    stats: np.ndarray
    discarded: int
    eps: float

    @property
    def mean(self) -> float:
        return float(self.stats.mean()) if self.stats.size else math.nan

    @property
    def tail_frequency(self) -> float:
        if not self.stats.size:
            return math.nan
        return float(np.mean(np.abs(self.stats) > self.eps))


def thinned_cross_term_check(N: int, mu1: float, mu2: float, p: float, seeds,
                             eps: float = 0.05) -> ThinnedReport:
    """Per seed: draw a mask and a conditional-uniform configuration, then record
    (1/M) sum over retained edges of sigma_i sigma_{i+N/2}, minus mu1 mu2.

    Draws with M = 0 are discarded and counted.
    """
    L = N // 2
    stats = []
    discarded = 0
    for seed in seeds:
        mask = bernoulli_mask(L, p, seed).astype(bool)
        M = int(mask.sum())
        if M == 0:
            discarded += 1
            continue
        spins = conditional_uniform_batch(N, mu1, mu2, 1, seed)[0].astype(np.int64)
        prod = spins[:L] * spins[L:]
        stats.append(prod[mask].sum() / M - mu1 * mu2)
    return ThinnedReport(N, p, np.asarray(stats, dtype=np.float64), discarded, eps)
