"""Exact finite-N Gibbs laws of the block magnetizations.

All three models reduce to sums over integer plus-counts. The two matched
models additionally need the law of the number ``n`` of ++ matched pairs given
the block plus-counts ``(a, b)``::

    count(n) = C(N/2, n) C(N/2 - n, a - n) C(N/2 - a, b - n)

and on such configurations the cross term is fixed::

    S = n_{++} + n_{--} - n_{+-} - n_{-+} = 4n - 2a - 2b + N/2
      = 4n - N/2 - N (mu1 + mu2) / 2

since n_{+-} = a - n, n_{-+} = b - n and n_{--} = N/2 - a - b + n.

Every reduction is a log-sum-exp; probabilities appear only after
normalization.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import gammaln, logsumexp

from .models import (
    DilutedSpec,
    MagnetizationPoint,
    ModelSpec,
    SpecError,
    ThreeBlockSpec,
    TwoBlockSpec,
    spec_to_dict,
)


class BudgetExceeded(RuntimeError):
    pass


class WellOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class Budget:
    two_block_max_N: int = 2000
    # dense (n+1)^2 (b+1) table; 2e8 doubles is 1.6 GB
    three_block_max_entries: float = 2e8
    # ops of the factorized diluted sum: (M+1)^3 + (L+1)(M+1)^2 + (L+1)^2 (M+1)
    diluted_max_ops: float = 1e9


DEFAULT_BUDGET = Budget()

# --- log binomials -------------------------------------------------------

_TABLE_MAX = 8192
_lf = np.zeros(1)


def log_factorials(n: int) -> np.ndarray:
    """Cached table of log(k!) for k = 0..n (grown on demand)."""
    global _lf
    if n >= _lf.size:
        size = max(n + 1, 2 * _lf.size)
        _lf = gammaln(np.arange(1, size + 1, dtype=np.float64))
        _lf.setflags(write=False)
    return _lf[: n + 1]


def log_binomial(n: int, k: int) -> float:
    """log C(n, k).

    Small n uses the cached log-factorial table; above that the difference of
    three large log-factorials would lose digits, so the beta-function form is
    used instead.
    """
    if int(n) != n or int(k) != k or n < 0:
        raise ValueError(f"need integers n >= 0 and k, got n={n}, k={k}")
    n, k = int(n), int(k)
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    if k == 0 or k == n:
        return 0.0
    if n <= _TABLE_MAX:
        lf = log_factorials(n)
        return float(lf[n] - lf[k] - lf[n - k])
    # Stirling form with explicit remainders: every term is positive or small,
    # so the result keeps a few-ulp relative accuracy
    m = n - k
    return (0.5 * math.log(n / (_TWO_PI * k * m)) + k * math.log1p(m / k) + m * math.log1p(k / m)
            + _stirlerr(n) - _stirlerr(k) - _stirlerr(m))


_TWO_PI = 2.0 * math.pi


def _stirlerr(n: int) -> float:
    """log(n!) - [(n + 1/2) log n - n + log(2 pi)/2]."""
    if n <= 15:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - 0.5 * math.log(_TWO_PI)
    nn = float(n) * n
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    if n > 500:
        return (s0 - s1 / nn) / n
    if n > 80:
        return (s0 - (s1 - s2 / nn) / nn) / n
    if n > 35:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n


def _lbinom(n, k, lf: np.ndarray) -> np.ndarray:
    """Vectorized log C(n, k); -inf outside 0 <= k <= n."""
    n = np.asarray(n)
    k = np.asarray(k)
    n, k = np.broadcast_arrays(n, k)
    valid = (k >= 0) & (k <= n) & (n >= 0)
    nc = np.where(valid, n, 0)
    kc = np.where(valid, k, 0)
    out = lf[nc] - lf[kc] - lf[nc - kc]
    return np.where(valid, out, -np.inf)


def curie_weiss_log_law(size: int, beta: float) -> np.ndarray:
    """Normalized log-law of the plus-count of one Curie-Weiss block.

    Weight of plus-count k is C(size, k) exp(beta s^2 / (2 size)) with s = 2k - size.
    """
    lf = log_factorials(size)
    k = np.arange(size + 1)
    s = 2.0 * k - size
    logw = _lbinom(size, k, lf) + beta * s ** 2 / (2.0 * size)
    return logw - logsumexp(logw)


# --- tables --------------------------------------------------------------

@dataclass
class LogWeightTable:
    """Dense log-weight array indexed by block plus-counts."""

    sizes: tuple[int, ...]
    logw: np.ndarray
    log_partition: float = field(init=False)

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if self.logw.shape != tuple(s + 1 for s in self.sizes):
            raise ValueError(f"table shape {self.logw.shape} does not match sizes {self.sizes}")
        self.log_partition = float(logsumexp(self.logw))

    @property
    def log_prob(self) -> np.ndarray:
        return self.logw - self.log_partition

    @property
    def prob(self) -> np.ndarray:
        return np.exp(self.log_prob)

    def m_axes(self) -> list[np.ndarray]:
        return [2.0 * np.arange(s + 1) / s - 1.0 for s in self.sizes]

    def __getitem__(self, point: MagnetizationPoint) -> float:
        if point.sizes != self.sizes:
            raise SpecError(f"point sizes {point.sizes} do not match table {self.sizes}")
        return float(self.logw[point.plus_counts])

    def probability(self, point: MagnetizationPoint) -> float:
        return math.exp(self[point] - self.log_partition)

    def entries(self) -> Iterator[tuple[MagnetizationPoint, float]]:
        for idx in np.ndindex(self.logw.shape):
            yield MagnetizationPoint(idx, self.sizes), float(self.logw[idx])

    def marginal(self, axis: int) -> np.ndarray:
        """Probability vector of the plus-count of one block."""
        others = tuple(i for i in range(len(self.sizes)) if i != axis)
        return np.exp(logsumexp(self.log_prob, axis=others))

    def to_csv(self, target=None) -> str:
        """CSV with plus-counts, m-values, log-weight and probability (12 sig. digits)."""
        d = len(self.sizes)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"k{j + 1}" for j in range(d)] + [f"m{j + 1}" for j in range(d)]
                   + ["log_weight", "probability"])
        lp = self.log_prob
        for idx in np.ndindex(self.logw.shape):
            ms = [2 * k / s - 1 for k, s in zip(idx, self.sizes)]
            w.writerow(list(idx) + [f"{m:.12g}" for m in ms]
                       + [f"{self.logw[idx]:.12g}", f"{math.exp(lp[idx]):.12g}"])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


def _orbit_canonical(shape: tuple[int, ...], exchange: tuple[int, int]) -> np.ndarray:
    """For every cell, the smallest flat index in its orbit under flip and block exchange."""
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    flip = idx[tuple(slice(None, None, -1) for _ in shape)]
    swap = np.swapaxes(idx, *exchange)
    swap_flip = np.swapaxes(flip, *exchange)
    return np.minimum(np.minimum(idx, flip), np.minimum(swap, swap_flip))


def _symmetrize(logw: np.ndarray, exchange: tuple[int, int]) -> np.ndarray:
    # the laws are invariant under global flip and block exchange; copying one
    # representative per orbit makes that hold bit for bit
    canon = _orbit_canonical(logw.shape, exchange)
    return logw.ravel()[canon.ravel()].reshape(logw.shape)


# --- pair-count law ------------------------------------------------------

def _counts_from_mu(N: int, mu1: float, mu2: float) -> tuple[int, int]:
    if N % 2 or N < 2:
        raise SpecError(f"N must be even, got {N}")
    L = N // 2
    p = MagnetizationPoint.from_m((mu1, mu2), (L, L))
    return p.plus_counts


def cross_term(n, a, b, L):
    """S = 4n - 2a - 2b + L for the full matching (vectorized)."""
    return 4 * n - 2 * a - 2 * b + L


def gamma_star(mu1: float, mu2: float) -> float:
    """Maximizer of the ++ pair fraction: (mu1 + mu2 + mu1 mu2 + 1) / 2."""
    return 0.5 * (mu1 + mu2 + mu1 * mu2 + 1.0)


def gamma_star_star(mu1: float, mu2: float) -> float:
    """Maximizer of the -- pair fraction: (-mu1 - mu2 + mu1 mu2 + 1) / 2."""
    return 0.5 * (-mu1 - mu2 + mu1 * mu2 + 1.0)


def feasible_pairs(L: int, a: int, b: int) -> tuple[int, int]:
    return max(0, a + b - L), min(a, b)


@dataclass(frozen=True)
class PairCountLaw:
    N: int
    mu1: float
    mu2: float
    a: int
    b: int
    support: tuple[int, int]
    log_counts: np.ndarray

    @property
    def n_values(self) -> np.ndarray:
        return np.arange(self.support[0], self.support[1] + 1)

    @property
    def log_total(self) -> float:
        return float(logsumexp(self.log_counts))

    @property
    def log_probs(self) -> np.ndarray:
        L = self.N // 2
        return self.log_counts - (log_binomial(L, self.a) + log_binomial(L, self.b))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def cross_terms(self) -> np.ndarray:
        return cross_term(self.n_values, self.a, self.b, self.N // 2)


def pair_count_law(N: int, mu1: float, mu2: float) -> PairCountLaw:
    """Law of the number of ++ matched pairs under the uniform measure at fixed (mu1, mu2)."""
    a, b = _counts_from_mu(N, mu1, mu2)
    return _pair_count_law_counts(N, a, b)


def _pair_count_law_counts(N: int, a: int, b: int) -> PairCountLaw:
    L = N // 2
    lo, hi = feasible_pairs(L, a, b)
    n = np.arange(lo, hi + 1)
    lf = log_factorials(L)
    logc = _lbinom(L, n, lf) + _lbinom(L - n, a - n, lf) + _lbinom(L - a, b - n, lf)
    return PairCountLaw(N, 2 * a / L - 1, 2 * b / L - 1, a, b, (lo, hi), logc)


def cross_term_value(N: int, mu1: float, mu2: float, n: int) -> int:
    """Cross term sum_i sigma_i sigma_{i+N/2} of any configuration with n ++ pairs."""
    a, b = _counts_from_mu(N, mu1, mu2)
    lo, hi = feasible_pairs(N // 2, a, b)
    if int(n) != n or not lo <= n <= hi:
        raise ValueError(f"n={n} infeasible; feasible range is [{lo}, {hi}]")
    return int(cross_term(int(n), a, b, N // 2))


def log_tilted_expectation(N: int, mu1: float, mu2: float, alpha: float) -> float:
    """log E[exp(alpha S)] under the uniform measure at fixed block magnetizations."""
    law = pair_count_law(N, mu1, mu2)
    return float(logsumexp(law.log_probs + alpha * law.cross_terms()))


# --- exact tables --------------------------------------------------------

def _cw_two_block(L: int, beta: float) -> np.ndarray:
    # (beta N / 8) m^2 with N = 2L and m = (2k - L) / L
    m = 2.0 * np.arange(L + 1) / L - 1.0
    return (beta * 2 * L / 8.0) * m ** 2


def exact_two_block(spec: TwoBlockSpec, budget: Budget = DEFAULT_BUDGET) -> LogWeightTable:
    """Exact law of (m1, m2) via the pair-count decomposition, O(N^3)."""
    if spec.N > budget.two_block_max_N:
        raise BudgetExceeded(f"two-block exact sum limited to N <= {budget.two_block_max_N}")
    L, alpha = spec.L, spec.alpha
    lf = log_factorials(L)
    cw = _cw_two_block(L, spec.beta)
    bs = np.arange(L + 1)
    logw = np.full((L + 1, L + 1), -np.inf)
    for a in range(L // 2 + 1):
        n = np.arange(a + 1)
        bn = bs[:, None] - n[None, :]
        terms = (
            _lbinom(L, n, lf)[None, :]
            + _lbinom(L - n, a - n, lf)[None, :]
            + _lbinom(L - a, bn, lf)
            + alpha * cross_term(n[None, :], a, bs[:, None], L)
        )
        logw[a] = logsumexp(terms, axis=1) + cw[a] + cw
    # rows a > L/2 follow from the global flip (a, b) -> (L - a, L - b)
    for a in range(L // 2 + 1, L + 1):
        logw[a] = logw[L - a, ::-1]
    return LogWeightTable((L, L), _symmetrize(logw, (0, 1)))


def _log_matmul(X: np.ndarray, Y: np.ndarray, chunk_elems: int = 4_000_000) -> np.ndarray:
    """out[i, k] = logsumexp_j (X[i, j] + Y[j, k])."""
    I, J = X.shape
    K = Y.shape[1]
    out = np.empty((I, K))
    rows = max(1, chunk_elems // max(1, J * K))
    for s in range(0, I, rows):
        out[s:s + rows] = logsumexp(X[s:s + rows, :, None] + Y[None, :, :], axis=1)
    return out


def diluted_cost(L: int, M: int) -> float:
    return float((M + 1) ** 3 + (L + 1) * (M + 1) ** 2 + (L + 1) ** 2 * (M + 1))


def exact_diluted(spec: DilutedSpec, budget: Budget = DEFAULT_BUDGET) -> LogWeightTable:
    """Exact quenched law of (m1, m2) for a given dilution mask.

    The law depends on the mask only through M, the number of retained edges,
    because matched pairs are exchangeable. With j (resp. l) pluses among the
    retained sites of B1 (resp. B2) and n retained ++ pairs, the retained cross
    term is 4n + M - 2j - 2l.
    """
    L, M, alpha = spec.L, spec.M, spec.alpha
    if diluted_cost(L, M) > budget.diluted_max_ops:
        raise BudgetExceeded(f"diluted exact sum too large for N={spec.N}, M={M}")
    lf = log_factorials(L)
    # W[j, l] = log sum_n C(M,j) C(j,n) C(M-j,l-n) exp(alpha (4n + M - 2j - 2l))
    W = np.full((M + 1, M + 1), -np.inf)
    ls = np.arange(M + 1)
    for j in range(M + 1):
        n = np.arange(j + 1)
        terms = (
            _lbinom(j, n, lf)[None, :]
            + _lbinom(M - j, ls[:, None] - n[None, :], lf)
            + alpha * (4 * n[None, :] + M - 2 * j - 2 * ls[:, None])
        )
        W[j] = _lbinom(M, j, lf) + logsumexp(terms, axis=1)
    a = np.arange(L + 1)
    A = _lbinom(L - M, a[:, None] - ls[None, :], lf)  # unmatched sites, shape (L+1, M+1)
    T = _log_matmul(A, W)
    logw = _log_matmul(T, A.T)
    cw = _cw_two_block(L, spec.beta)
    logw = logw + cw[:, None] + cw[None, :]
    return LogWeightTable((L, L), _symmetrize(logw, (0, 1)))


def three_block_entries(spec: ThreeBlockSpec) -> float:
    return float((spec.n_outer + 1) ** 2 * (spec.b + 1))


def exact_three_block(spec: ThreeBlockSpec, budget: Budget = DEFAULT_BUDGET) -> LogWeightTable:
    """Exact law of (m1, m2, m3): exp(-H(m)) times the configuration counts."""
    if three_block_entries(spec) > budget.three_block_max_entries:
        raise BudgetExceeded(
            f"three-block table of {three_block_entries(spec):.3g} entries exceeds budget")
    n, b = spec.n_outer, spec.b
    lf = log_factorials(n)
    k_out = np.arange(n + 1)
    k_mid = np.arange(b + 1)
    m_out = 2.0 * k_out / n - 1.0
    m_mid = 2.0 * k_mid / b - 1.0
    ent_out = _lbinom(n, k_out, lf) + 0.5 * spec.beta * n * m_out ** 2
    ent_mid = _lbinom(b, k_mid, lf) + 0.5 * spec.beta * b * m_mid ** 2
    coupling = spec.alpha * math.sqrt(n * b)
    logw = (
        ent_out[:, None, None]
        + ent_mid[None, :, None]
        + ent_out[None, None, :]
        + coupling * m_mid[None, :, None] * (m_out[:, None, None] + m_out[None, None, :])
    )
    return LogWeightTable(spec.sizes, _symmetrize(logw, (0, 2)))


def exact_table(spec: ModelSpec, budget: Budget = DEFAULT_BUDGET) -> LogWeightTable:
    if isinstance(spec, TwoBlockSpec):
        return exact_two_block(spec, budget)
    if isinstance(spec, DilutedSpec):
        return exact_diluted(spec, budget)
    if isinstance(spec, ThreeBlockSpec):
        return exact_three_block(spec, budget)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def within_budget(spec: ModelSpec, budget: Budget = DEFAULT_BUDGET) -> bool:
    if isinstance(spec, TwoBlockSpec):
        return spec.N <= budget.two_block_max_N
    if isinstance(spec, DilutedSpec):
        return diluted_cost(spec.L, spec.M) <= budget.diluted_max_ops
    return three_block_entries(spec) <= budget.three_block_max_entries


def spec_hash(spec: ModelSpec) -> str:
    d = spec_to_dict(spec)
    if isinstance(spec, DilutedSpec):
        d["mask"] = "".join(str(e) for e in spec.mask)
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:20]


def cached_exact_table(spec: ModelSpec, cache_dir, budget: Budget = DEFAULT_BUDGET) -> LogWeightTable:
    """exact_table backed by an .npz cache keyed by the spec hash."""
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"{spec.model}-{spec_hash(spec)}.npz")
    if os.path.exists(path):
        with np.load(path) as data:
            return LogWeightTable(tuple(data["sizes"].tolist()), data["logw"])
    table = exact_table(spec, budget)
    tmp = path + ".tmp.npz"
    np.savez_compressed(tmp, sizes=np.asarray(table.sizes), logw=table.logw)
    os.replace(tmp, path)
    return table


# --- wells ---------------------------------------------------------------

@dataclass(frozen=True)
class WellSpec:
    """Axis-aligned boxes of half-width ``half_width`` around ``centers``.

    ``half_width`` is a scalar or one value per coordinate.
    """

    centers: np.ndarray
    half_width: float | tuple[float, ...]

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        object.__setattr__(self, "centers", c)
        w = np.broadcast_to(np.asarray(self.half_width, dtype=np.float64), (c.shape[1],))
        if np.any(w <= 0):
            raise ValueError("half_width must be positive")
        for i in range(len(c)):
            for j in range(i + 1, len(c)):
                # open boxes are disjoint iff some coordinate separates them
                if not np.any(np.abs(c[i] - c[j]) >= 2 * w - 1e-12):
                    raise WellOverlapError(f"wells {c[i]} and {c[j]} overlap")

    @property
    def widths(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.half_width, dtype=np.float64),
                               (self.centers.shape[1],))

    @classmethod
    def kappa_scaled(cls, centers, N: int, kappa: float) -> "WellSpec":
        """Boxes of half-width N**(-kappa), shrinking with system size."""
        return cls(np.asarray(centers, dtype=np.float64), float(N) ** (-kappa))


@dataclass
class WellMassReport:
    masses: np.ndarray
    residual: float
    centers: np.ndarray
    tv: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(self.masses.sum() + self.residual)


def well_mass(table: LogWeightTable, wells: WellSpec, tol: float = 1e-12) -> WellMassReport:
    """Gibbs mass of each well plus the residual mass outside all wells.

    A grid point inside several closed boxes (only possible on a shared
    boundary) goes to the nearest center in scaled sup-distance; exact ties
    split evenly.
    """
    d = len(table.sizes)
    if wells.centers.shape[1] != d:
        raise ValueError(f"wells are {wells.centers.shape[1]}-dimensional, table is {d}-dimensional")
    prob = table.prob
    axes = table.m_axes()
    w = wells.widths
    K = len(wells.centers)
    member = []
    for c in wells.centers:
        mask = np.ones(prob.shape, dtype=bool)
        for j in range(d):
            inside = np.abs(axes[j] - c[j]) <= w[j] + tol
            shape = [1] * d
            shape[j] = -1
            mask = mask & inside.reshape(shape)
        member.append(mask)
    member = np.stack(member) if K else np.zeros((0,) + prob.shape, dtype=bool)
    hits = member.sum(axis=0)
    # fsum is correctly rounded, so symmetric wells get bit-identical masses
    parts = [[prob[member[i] & (hits == 1)]] for i in range(K)]
    for idx in np.argwhere(hits > 1):
        cand = [i for i in range(K) if member[(i,) + tuple(idx)]]
        pt = np.array([axes[j][idx[j]] for j in range(d)])
        dist = [np.max(np.abs(pt - wells.centers[i]) / w) for i in cand]
        best = min(dist)
        winners = [i for i, dd in zip(cand, dist) if abs(dd - best) <= 1e-12]
        share = prob[tuple(idx)] / len(winners)
        for i in winners:
            parts[i].append(np.array([share]))
    masses = np.array([math.fsum(np.concatenate(p)) for p in parts])
    residual = math.fsum(prob[hits == 0])
    return WellMassReport(masses, residual, wells.centers.copy())
