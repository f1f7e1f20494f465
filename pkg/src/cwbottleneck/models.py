"""Bottleneck Curie-Weiss models: specs, configurations, magnetizations, energies.

Three variants share the same building blocks:

* ``TwoBlockSpec``: two Curie-Weiss blocks of size N/2 joined by the perfect
  matching i <-> i + N/2 with coupling ``alpha``.
* ``DilutedSpec``: the same, but only matching edges with ``mask[i] == 1`` are
  present.
* ``ThreeBlockSpec``: two outer blocks of size ``n_outer`` that interact only
  through a small middle block of size ``b``.

Energies follow the sign convention P(sigma) ~ exp(-H(sigma)). Intra-block sums
include the diagonal i == j, so the Curie-Weiss part is exactly a function of the
block magnetizations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ._rng import bernoulli_mask


class SpecError(ValueError):
    """Raised for invalid model parameters or inputs of the wrong shape."""


@dataclass(frozen=True)
class TwoBlockSpec:
    N: int
    beta: float
    alpha: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise SpecError(f"N must be an even integer >= 4, got {self.N}")
        if not self.beta > 2:
            raise SpecError(f"two-block model needs beta > 2, got {self.beta}")
        if not 0 <= self.alpha <= self.beta:
            raise SpecError(f"need 0 <= alpha <= beta, got alpha={self.alpha}")

    model = "two_block"

    @property
    def L(self) -> int:
        """Block size N/2."""
        return self.N // 2

    @property
    def sizes(self) -> tuple[int, int]:
        return (self.L, self.L)


@dataclass(frozen=True)
class DilutedSpec:
    base: TwoBlockSpec
    mask: tuple[int, ...]
    p: float = 1.0
    mask_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mask", tuple(int(e) for e in self.mask))
        if len(self.mask) != self.base.L:
            raise SpecError(f"mask length {len(self.mask)} != N/2 = {self.base.L}")
        if any(e not in (0, 1) for e in self.mask):
            raise SpecError("mask entries must be 0 or 1")
        if not 0 < self.p <= 1:
            raise SpecError(f"p must lie in (0, 1], got {self.p}")

    model = "diluted"

    @classmethod
    def from_seed(cls, base: TwoBlockSpec, p: float, seed: int) -> "DilutedSpec":
        mask = bernoulli_mask(base.L, p, seed)
        return cls(base=base, mask=tuple(mask.tolist()), p=p, mask_seed=seed)

    @property
    def N(self) -> int:
        return self.base.N

    @property
    def L(self) -> int:
        return self.base.L

    @property
    def beta(self) -> float:
        return self.base.beta

    @property
    def alpha(self) -> float:
        return self.base.alpha

    @property
    def M(self) -> int:
        """Number of retained matching edges."""
        return sum(self.mask)

    @property
    def sizes(self) -> tuple[int, int]:
        return self.base.sizes


@dataclass(frozen=True)
class ThreeBlockSpec:
    n_outer: int
    b: int
    beta: float
    alpha: float

    def __post_init__(self):
        if int(self.n_outer) != self.n_outer or self.n_outer < 1:
            raise SpecError(f"n_outer must be a positive integer, got {self.n_outer}")
        if int(self.b) != self.b or self.b < 1:
            raise SpecError(f"b must be a positive integer, got {self.b}")
        if self.b > self.n_outer:
            raise SpecError("the middle block must not be larger than the outer blocks")
        if not self.beta > 1:
            raise SpecError(f"three-block model needs beta > 1, got {self.beta}")
        if not self.alpha >= 0:
            raise SpecError(f"alpha must be >= 0, got {self.alpha}")

    model = "three_block"

    @property
    def N(self) -> int:
        return 2 * self.n_outer + self.b

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (self.n_outer, self.b, self.n_outer)


ModelSpec = Union[TwoBlockSpec, DilutedSpec, ThreeBlockSpec]


@dataclass(frozen=True)
class MagnetizationPoint:
    """Block magnetization vector stored as integer plus-counts.

    ``m[j] = 2 * plus_counts[j] / sizes[j] - 1`` is exact on the grid, so
    admissibility never depends on floating point.
    """

    plus_counts: tuple[int, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "plus_counts", tuple(int(k) for k in self.plus_counts))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.plus_counts) != len(self.sizes):
            raise SpecError("plus_counts and sizes differ in length")
        for k, s in zip(self.plus_counts, self.sizes):
            if not 0 <= k <= s:
                raise SpecError(f"plus-count {k} outside [0, {s}]")

    @classmethod
    def from_m(cls, m: Sequence[float], sizes: Sequence[int], tol: float = 1e-9):
        """Build from magnetization values; raises if any value is off the grid."""
        counts = []
        for mj, s in zip(m, sizes):
            k = s * (1 + mj) / 2
            if abs(k - round(k)) > tol or not -1 - tol <= mj <= 1 + tol:
                raise SpecError(f"magnetization {mj} is not admissible for block size {s}")
            counts.append(int(round(k)))
        return cls(tuple(counts), tuple(sizes))

    @property
    def m(self) -> tuple[float, ...]:
        return tuple(2 * k / s - 1 for k, s in zip(self.plus_counts, self.sizes))

    def flipped(self) -> "MagnetizationPoint":
        return MagnetizationPoint(
            tuple(s - k for k, s in zip(self.plus_counts, self.sizes)), self.sizes
        )


@dataclass(frozen=True)
class SpinConfig:
    spins: np.ndarray
    layout: tuple[int, ...]

    def __post_init__(self):
        spins = np.asarray(self.spins, dtype=np.int8)
        if spins.ndim != 1 or spins.size != sum(self.layout):
            raise SpecError(f"spin vector of length {spins.size} does not match layout {self.layout}")
        if not np.all(np.abs(spins) == 1):
            raise SpecError("spins must be +1 or -1")
        spins.setflags(write=False)
        object.__setattr__(self, "spins", spins)
        object.__setattr__(self, "layout", tuple(int(s) for s in self.layout))

    @property
    def N(self) -> int:
        return self.spins.size

    def flipped(self) -> "SpinConfig":
        return SpinConfig(-self.spins, self.layout)


def magnetization(config: SpinConfig) -> MagnetizationPoint:
    counts = []
    start = 0
    for size in config.layout:
        block = config.spins[start:start + size]
        counts.append(int(np.count_nonzero(block > 0)))
        start += size
    return MagnetizationPoint(tuple(counts), config.layout)


def _spin_array(config, N: int) -> np.ndarray:
    spins = config.spins if isinstance(config, SpinConfig) else np.asarray(config)
    if spins.shape[-1] != N:
        raise SpecError(f"configuration length {spins.shape[-1]} != N = {N}")
    return spins.astype(np.float64)


def _matched_energy(beta, N, alpha, weights, spins):
    L = N // 2
    s1 = spins[..., :L].sum(axis=-1)
    s2 = spins[..., L:].sum(axis=-1)
    # -(beta N / 8)(m1^2 + m2^2) with m_j = s_j / L
    cw = -(beta * N / 8.0) * ((s1 / L) ** 2 + (s2 / L) ** 2)
    cross = (weights * spins[..., :L] * spins[..., L:]).sum(axis=-1)
    out = cw - alpha * cross
    return float(out) if np.ndim(out) == 0 else out


def energy_two_block(spec: TwoBlockSpec, config) -> float:
    """Energy -(beta N/8)(m1^2 + m2^2) - alpha * sum_i sigma_i sigma_{i+N/2}.

    ``config`` may be a SpinConfig or an array of shape (..., N); batched input
    returns an array of energies.
    """
    spins = _spin_array(config, spec.N)
    return _matched_energy(spec.beta, spec.N, spec.alpha, np.ones(spec.L), spins)


def energy_diluted(spec: DilutedSpec, config) -> float:
    spins = _spin_array(config, spec.N)
    weights = np.asarray(spec.mask, dtype=np.float64)
    return _matched_energy(spec.beta, spec.N, spec.alpha, weights, spins)


def energy_three_block(spec: ThreeBlockSpec, m) -> float:
    """Three-block energy as a function of the magnetization vector.

    Accepts a MagnetizationPoint, a SpinConfig, or a spin array of shape (..., N);
    configurations are reduced to their magnetization first.
    """
    n, b = spec.n_outer, spec.b
    if isinstance(m, MagnetizationPoint):
        if m.sizes != spec.sizes:
            raise SpecError(f"magnetization sizes {m.sizes} do not match {spec.sizes}")
        m1, m2, m3 = m.m
    else:
        spins = _spin_array(m, spec.N)
        m1 = spins[..., :n].mean(axis=-1)
        m2 = spins[..., n:n + b].mean(axis=-1)
        m3 = spins[..., n + b:].mean(axis=-1)
    coupling = spec.alpha * math.sqrt(n * b)
    out = (
        -(spec.beta / 2.0) * (n * m1 ** 2 + b * m2 ** 2 + n * m3 ** 2)
        - coupling * m1 * m2
        - coupling * m3 * m2
    )
    return float(out) if np.ndim(out) == 0 else out


def energy_reference(spec: TwoBlockSpec, m: MagnetizationPoint) -> float:
    """Mean-field reference energy -(N/2)((alpha/2) m1 m2 + (beta/4)(m1^2 + m2^2))."""
    if m.sizes != spec.sizes:
        raise SpecError(f"magnetization sizes {m.sizes} do not match {spec.sizes}")
    m1, m2 = m.m
    return -(spec.N / 2.0) * (
        0.5 * spec.alpha * m1 * m2 + 0.25 * spec.beta * m1 ** 2 + 0.25 * spec.beta * m2 ** 2
    )


def energy(spec: ModelSpec, config) -> float:
    """Dispatch to the energy function of the given model."""
    if isinstance(spec, TwoBlockSpec):
        return energy_two_block(spec, config)
    if isinstance(spec, DilutedSpec):
        return energy_diluted(spec, config)
    if isinstance(spec, ThreeBlockSpec):
        return energy_three_block(spec, config)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def layout_of(spec: ModelSpec) -> tuple[int, ...]:
    return tuple(spec.sizes)


# --- serialization -------------------------------------------------------

def spec_to_dict(spec: ModelSpec) -> dict:
    if isinstance(spec, TwoBlockSpec):
        return {"model": "two_block", "N": spec.N, "beta": spec.beta, "alpha": spec.alpha}
    if isinstance(spec, DilutedSpec):
        d = {"model": "diluted", "N": spec.N, "beta": spec.beta, "alpha": spec.alpha,
             "p": spec.p, "mask_seed": spec.mask_seed}
        if spec.mask_seed is None:
            d["mask"] = "".join(str(e) for e in spec.mask)
        return d
    if isinstance(spec, ThreeBlockSpec):
        return {"model": "three_block", "N": spec.N, "beta": spec.beta,
                "alpha": spec.alpha, "b": spec.b}
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def spec_from_dict(d: dict) -> ModelSpec:
    model = d.get("model")
    if model == "two_block":
        return TwoBlockSpec(int(d["N"]), float(d["beta"]), float(d["alpha"]))
    if model == "diluted":
        base = TwoBlockSpec(int(d["N"]), float(d["beta"]), float(d["alpha"]))
        p = float(d.get("p", 1.0))
        if d.get("mask") is not None:
            return DilutedSpec(base, tuple(int(c) for c in str(d["mask"])), p)
        if d.get("mask_seed") is None:
            raise SpecError("diluted spec needs either 'mask' or 'mask_seed'")
        return DilutedSpec.from_seed(base, p, int(d["mask_seed"]))
    if model == "three_block":
        N, b = int(d["N"]), int(d["b"])
        if (N - b) % 2:
            raise SpecError(f"N - b must be even, got N={N}, b={b}")
        return ThreeBlockSpec((N - b) // 2, b, float(d["beta"]), float(d["alpha"]))
    raise SpecError(f"unknown model {model!r}")


def dumps_spec(spec: ModelSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=True)


def loads_spec(text: str) -> ModelSpec:
    return spec_from_dict(json.loads(text))
