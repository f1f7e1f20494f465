"""Asymptotic regime classification of power-law parameter schedules and the
limit laws of the block magnetizations in each regime.

Limits are decided from exponents held as exact fractions, so a borderline
schedule (exponent exactly zero) is recognized as such instead of being
extrapolated numerically.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fixedpoint import m_of_c, m_star
from .models import DilutedSpec, ModelSpec, ThreeBlockSpec, TwoBlockSpec

INF = math.inf


class Case(str, enum.Enum):
    T1_ALIGNED = "theorem1.1"  # N alpha_N -> inf
    T1_DECOUPLED = "theorem1.2"  # N alpha_N -> 0
    T2_ALIGNED = "theorem2.1"  # p N alpha_N -> inf
    T2_DECOUPLED = "theorem2.2"  # p N alpha_N -> 0
    BS_FIELD = "blockspin.1"  # c = inf
    BS_ALIGNED = "blockspin.2"  # c = 0, C = inf
    BS_FREE = "blockspin.3"  # C = 0
    PT_FIELD = "phasetransition.1"  # c in (0, inf)
    PT_WEIGHTED = "phasetransition.2"  # C in (0, inf)
    UNCOVERED = "uncovered"


def _frac(x) -> Fraction:
    return Fraction(x).limit_denominator(10 ** 9)


@dataclass(frozen=True)
class ScheduleSpec:
    """alpha_N = A N^-rho; b_N = max(1, floor(B N^gamma)); p(N) = min(1, P N^-pi)."""

    model: str
    beta: float
    A: float = 1.0
    rho: float = 0.5
    B: float = 1.0
    gamma: float | None = None
    P: float = 1.0
    pi: float | None = None

    def __post_init__(self):
        if self.model not in ("two_block", "diluted", "three_block"):
            raise ValueError(f"unknown model {self.model!r}")
        if not self.rho > 0:
            raise ValueError("rho must be > 0 (alpha_N must vanish)")
        if not self.A > 0:
            raise ValueError("A must be > 0")
        if self.model == "three_block":
            if self.gamma is None or not 0 < self.gamma < 1:
                raise ValueError("three-block schedules need 0 < gamma < 1 (b_N -> inf, b_N/N -> 0)")
            if not self.B > 0:
                raise ValueError("B must be > 0")
        if self.model == "diluted":
            if self.pi is None or self.pi < 0:
                raise ValueError("diluted schedules need pi >= 0")
            if not self.P > 0:
                raise ValueError("P must be > 0")

    def alpha(self, N: int) -> float:
        return self.A * float(N) ** (-self.rho)

    def b(self, N: int) -> int:
        return max(1, int(math.floor(self.B * float(N) ** self.gamma)))

    def p(self, N: int) -> float:
        return min(1.0, self.P * float(N) ** (-self.pi))

    def spec_for(self, N: int, mask_seed: int = 0) -> ModelSpec:
        """Model spec at size N. Three-block uses n_outer = (N - b_N) // 2."""
        if self.model == "two_block":
            return TwoBlockSpec(N, self.beta, self.alpha(N))
        if self.model == "diluted":
            return DilutedSpec.from_seed(TwoBlockSpec(N, self.beta, self.alpha(N)), self.p(N), mask_seed)
        b = self.b(N)
        return ThreeBlockSpec((N - b) // 2, b, self.beta, self.alpha(N))

    def to_dict(self) -> dict:
        d = {"model": self.model, "beta": self.beta, "A": self.A, "rho": self.rho}
        if self.model == "three_block":
            d.update(B=self.B, gamma=self.gamma)
        if self.model == "diluted":
            d.update(P=self.P, pi=self.pi)
        return d


@dataclass(frozen=True)
class RegimeClassification:
    case: Case
    limit_constants: dict
    covered: bool
    reason: str = ""
    as_convergence_plausible: bool | None = None


def _limit(exponent: Fraction, constant: float) -> float:
    if exponent > 0:
        return INF
    if exponent < 0:
        return 0.0
    return constant


def classify(schedule: ScheduleSpec) -> RegimeClassification:
    rho = _frac(schedule.rho)
    if schedule.model == "two_block":
        lim = _limit(1 - rho, schedule.A)
        consts = {"N_alpha": lim}
        if lim == INF:
            return RegimeClassification(Case.T1_ALIGNED, consts, True)
        if lim == 0:
            return RegimeClassification(Case.T1_DECOUPLED, consts, True)
        return RegimeClassification(Case.UNCOVERED, consts, False,
                                    "N alpha_N tends to a finite nonzero constant")
    if schedule.model == "diluted":
        pi = _frac(schedule.pi)
        p_const = schedule.P if pi > 0 else min(1.0, schedule.P)
        lim = _limit(1 - rho - pi, schedule.A * p_const)
        consts = {"pN_alpha": lim, "pN": _limit(1 - pi, p_const)}
        # p(N) N >= C log N eventually iff p(N) N grows polynomially
        as_ok = pi < 1
        if pi >= 1:
            return RegimeClassification(Case.UNCOVERED, consts, False,
                                        "N p(N) does not diverge", as_ok)
        if lim == INF:
            return RegimeClassification(Case.T2_ALIGNED, consts, True, "", as_ok)
        if lim == 0:
            return RegimeClassification(Case.T2_DECOUPLED, consts, True, "", as_ok)
        return RegimeClassification(Case.UNCOVERED, consts, False,
                                    "p(N) N alpha_N tends to a finite nonzero constant", as_ok)
    gamma = _frac(schedule.gamma)
    # alpha sqrt(N/b) ~ (A / sqrt(B)) N^(-rho + (1-gamma)/2); alpha sqrt(bN) ~ A sqrt(B) N^(-rho + (1+gamma)/2)
    c = _limit(-rho + (1 - gamma) / 2, schedule.A / math.sqrt(schedule.B))
    C = _limit(-rho + (1 + gamma) / 2, schedule.A * math.sqrt(schedule.B))
    consts = {"c": c, "C": C}
    if c == INF:
        return RegimeClassification(Case.BS_FIELD, consts, True)
    if c > 0:
        return RegimeClassification(Case.PT_FIELD, consts, True)
    if C == INF:
        return RegimeClassification(Case.BS_ALIGNED, consts, True)
    if C > 0:
        return RegimeClassification(Case.PT_WEIGHTED, consts, True)
    return RegimeClassification(Case.BS_FREE, consts, True)


def a_weight(chi1: int, chi2: int, chi3: int, C: float, beta: float) -> float:
    """Limit weight of the sign pattern (chi1, chi2, chi3) when alpha_N sqrt(b_N N) -> C."""
    if {chi1, chi2, chi3} - {-1, 1}:
        raise ValueError("signs must be +-1")
    if C < 0:
        raise ValueError("C must be >= 0")
    if math.isinf(C):
        return 0.5 if chi1 == chi2 == chi3 else 0.0
    x = math.exp(-math.sqrt(2.0) * C * m_star(beta) ** 2)
    norm = 2.0 * (1.0 + x) ** 2
    if chi1 == chi2 == chi3:
        return 1.0 / norm
    if chi1 == chi3:
        return x * x / norm
    return x / norm


SIGNS3 = tuple(itertools.product((1, -1), repeat=3))
SIGNS2 = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass
class LimitLaw:
    atoms: np.ndarray
    weights: np.ndarray
    case: Case | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=np.float64))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.atoms) != len(self.weights):
            raise ValueError("atoms and weights differ in length")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")

    def to_json(self) -> str:
        return json.dumps({
            "case": self.case.value if self.case else None,
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
            **self.meta,
        }, indent=2, sort_keys=True)

    def weight_at(self, point, tol: float = 1e-9) -> float:
        hit = np.all(np.abs(self.atoms - np.asarray(point)) <= tol, axis=1)
        return float(self.weights[hit].sum())


class UncoveredRegime(ValueError):
    pass


def limit_law(schedule: ScheduleSpec) -> LimitLaw:
    reg = classify(schedule)
    if not reg.covered:
        raise UncoveredRegime(reg.reason or "regime not covered")
    case = reg.case
    if schedule.model in ("two_block", "diluted"):
        m = m_star(schedule.beta / 2)
        if case in (Case.T1_ALIGNED, Case.T2_ALIGNED):
            return LimitLaw([[m, m], [-m, -m]], [0.5, 0.5], case)
        return LimitLaw([[s1 * m, s2 * m] for s1, s2 in SIGNS2], [0.25] * 4, case)
    beta = schedule.beta
    ms = m_star(beta)
    if case in (Case.BS_FIELD, Case.PT_FIELD, Case.BS_ALIGNED):
        c = reg.limit_constants["c"]
        mid = m_of_c(beta, c)
        return LimitLaw([[ms, mid, ms], [-ms, -mid, -ms]], [0.5, 0.5], case, {"m_c": mid})
    if case == Case.BS_FREE:
        return LimitLaw([[s1 * ms, s2 * ms, s3 * ms] for s1, s2, s3 in SIGNS3], [0.125] * 8, case)
    C = reg.limit_constants["C"]
    weights = [a_weight(*chi, C, beta) for chi in SIGNS3]
    return LimitLaw([[s1 * ms, s2 * ms, s3 * ms] for s1, s2, s3 in SIGNS3], weights, case)


def sign_wells_centers(law: LimitLaw) -> np.ndarray:
    """All sign combinations of the (absolute) atom coordinates of a law."""
    mags = np.abs(law.atoms[0])
    d = mags.size
    return np.array([np.asarray(s) * mags for s in itertools.product((1, -1), repeat=d)])
