"""Mean-field fixed points and the Curie-Weiss free-energy functional."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BRACKET_TOL = 1e-14
RESIDUAL_TOL = 1e-12
INF = math.inf


@dataclass(frozen=True)
class FixedPointResult:
    value: float
    residual: float
    iterations: int


def _largest_root(beta: float, h: float) -> FixedPointResult:
    # g(x) = x - tanh(beta x + h): g(1) > 0 always; the largest root is the last sign change
    def g(x):
        return x - math.tanh(beta * x + h)

    if h == 0 and beta <= 1:
        return FixedPointResult(0.0, 0.0, 0)
    lo, hi = 0.0, 1.0
    if h == 0:
        # 0 is always a root; move the lower end past it to where g < 0
        x = 0.5
        while g(x) >= 0:
            x *= 0.5
            if x < 1e-150:
                return FixedPointResult(0.0, 0.0, 0)
        lo = x
    it = 0
    while hi - lo > BRACKET_TOL and it < 200:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        it += 1
    x = 0.5 * (lo + hi)
    # polish: the map is a contraction near a stable root, one step tightens the residual
    x_new = math.tanh(beta * x + h)
    if abs(x_new - math.tanh(beta * x_new + h)) < abs(g(x)):
        x = x_new
    return FixedPointResult(x, abs(g(x)), it)


def solve_cw(gamma: float) -> FixedPointResult:
    """Largest solution of z = tanh(gamma z); zero for gamma <= 1."""
    if not (gamma >= 0 and math.isfinite(gamma)):
        raise ValueError(f"gamma must be finite and >= 0, got {gamma}")
    return _largest_root(float(gamma), 0.0)


def solve_cw_field(beta: float, h: float) -> FixedPointResult:
    """Largest solution of x = tanh(beta x + h) for h >= 0."""
    if not (math.isfinite(beta) and math.isfinite(h)):
        raise ValueError("beta and h must be finite")
    if h < 0:
        raise ValueError("use the smallest root of the mirrored equation for h < 0")
    if h > 0:
        # for h > 0, g(0) < 0 so [0, 1] brackets the largest root
        return _largest_root(float(beta), float(h))
    return _largest_root(float(beta), 0.0)


def smallest_root_field(beta: float, h: float) -> float:
    """Smallest solution of x = tanh(beta x - h), found by bisection on [-1, 0]."""
    def g(x):
        return x - math.tanh(beta * x - h)

    if h == 0:
        return -solve_cw(beta).value
    lo, hi = -1.0, 0.0
    while hi - lo > BRACKET_TOL:
        mid = 0.5 * (lo + hi)
        # g(-1) < 0; the smallest root is the first crossing from below
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def m_star(beta: float) -> float:
    return solve_cw(beta).value


def m_of_c(beta: float, c: float) -> float:
    """Middle-block magnetization m(c): largest root of x = tanh(beta x + sqrt(2) c m*(beta)).

    ``c = math.inf`` returns exactly 1.
    """
    if not beta > 1:
        raise ValueError(f"need beta > 1, got {beta}")
    if c < 0:
        raise ValueError("c must be >= 0")
    if math.isinf(c):
        return 1.0
    ms = m_star(beta)
    if c == 0:
        return ms
    return solve_cw_field(beta, math.sqrt(2.0) * c * ms).value


def binary_entropy(x):
    """s(x) = -(1+x)/2 log((1+x)/2) - (1-x)/2 log((1-x)/2), with s(+-1) = 0."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1):
        raise ValueError("x must lie in [-1, 1]")
    p = (1 + x) / 2
    q = (1 - x) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        tq = np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0)
    out = -(tp + tq)
    return float(out) if out.ndim == 0 else out


def free_energy(beta: float, x):
    """F_beta(x) = (beta/2) x^2 - log 2 + s(x)."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * beta * x ** 2 - math.log(2.0) + binary_entropy(x)
    return float(out) if np.ndim(out) == 0 else out
