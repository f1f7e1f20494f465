import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from cwbottleneck.fixedpoint import (
    binary_entropy,
    free_energy,
    m_of_c,
    m_star,
    smallest_root_field,
    solve_cw,
    solve_cw_field,
)


def brentq_root(beta, h=0.0):
    # independent oracle: Brent's method on the bracket (tiny, 1]
    return brentq(lambda x: x - math.tanh(beta * x + h), 1e-6 if h == 0 else 0.0, 1.0,
                  xtol=1e-15, rtol=1e-15)


def test_subcritical_and_critical():
    assert solve_cw(0.5).value == 0.0
    assert solve_cw(1.0).value == 0.0
    assert solve_cw(0.0).value == 0.0
    assert solve_cw_field(0.5, 0.0).value == 0.0


@pytest.mark.parametrize("gamma", [1.01, 1.2, 1.5, 2.0, 3.0, 8.0, 40.0])
def test_solve_cw_against_brentq(gamma):
    r = solve_cw(gamma)
    assert r.value == pytest.approx(brentq_root(gamma), abs=1e-12)
    assert r.residual <= 1e-12


def test_frozen_values():
    # frozen from the brentq oracle above
    assert solve_cw(2.0).value == pytest.approx(0.957504024077269, abs=1e-12)
    assert solve_cw(1.5).value == pytest.approx(0.8585596366401113, abs=1e-12)


def test_field_roots():
    assert solve_cw_field(1.5, 0.0).value == solve_cw(1.5).value
    assert solve_cw_field(1.5, 10.0).value > 0.9999
    for h in (0.01, 0.3, 2.0):
        x = solve_cw_field(1.5, h).value
        assert x == pytest.approx(brentq_root(1.5, h), abs=1e-12)
        assert smallest_root_field(1.5, h) == pytest.approx(-x, abs=1e-12)
    with pytest.raises(ValueError):
        solve_cw_field(1.5, -0.1)
    with pytest.raises(ValueError):
        solve_cw(-1.0)
    with pytest.raises(ValueError):
        solve_cw(math.inf)


def test_m_of_c():
    ms = m_star(1.5)
    assert m_of_c(1.5, 0.0) == ms
    assert m_of_c(1.5, math.inf) == 1.0
    v = m_of_c(1.5, 1.0)
    assert ms < v < 1
    assert abs(v - math.tanh(1.5 * v + math.sqrt(2) * ms)) <= 1e-12
    vals = [m_of_c(1.5, c) for c in (0, 0.1, 0.5, 1, 2, 5)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        m_of_c(0.9, 1.0)


def test_m_star_monotone_in_beta():
    vals = [m_star(b) for b in np.linspace(1.05, 6, 30)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_free_energy_endpoints():
    assert free_energy(1.5, 0.0) == pytest.approx(0.0, abs=1e-15)
    for x in (-1.0, 1.0):
        assert free_energy(1.5, x) == pytest.approx(0.75 - math.log(2))
    assert binary_entropy(0.0) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        binary_entropy(1.5)


def test_free_energy_grid_argmax():
    grid = np.linspace(-1, 1, 100_001)
    F = free_energy(1.5, grid)
    top = grid[F >= F.max() - 1e-15]
    ms = m_star(1.5)
    step = grid[1] - grid[0]
    assert np.any(np.abs(top - ms) <= step)
    assert abs(abs(grid[np.argmax(F)]) - ms) <= step


@pytest.mark.parametrize("beta", [1.2, 1.5, 3.0])
def test_free_energy_stationary_at_m_star(beta):
    ms = m_star(beta)
    h = 1e-6
    d = (free_energy(beta, ms + h) - free_energy(beta, ms - h)) / (2 * h)
    assert abs(d) < 1e-8


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(-1.0, 1.0))
def test_free_energy_even(beta, x):
    assert free_energy(beta, x) == pytest.approx(free_energy(beta, -x), abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.001, 50.0))
def test_fixed_point_residual(gamma):
    r = solve_cw(gamma)
    assert 0 < r.value <= 1
    assert abs(r.value - math.tanh(gamma * r.value)) <= 1e-12
