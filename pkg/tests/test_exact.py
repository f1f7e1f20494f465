import itertools
import math

import mpmath
import numpy as np
import pytest

from cwbottleneck.exact import (
    Budget,
    BudgetExceeded,
    LogWeightTable,
    WellOverlapError,
    WellSpec,
    cached_exact_table,
    cross_term,
    cross_term_value,
    curie_weiss_log_law,
    exact_diluted,
    exact_table,
    exact_three_block,
    exact_two_block,
    gamma_star,
    gamma_star_star,
    log_binomial,
    log_tilted_expectation,
    pair_count_law,
    well_mass,
)
from cwbottleneck.fixedpoint import m_star
from cwbottleneck.models import DilutedSpec, MagnetizationPoint, ThreeBlockSpec, TwoBlockSpec
from cwbottleneck.oracle import brute_force_prob


# --- log binomials ----------------------------------------------------------

def test_log_binomial_small():
    assert log_binomial(0, 0) == 0.0
    assert log_binomial(4, 2) == pytest.approx(math.log(6), abs=1e-15)
    with pytest.raises(ValueError):
        log_binomial(4, 5)
    with pytest.raises(ValueError):
        log_binomial(4, -1)


@pytest.mark.parametrize("n,k", [(1000, 500), (1000, 3), (5000, 2499), (8192, 4096), (8193, 17)])
def test_log_binomial_against_big_integers(n, k):
    assert abs(log_binomial(n, k) - math.log(math.comb(n, k))) <= 1e-10


@pytest.mark.parametrize("n,k", [(10 ** 5, 3 * 10 ** 4), (10 ** 7, 5 * 10 ** 6), (123457, 1),
                                 (10 ** 7, 2), (9000, 4500), (8193, 8192), (2 * 10 ** 6, 40)])
def test_log_binomial_large_n(n, k):
    mpmath.mp.dps = 40
    ref = float(mpmath.log(mpmath.binomial(n, k)))
    # absolute accuracy is limited by the spacing of doubles near the value
    assert abs(log_binomial(n, k) - ref) <= max(1e-10, 8 * math.ulp(ref))


# --- pair-count law ---------------------------------------------------------

def test_pair_count_total_small():
    law = pair_count_law(8, 0.0, 0.0)
    assert law.support == (0, 2)
    assert round(math.exp(law.log_total)) == 36
    # direct enumeration of placements of 2 plus spins in each block
    counts = {}
    for A in itertools.combinations(range(4), 2):
        for B in itertools.combinations(range(4), 2):
            n = len(set(A) & set(B))
            counts[n] = counts.get(n, 0) + 1
    np.testing.assert_allclose(np.exp(law.log_counts), [counts[n] for n in range(3)])


def test_pair_count_degenerate():
    law = pair_count_law(10, 1.0, 0.2)
    assert law.support == (3, 3)
    assert law.probs[0] == pytest.approx(1.0)


def test_pair_count_argmax_example():
    law = pair_count_law(100, 0.2, 0.4)
    n_mode = law.n_values[np.argmax(law.log_counts)]
    assert abs(n_mode - round(gamma_star(0.2, 0.4) * 100 / 4)) <= 1


def test_gamma_values():
    assert gamma_star(0, 0) == 0.5 and gamma_star_star(0, 0) == 0.5
    assert gamma_star(1, 1) == 2 and gamma_star_star(1, 1) == 0
    assert gamma_star(0.5, -0.5) == pytest.approx(0.375)


def test_cross_term_examples():
    assert cross_term_value(4, 1.0, 1.0, 2) == 2
    N, mu1, mu2 = 40, 0.5, -0.2
    n_real = gamma_star(mu1, mu2) * N / 4
    L, a, b = 20, 15, 8
    assert cross_term(n_real, a, b, L) == pytest.approx(N * mu1 * mu2 / 2)
    with pytest.raises(ValueError):
        cross_term_value(8, 0.0, 0.0, 3)


def test_cross_term_brute_force_N8():
    N, L = 8, 4
    for spins in itertools.product((1, -1), repeat=N):
        s = np.array(spins)
        a = int((s[:L] > 0).sum())
        b = int((s[L:] > 0).sum())
        n = int(((s[:L] > 0) & (s[L:] > 0)).sum())
        assert cross_term(n, a, b, L) == int((s[:L] * s[L:]).sum())


def test_tilted_expectation_small_alpha():
    # alpha -> 0: log E[exp(alpha S)] ~ alpha E[S]
    law = pair_count_law(200, 0.4, 0.6)
    ES = float((law.probs * law.cross_terms()).sum())
    assert log_tilted_expectation(200, 0.4, 0.6, 1e-7) == pytest.approx(1e-7 * ES, rel=1e-5)
    assert log_tilted_expectation(200, 0.4, 0.6, 0.0) == pytest.approx(0.0, abs=1e-12)


# --- exact tables ------------------------------------------------------------

def test_two_block_against_enumeration():
    spec = TwoBlockSpec(8, 4.0, 0.5)
    np.testing.assert_allclose(exact_two_block(spec).prob, brute_force_prob(spec), atol=1e-12, rtol=0)


@pytest.mark.parametrize("N", [4, 6, 8, 10])
def test_diluted_all_masks_against_enumeration(N):
    for mask in itertools.product((0, 1), repeat=N // 2):
        spec = DilutedSpec(TwoBlockSpec(N, 4.0, 0.5), mask)
        np.testing.assert_allclose(exact_diluted(spec).prob, brute_force_prob(spec), atol=1e-12, rtol=0)


def test_diluted_depends_on_mask_only_through_M():
    base = TwoBlockSpec(10, 4.0, 0.8)
    a = exact_diluted(DilutedSpec(base, (1, 1, 0, 0, 0))).prob
    b = exact_diluted(DilutedSpec(base, (0, 0, 0, 1, 1))).prob
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_diluted_extremes():
    base = TwoBlockSpec(60, 4.0, 0.3)
    full = exact_diluted(DilutedSpec(base, (1,) * 30)).prob
    np.testing.assert_allclose(full, exact_two_block(base).prob, atol=1e-12)
    empty = exact_diluted(DilutedSpec(base, (0,) * 30)).prob
    q = np.exp(curie_weiss_log_law(30, 2.0))
    np.testing.assert_allclose(empty, np.outer(q, q), atol=1e-12)


def test_three_block_against_enumeration():
    for n, b in [(2, 2), (3, 1), (4, 3), (5, 2)]:
        spec = ThreeBlockSpec(n, b, 1.5, 0.1 if (n, b) == (2, 2) else 0.6)
        np.testing.assert_allclose(exact_three_block(spec).prob, brute_force_prob(spec), atol=1e-12, rtol=0)


def test_three_block_decoupled():
    spec = ThreeBlockSpec(30, 7, 1.5, 0.0)
    qo = np.exp(curie_weiss_log_law(30, 1.5))
    qm = np.exp(curie_weiss_log_law(7, 1.5))
    prod = qo[:, None, None] * qm[None, :, None] * qo[None, None, :]
    np.testing.assert_allclose(exact_three_block(spec).prob, prod, atol=1e-12)


@pytest.mark.parametrize("spec", [
    TwoBlockSpec(50, 4.0, 0.3),
    DilutedSpec.from_seed(TwoBlockSpec(50, 4.0, 0.3), 0.5, 1),
    ThreeBlockSpec(20, 6, 1.5, 0.3),
])
def test_symmetries_exact(spec):
    lw = exact_table(spec).logw
    rev = (slice(None, None, -1),) * lw.ndim
    assert np.array_equal(lw, lw[rev])
    if lw.ndim == 2:
        assert np.array_equal(lw, lw.T)
    else:
        assert np.array_equal(lw, lw.transpose(2, 1, 0))


def test_table_accessors(tmp_path):
    spec = TwoBlockSpec(8, 4.0, 0.5)
    t = exact_table(spec)
    p = MagnetizationPoint.from_m((0.5, 0.5), t.sizes)
    assert t.probability(p) == pytest.approx(t.prob[3, 3])
    assert sum(math.exp(lw - t.log_partition) for _, lw in t.entries()) == pytest.approx(1.0)
    assert t.marginal(0).sum() == pytest.approx(1.0)
    text = t.to_csv(tmp_path / "t.csv")
    assert text.splitlines()[0] == "k1,k2,m1,m2,log_weight,probability"
    assert len(text.splitlines()) == 26


def test_budget():
    with pytest.raises(BudgetExceeded):
        exact_table(TwoBlockSpec(400, 4.0, 0.1), Budget(two_block_max_N=200))
    with pytest.raises(BudgetExceeded):
        exact_table(ThreeBlockSpec(100, 10, 1.5, 0.1), Budget(three_block_max_entries=1e4))


def test_cache_roundtrip(tmp_path):
    spec = DilutedSpec.from_seed(TwoBlockSpec(40, 4.0, 0.3), 0.5, 2)
    a = cached_exact_table(spec, tmp_path)
    b = cached_exact_table(spec, tmp_path)
    assert np.array_equal(a.logw, b.logw)
    assert len(list(tmp_path.iterdir())) == 1


def test_large_two_block_is_finite():
    t = exact_table(TwoBlockSpec(2000, 4.0, 2000 ** -0.5))
    assert np.isfinite(t.log_partition)
    assert t.prob.sum() == pytest.approx(1.0, abs=1e-12)


# --- wells -------------------------------------------------------------------

def test_full_cube_well():
    t = exact_table(TwoBlockSpec(20, 4.0, 0.3))
    rep = well_mass(t, WellSpec([[0.0, 0.0]], 1.0))
    assert rep.masses[0] == pytest.approx(1.0, abs=1e-14)
    assert rep.residual == 0.0


def test_well_overlap_rejected():
    with pytest.raises(WellOverlapError):
        WellSpec([[0.0, 0.0], [0.1, 0.1]], 0.1)
    WellSpec([[0.0, 0.0], [0.2, 0.0]], 0.1)


def test_boundary_ties_split():
    # plus-count grid of size 2: m in {-1, 0, 1}; two wells share the m1 = 0 line
    t = LogWeightTable((2, 2), np.zeros((3, 3)))
    rep = well_mass(t, WellSpec([[-0.5, 0.0], [0.5, 0.0]], (0.5, 1.0)))
    np.testing.assert_allclose(rep.masses, [0.5, 0.5])
    assert rep.residual == 0.0


def test_decoupled_four_wells():
    ms = m_star(2.0)
    wells = WellSpec([[ms, ms], [ms, -ms], [-ms, ms], [-ms, -ms]], 0.1)
    rep = well_mass(exact_table(TwoBlockSpec(400, 4.0, 0.0)), wells)
    assert np.all(np.abs(rep.masses - 0.25) <= 0.01)
    # flip images are bit-identical; the other pairs agree up to rounding
    assert rep.masses[0] == rep.masses[3] and rep.masses[1] == rep.masses[2]
    assert rep.masses[0] == pytest.approx(rep.masses[1], rel=1e-12)
    assert rep.residual < 1e-3


def test_residual_decreases_with_N():
    ms = m_star(2.0)
    wells = WellSpec([[ms, ms], [ms, -ms], [-ms, ms], [-ms, -ms]], 0.1)
    res = [well_mass(exact_table(TwoBlockSpec(N, 4.0, N ** -0.5)), wells).residual
           for N in (100, 200, 400)]
    assert res[0] > res[1] > res[2]
