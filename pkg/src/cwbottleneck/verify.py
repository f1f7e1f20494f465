"""Self-checks: model invariants plus the scaled-down convergence experiments.

``verify_suite("full")`` runs every check at its reference scale;
``verify_suite("fast")`` caps N at 400 and chains at 1e5 sweeps. The fast
level only checks the qualitative trends, since the quantitative thresholds
are calibrated for the reference scale.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng
from .exact import (
    WellSpec,
    exact_table,
    gamma_star,
    log_binomial,
    log_tilted_expectation,
    pair_count_law,
    cross_term_value,
    curie_weiss_log_law,
    well_mass,
)
from .fixedpoint import m_of_c, m_star
from .harness import law_on_wells, tv_distance
from .models import DilutedSpec, MagnetizationPoint, ThreeBlockSpec, TwoBlockSpec
from .oracle import brute_force_prob
from .predictions import SIGNS3, Case, ScheduleSpec, a_weight, limit_law, sign_wells_centers
from .sampler import ChainConfig, detailed_balance_residual, run_chain, tv_to_table

LEVELS = ("fast", "full")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _level(level: str) -> str:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    return level


# --- 1 ---------------------------------------------------------------------

def small_specs(max_N: int = 12):
    """Every model variant at every admissible small size."""
    for N in range(4, max_N + 1, 2):
        yield TwoBlockSpec(N, 3.0, 0.7)
        L = N // 2
        for bits in itertools.product((0, 1), repeat=L):
            yield DilutedSpec(TwoBlockSpec(N, 3.0, 0.7), bits)
    for n in range(1, max_N // 2 + 1):
        for b in range(1, n + 1):
            if 2 * n + b <= max_N:
                yield ThreeBlockSpec(n, b, 1.5, 0.4)


def check_oracle(max_N: int = 12, tol: float = 1e-12) -> CheckResult:
    worst, count, where = 0.0, 0, None
    for spec in small_specs(max_N):
        err = float(np.max(np.abs(exact_table(spec).prob - brute_force_prob(spec))))
        count += 1
        if err > worst:
            worst, where = err, spec
    return CheckResult("oracle equivalence", worst <= tol,
                       f"{count} specs, max |p_exact - p_enum| = {worst:.2e} (tol {tol:g})",
                       {"max_error": worst, "specs": count, "worst": repr(where)})


# --- 2 ---------------------------------------------------------------------

def check_decoupled(tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for N in (10, 100, 400):
        L = N // 2
        # each block of size N/2 is a Curie-Weiss model at beta/2
        q = np.exp(curie_weiss_log_law(L, 2.0))
        t = exact_table(TwoBlockSpec(N, 4.0, 0.0))
        worst = max(worst, float(np.max(np.abs(t.prob - np.outer(q, q)))))
    for n, b in ((3, 2), (50, 10), (120, 30)):
        qo = np.exp(curie_weiss_log_law(n, 1.5))
        qm = np.exp(curie_weiss_log_law(b, 1.5))
        t = exact_table(ThreeBlockSpec(n, b, 1.5, 0.0))
        prod = qo[:, None, None] * qm[None, :, None] * qo[None, None, :]
        worst = max(worst, float(np.max(np.abs(t.prob - prod))))
    return CheckResult("decoupled factorization", worst <= tol,
                       f"max |p - product| = {worst:.2e} (tol {tol:g})", {"max_error": worst})


# --- 3, 4 ------------------------------------------------------------------

def random_admissible(count: int = 100, max_N: int = 2000, seed: int = 20240):
    rng = make_rng(seed, 7)
    out = []
    for _ in range(count):
        L = int(rng.integers(2, max_N // 2 + 1))
        a, b = (int(x) for x in rng.integers(0, L + 1, size=2))
        out.append((2 * L, 2 * a / L - 1, 2 * b / L - 1))
    return out


def check_pair_count(count: int = 100, tol: float = 1e-10) -> CheckResult:
    worst_sum, worst_arg = 0.0, 0.0
    for N, mu1, mu2 in random_admissible(count):
        law = pair_count_law(N, mu1, mu2)
        L = N // 2
        target = log_binomial(L, law.a) + log_binomial(L, law.b)
        worst_sum = max(worst_sum, abs(law.log_total - target))
        n_mode = int(law.n_values[np.argmax(law.log_counts)])
        worst_arg = max(worst_arg, abs(n_mode - gamma_star(mu1, mu2) * N / 4))
    ok = worst_sum <= tol and worst_arg <= 1
    return CheckResult("pair-count law", ok,
                       f"max log-total error {worst_sum:.2e} (tol {tol:g}), "
                       f"max |argmax - gamma* N/4| = {worst_arg:.3f} (tol 1)",
                       {"sum_error": worst_sum, "argmax_error": worst_arg})


def check_cross_term(count: int = 100) -> CheckResult:
    worst = 0.0
    for N, mu1, mu2 in random_admissible(count):
        n0 = int(round(gamma_star(mu1, mu2) * N / 4))
        S = cross_term_value(N, mu1, mu2, n0)
        worst = max(worst, abs(S - N * mu1 * mu2 / 2))
    # S moves in steps of 4 per pair, so rounding n shifts it by at most 2
    return CheckResult("cross-term identity", worst <= 2 + 1e-9,
                       f"max |S - N mu1 mu2 / 2| = {worst:.3f} (tol 2)", {"max_error": worst})


# --- 5, 6 ------------------------------------------------------------------

def _two_block_run(rho: float, Ns, eps: float = 0.1):
    sched = ScheduleSpec("two_block", 4.0, A=1.0, rho=rho)
    law = limit_law(sched)
    wells = WellSpec(sign_wells_centers(law), eps)
    lw = law_on_wells(law, wells)
    reps = []
    for N in Ns:
        rep = well_mass(exact_table(sched.spec_for(N)), wells)
        rep.tv = tv_distance(rep.masses, rep.residual, lw)
        reps.append(rep)
    return reps


def check_two_block_aligned(level: str = "full") -> CheckResult:
    Ns = (200, 400, 800, 1600) if _level(level) == "full" else (100, 200, 400)
    reps = _two_block_run(0.5, Ns)
    # wells in order ++, +-, -+, --
    aligned = [r.masses[0] + r.masses[3] for r in reps]
    inc = all(x < y for x, y in zip(aligned, aligned[1:]))
    if level == "full":
        ok = inc and aligned[-1] >= 0.90 and reps[-1].tv <= 0.10
    else:
        ok = inc and all(x.tv > y.tv for x, y in zip(reps, reps[1:]))
    detail = ", ".join(f"N={N}: aligned {a:.10f} TV {r.tv:.2e}" for N, a, r in zip(Ns, aligned, reps))
    return CheckResult("two-block aligned regime", ok, detail,
                       {"N": list(Ns), "aligned": aligned, "tv": [r.tv for r in reps]})


def check_two_block_decoupled(level: str = "full") -> CheckResult:
    Ns = (1600,) if _level(level) == "full" else (400,)
    rep = _two_block_run(1.5, Ns)[0]
    dev = float(np.max(np.abs(rep.masses - 0.25)))
    tol = 0.05 if level == "full" else 0.1
    ok = dev <= tol and rep.tv <= tol
    return CheckResult("two-block decoupled regime", ok,
                       f"N={Ns[0]}: masses {np.round(rep.masses, 4).tolist()}, "
                       f"max |mass - 1/4| {dev:.4f}, TV {rep.tv:.4f} (tol {tol})",
                       {"masses": rep.masses.tolist(), "tv": rep.tv})


# --- 7 ---------------------------------------------------------------------

def check_diluted(level: str = "full", seeds=range(5)) -> CheckResult:
    _level(level)
    Ns = (60, 90, 120)
    ms = m_star(2.0)
    wells = WellSpec([[ms, ms], [ms, -ms], [-ms, ms], [-ms, -ms]], 0.1)
    aligned = {}
    per_sample_ok = True
    for N in Ns:
        sched = ScheduleSpec("diluted", 4.0, A=1.0, rho=0.3, P=1.0, pi=0.4)
        row = []
        for s in seeds:
            m = well_mass(exact_table(sched.spec_for(N, mask_seed=s)), wells).masses
            row.append(m[0] + m[3])
            per_sample_ok &= m[0] + m[3] > m[1] + m[2]
        aligned[N] = row
    means = [float(np.mean(aligned[N])) for N in Ns]
    inc = all(x < y for x, y in zip(means, means[1:]))
    sched = ScheduleSpec("diluted", 4.0, A=1.0, rho=0.3, P=1.0, pi=0.9)
    dev = 0.0
    for s in seeds:
        m = well_mass(exact_table(sched.spec_for(120, mask_seed=s)), wells).masses
        dev = max(dev, float(np.max(np.abs(m - 0.25))))
    ok = per_sample_ok and inc and dev <= 0.1
    detail = (f"aligned > anti in every sample: {per_sample_ok}; mask-averaged aligned mass "
              + ", ".join(f"N={N}: {v:.4f}" for N, v in zip(Ns, means))
              + f"; decoupled max |mass - 1/4| at N=120: {dev:.4f} (tol 0.1)")
    return CheckResult("diluted regimes (quenched)", ok, detail,
                       {"aligned": {str(k): v for k, v in aligned.items()}, "means": means,
                        "decoupled_dev": dev})


# --- 8, 9 ------------------------------------------------------------------

def three_block_schedule(C: float | None = None, c: float | None = None,
                         B: float = 1.4, gamma: float = 0.5) -> ScheduleSpec:
    """Three-block schedule hitting a prescribed finite C or c."""
    if C is not None:
        return ScheduleSpec("three_block", 1.5, A=C / math.sqrt(B), rho=(1 + gamma) / 2,
                            B=B, gamma=gamma)
    return ScheduleSpec("three_block", 1.5, A=c * math.sqrt(B), rho=(1 - gamma) / 2,
                        B=B, gamma=gamma)


def check_phase_weights(level: str = "full", Cs=(0.5, 1.0, 2.0), tol: float = 0.05) -> CheckResult:
    N = 840 if _level(level) == "full" else 400
    parts, worst, sym_ok = [], 0.0, True
    for C in Cs:
        sched = three_block_schedule(C=C)
        law = limit_law(sched)
        # wells are the sign orthants; law atoms sit at their centers
        wells = WellSpec(law.atoms, m_star(1.5))
        table = exact_table(sched.spec_for(N))
        sym_ok &= bool(np.array_equal(table.logw, table.logw[::-1, ::-1, ::-1]))
        sym_ok &= bool(np.array_equal(table.logw, table.logw.transpose(2, 1, 0)))
        masses = well_mass(table, wells).masses
        index = {chi: i for i, chi in enumerate(SIGNS3)}
        for chi in SIGNS3:
            flip = tuple(-x for x in chi)
            swap = (chi[2], chi[1], chi[0])
            sym_ok &= masses[index[chi]] == masses[index[flip]] == masses[index[swap]]
        err = float(np.max(np.abs(masses - law.weights)))
        worst = max(worst, err)
        parts.append(f"C={C}: max error {err:.4f}")
    t = three_block_schedule(C=Cs[0]).spec_for(N)
    ok = worst <= (tol if level == "full" else 2 * tol) and sym_ok
    return CheckResult("three-block weighted sign law", ok,
                       f"sizes {t.sizes}; " + "; ".join(parts) + f"; symmetries exact: {sym_ok}",
                       {"max_error": worst, "symmetric": sym_ok})


def check_phase_field(level: str = "full", c: float = 1.0) -> CheckResult:
    N = 840 if _level(level) == "full" else 400
    sched = three_block_schedule(c=c)
    assert limit_law(sched).case == Case.PT_FIELD
    spec = sched.spec_for(N)
    table = exact_table(spec)
    m_ax = table.m_axes()
    pos1 = m_ax[0] > 0
    pos3 = m_ax[2] > 0
    p = table.prob[pos1][:, :, pos3].sum(axis=(0, 2))
    peak = float(m_ax[1][np.argmax(p)])
    target = m_of_c(1.5, c)
    step = 2.0 / spec.b
    tol = step + 0.02
    return CheckResult("three-block middle-block field", abs(peak - target) <= tol,
                       f"sizes {spec.sizes}, alpha {spec.alpha:.4f}: m2 peak {peak:.4f}, "
                       f"m(c) {target:.4f}, tol {tol:.3f}",
                       {"peak": peak, "m_c": target, "tol": tol})


# --- 10 --------------------------------------------------------------------

def tilted_error(N: int, exponent: float = 0.6) -> float:
    alpha = float(N) ** (-exponent)
    ms = m_star(2.0)
    L = N // 2
    # nearest admissible grid point to (m*, m*)
    mu1, mu2 = MagnetizationPoint((round((ms + 1) * L / 2),) * 2, (L, L)).m
    val = log_tilted_expectation(N, mu1, mu2, alpha)
    return abs(val - alpha * N * mu1 * mu2 / 2) / (alpha * N)


def check_tilted(level: str = "full") -> CheckResult:
    _level(level)
    Ns = (200, 400, 800)
    errs = [tilted_error(N) for N in Ns]
    ok = errs[-1] <= 0.05 and all(x > y for x, y in zip(errs, errs[1:]))
    return CheckResult("tilted expectation", ok,
                       ", ".join(f"N={N}: {e:.5f}" for N, e in zip(Ns, errs)) + " (tol 0.05)",
                       {"errors": errs})


# --- 11 --------------------------------------------------------------------

def mcmc_specs():
    base = TwoBlockSpec(8, 4.0, 0.5)
    return [base,
            DilutedSpec(TwoBlockSpec(12, 4.0, 0.5), (1, 0, 1, 1, 0, 1)),
            ThreeBlockSpec(4, 2, 1.5, 0.6)]


def check_detailed_balance(pairs: int = 10_000, tol: float = 1e-9) -> CheckResult:
    """pi(s) P(s -> s') = pi(s') P(s' -> s) on random (state, site) pairs, both dynamics."""
    worst = 0.0
    for k, spec in enumerate(mcmc_specs()):
        rng = make_rng(77, 3, k)
        states = np.where(rng.random((pairs, spec.N)) < 0.5, 1, -1)
        sites = rng.integers(0, spec.N, size=pairs)
        for dyn in ("glauber", "metropolis"):
            for s, i in zip(states, sites):
                worst = max(worst, detailed_balance_residual(spec, s, int(i), dyn))
    return CheckResult("detailed balance", worst <= tol,
                       f"{pairs} pairs per model and dynamics, max residual {worst:.2e} (tol {tol:g})",
                       {"max_residual": worst})


def check_mcmc(level: str = "full", pairs: int = 10_000) -> CheckResult:
    sweeps = 1_000_000 if _level(level) == "full" else 100_000
    tv_tol = 0.02 if level == "full" else 0.05
    db = check_detailed_balance(pairs)
    tvs = []
    for k, spec in enumerate(mcmc_specs()):
        traj = run_chain(spec, ChainConfig(seed=k, sweeps=sweeps, burn_in=1000))
        tvs.append(tv_to_table(traj, exact_table(spec)))
    ok = db.passed and max(tvs) <= tv_tol
    return CheckResult("MCMC correctness", ok,
                       f"max detailed-balance residual {db.values['max_residual']:.2e} (tol 1e-9); "
                       f"TV {', '.join(f'{t:.4f}' for t in tvs)} (tol {tv_tol})",
                       {"db": db.values["max_residual"], "tv": tvs})


# --- 12 --------------------------------------------------------------------

def check_prediction_algebra() -> CheckResult:
    beta = 1.5
    Cs = [0.0, math.inf] + list(np.logspace(-3, 3, 48))
    worst = max(abs(math.fsum(a_weight(*chi, C, beta) for chi in SIGNS3) - 1.0) for C in Cs)
    free = limit_law(ScheduleSpec("three_block", beta, rho=1.0, gamma=0.5))
    aligned = limit_law(ScheduleSpec("three_block", beta, rho=0.5, gamma=0.5))
    ms = m_star(beta)
    atoms = np.array([[s1 * ms, s2 * ms, s3 * ms] for s1, s2, s3 in SIGNS3])
    zero_ok = (free.case == Case.BS_FREE and np.array_equal(free.atoms, atoms)
               and all(a_weight(*chi, 0.0, beta) == w for chi, w in zip(SIGNS3, free.weights)))
    inf_w = {chi: a_weight(*chi, math.inf, beta) for chi in SIGNS3}
    inf_ok = aligned.case == Case.BS_ALIGNED
    for chi in SIGNS3:
        atom = np.array(chi, dtype=float) * ms
        inf_ok &= inf_w[chi] == aligned.weight_at(atom, tol=0.0)
    ok = worst <= 1e-12 and zero_ok and inf_ok
    return CheckResult("prediction-layer algebra", ok,
                       f"max |sum a - 1| over {len(Cs)} C values {worst:.1e}; "
                       f"C=0 limit exact: {zero_ok}; C=inf limit exact: {inf_ok}",
                       {"sum_error": worst})


# --- suite -----------------------------------------------------------------

CRITERIA = {
    1: lambda level: check_oracle(),
    2: lambda level: check_decoupled(),
    3: lambda level: check_pair_count(),
    4: lambda level: check_cross_term(),
    5: check_two_block_aligned,
    6: check_two_block_decoupled,
    7: check_diluted,
    8: check_phase_weights,
    9: check_phase_field,
    10: check_tilted,
    11: check_mcmc,
    12: lambda level: check_prediction_algebra(),
}


def run_criterion(k: int, level: str = "full") -> CheckResult:
    t0 = time.perf_counter()
    res = CRITERIA[k](level)
    res.name = f"{k:2d}. {res.name}"
    res.seconds = time.perf_counter() - t0
    return res


def verify_suite(level: str = "fast", criteria=None, echo=None) -> list[CheckResult]:
    out = []
    for k in criteria or sorted(CRITERIA):
        res = run_criterion(k, level)
        if echo:
            echo(res.line())
        out.append(res)
    return out
