"""Convergence experiments: well masses of the finite-N Gibbs law against the
predicted limit law, over a list of system sizes.

Every output except ``timings.csv`` is a pure function of the configuration,
so two runs with the same config write byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._rng import CONFIG_STREAM, make_rng
from .exact import (
    DEFAULT_BUDGET,
    Budget,
    LogWeightTable,
    WellSpec,
    exact_table,
    well_mass,
    within_budget,
)
from .fixedpoint import m_star
from .models import DilutedSpec, ModelSpec, spec_to_dict
from .predictions import (
    LimitLaw,
    RegimeClassification,
    ScheduleSpec,
    UncoveredRegime,
    classify,
    limit_law,
    sign_wells_centers,
)
from .sampler import ChainConfig, run_chain
from .svgplot import line_plot


THREADS_ENV = "CWB_THREADS"
DEFAULT_EPS = 0.1


class WellMismatch(ValueError):
    pass


def tv_distance(masses, residual: float, law_weights) -> float:
    """TV between the well-coarsened finite-N law and a limit law on the same wells.

    Mass outside every well has no counterpart in the limit law, so it
    contributes half of itself.
    """
    masses = np.asarray(masses, dtype=np.float64)
    law_weights = np.asarray(law_weights, dtype=np.float64)
    if masses.shape != law_weights.shape:
        raise WellMismatch(f"{masses.size} well masses against {law_weights.size} law weights")
    if residual < 0:
        raise ValueError("residual mass must be >= 0")
    return 0.5 * float(np.abs(masses - law_weights).sum()) + 0.5 * float(residual)


def law_on_wells(law: LimitLaw, wells: WellSpec) -> np.ndarray:
    """Limit-law weight carried by each well; every atom must sit in exactly one well."""
    w = wells.widths
    out = np.zeros(len(wells.centers))
    for atom, weight in zip(law.atoms, law.weights):
        inside = np.all(np.abs(wells.centers - atom) <= w + 1e-12, axis=1)
        if inside.sum() != 1:
            raise WellMismatch(f"atom {atom.tolist()} lies in {int(inside.sum())} wells")
        out[inside] += weight
    return out


def default_centers(schedule: ScheduleSpec, law: LimitLaw | None) -> np.ndarray:
    """Sign-combination wells around the predicted atoms.

    Without a limit law (uncovered regime) the Curie-Weiss magnetizations of
    the isolated blocks are used.
    """
    if law is not None:
        return sign_wells_centers(law)
    if schedule.model == "three_block":
        ms = m_star(schedule.beta)
        return sign_wells_centers(LimitLaw([[ms, ms, ms]], [1.0]))
    ms = m_star(schedule.beta / 2)
    return sign_wells_centers(LimitLaw([[ms, ms]], [1.0]))


@dataclass
class ExperimentConfig:
    schedule: ScheduleSpec
    N_list: tuple[int, ...]
    method: str = "auto"
    wells: object = "from-prediction"
    wells_eps: float = DEFAULT_EPS
    output_dir: str | None = None
    seeds: tuple[int, ...] = (0,)
    sweeps: int = 100_000
    burn_in: int | None = None
    dynamics: str = "glauber"
    budget: Budget = field(default_factory=lambda: DEFAULT_BUDGET)

    def __post_init__(self):
        if self.method not in ("exact", "mcmc", "auto"):
            raise ValueError("method must be exact, mcmc or auto")
        self.N_list = tuple(int(n) for n in self.N_list)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.N_list or not self.seeds:
            raise ValueError("need at least one N and one seed")
        if any(x >= y for x, y in zip(self.N_list, self.N_list[1:])):
            raise ValueError("N_list must be strictly increasing")

    def to_dict(self) -> dict:
        wells = self.wells if isinstance(self.wells, str) else np.asarray(self.wells).tolist()
        return {
            "schedule": self.schedule.to_dict(),
            "N_list": list(self.N_list),
            "method": self.method,
            "wells": wells,
            "wells_eps": self.wells_eps,
            "seeds": list(self.seeds),
            "sweeps": self.sweeps,
            "burn_in": self.burn_in,
            "dynamics": self.dynamics,
            "budget": asdict(self.budget),
        }

    @classmethod
    def from_dict(cls, d: dict, output_dir=None) -> "ExperimentConfig":
        d = dict(d)
        sched = ScheduleSpec(**d.pop("schedule"))
        budget = Budget(**d.pop("budget")) if "budget" in d else DEFAULT_BUDGET
        return cls(sched, budget=budget, output_dir=output_dir, **d)


@dataclass
class ConvergenceRow:
    N: int
    seed: int
    method: str
    masses: np.ndarray
    residual: float
    tv: float | None
    M: int | None = None
    wall_time: float = 0.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    classification: RegimeClassification
    law: LimitLaw | None
    wells: WellSpec
    rows: list[ConvergenceRow]

    def rows_for(self, N: int) -> list[ConvergenceRow]:
        return [r for r in self.rows if r.N == N]

    def mean_masses(self, N: int) -> np.ndarray:
        return np.mean([r.masses for r in self.rows_for(N)], axis=0)

    def mean_tv(self, N: int) -> float | None:
        tvs = [r.tv for r in self.rows_for(N)]
        return None if any(t is None for t in tvs) else float(np.mean(tvs))


def _initial_spins(spec: ModelSpec, center, seed: int, index: int) -> np.ndarray:
    """Random configuration whose block magnetizations are nearest to ``center``."""
    rng = make_rng(seed, CONFIG_STREAM, 1000 + index)
    parts = []
    for size, m in zip(spec.sizes, center):
        k = int(round((m + 1) * size / 2))
        block = np.where(np.arange(size) < k, 1, -1)
        parts.append(rng.permutation(block))
    return np.concatenate(parts).astype(np.int64)


def mcmc_table(spec: ModelSpec, centers, sweeps: int, seed: int, burn_in=None,
               dynamics: str = "glauber") -> LogWeightTable:
    """Empirical law from one chain started in each well, averaged and flip-symmetrized."""
    burn = sweeps // 10 if burn_in is None else burn_in
    hist = None
    for i, c in enumerate(centers):
        chain = ChainConfig(seed, sweeps, burn, 1, dynamics, chain_index=i)
        h = run_chain(spec, chain, init=_initial_spins(spec, c, seed, i)).histogram()
        hist = h if hist is None else hist + h
    hist = hist / len(centers)
    hist = 0.5 * (hist + hist[(slice(None, None, -1),) * hist.ndim])
    with np.errstate(divide="ignore"):
        return LogWeightTable(spec.sizes, np.log(hist))


def _choose_method(cfg: ExperimentConfig, spec: ModelSpec) -> str:
    if cfg.method != "auto":
        return cfg.method
    return "exact" if within_budget(spec, cfg.budget) else "mcmc"


def _one(cfg: ExperimentConfig, N: int, seed: int, wells: WellSpec, law_w) -> ConvergenceRow:
    t0 = time.perf_counter()
    spec = cfg.schedule.spec_for(N, mask_seed=seed)
    method = _choose_method(cfg, spec)
    if method == "exact":
        table = exact_table(spec, cfg.budget)
    else:
        table = mcmc_table(spec, wells.centers, cfg.sweeps, seed, cfg.burn_in, cfg.dynamics)
    rep = well_mass(table, wells)
    tv = None if law_w is None else tv_distance(rep.masses, rep.residual, law_w)
    M = spec.M if isinstance(spec, DilutedSpec) else None
    return ConvergenceRow(N, seed, method, rep.masses, rep.residual, tv, M, time.perf_counter() - t0)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_wells(cfg: ExperimentConfig, law: LimitLaw | None) -> WellSpec:
    if isinstance(cfg.wells, WellSpec):
        return cfg.wells
    if isinstance(cfg.wells, str):
        if cfg.wells != "from-prediction":
            raise ValueError(f"unknown wells option {cfg.wells!r}")
        centers = default_centers(cfg.schedule, law)
    else:
        centers = np.asarray(cfg.wells, dtype=np.float64)
    return WellSpec(centers, cfg.wells_eps)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    reg = classify(cfg.schedule)
    try:
        law = limit_law(cfg.schedule)
    except UncoveredRegime:
        law = None
    wells = build_wells(cfg, law)
    law_w = None if law is None else law_on_wells(law, wells)
    # quenched samples only differ for the diluted model
    seeds = cfg.seeds if cfg.schedule.model == "diluted" or cfg.method != "exact" else cfg.seeds[:1]
    tasks = [(N, s) for N in cfg.N_list for s in seeds]
    if any(_choose_method(cfg, cfg.schedule.spec_for(N, s)) == "mcmc" for N, s in tasks):
        warnings.warn("using well-seeded MCMC estimates; large-N well-mass "
                      "ratios are only claimed for the exact method",
                      RuntimeWarning, stacklevel=2)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda t: _one(cfg, t[0], t[1], wells, law_w), tasks))
    for r in rows:
        if abs(r.masses.sum() + r.residual - 1.0) > 1e-9:
            raise RuntimeError(f"mass not conserved at N={r.N}: {r.masses.sum() + r.residual}")
    res = ExperimentResult(cfg, reg, law, wells, rows)
    if cfg.output_dir:
        write_outputs(res, cfg.output_dir)
    return res


# --- output ----------------------------------------------------------------

def _g(x) -> str:
    return "" if x is None else f"{x:.12g}"


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def rows_csv(res: ExperimentResult) -> str:
    K = len(res.wells.centers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "seed", "M", "method"] + [f"mass_{i + 1}" for i in range(K)]
               + ["residual", "tv"])
    for r in res.rows:
        w.writerow([r.N, r.seed, "" if r.M is None else r.M, r.method]
                   + [_g(m) for m in r.masses] + [_g(r.residual), _g(r.tv)])
    return buf.getvalue()


def report_dict(res: ExperimentResult) -> dict:
    reg = res.classification
    return _jsonable({
        "config": res.config.to_dict(),
        "classification": {
            "case": reg.case.value,
            "covered": reg.covered,
            "limit_constants": reg.limit_constants,
            "reason": reg.reason,
            "as_convergence_plausible": reg.as_convergence_plausible,
        },
        "limit_law": None if res.law is None else {
            "atoms": res.law.atoms.tolist(), "weights": res.law.weights.tolist(), **res.law.meta},
        "wells": {"centers": res.wells.centers.tolist(), "half_width": res.wells.widths.tolist()},
        "rows": [{"N": r.N, "seed": r.seed, "M": r.M, "method": r.method,
                  "masses": [float(f"{m:.12g}") for m in r.masses],
                  "residual": float(f"{r.residual:.12g}"),
                  "tv": None if r.tv is None else float(f"{r.tv:.12g}")} for r in res.rows],
        "example_spec": spec_to_dict(res.config.schedule.spec_for(res.config.N_list[0])),
    })


def write_outputs(res: ExperimentResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "convergence.csv"), "w", newline="") as fh:
        fh.write(rows_csv(res))
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report_dict(res), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(_jsonable(res.config.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    Ns = list(res.config.N_list)
    tvs = [res.mean_tv(N) for N in Ns]
    tv_series = {} if res.law is None else {"TV": (Ns, tvs)}
    with open(os.path.join(out_dir, "tv_vs_N.svg"), "w") as fh:
        fh.write(line_plot(tv_series, "TV distance to the limit law", "N", "TV", logx=True))
    mass_series = {}
    for i, c in enumerate(res.wells.centers):
        label = "(" + ", ".join(f"{v:+.3f}" for v in c) + ")"
        mass_series[label] = (Ns, [res.mean_masses(N)[i] for N in Ns])
    mass_series["residual"] = (Ns, [np.mean([r.residual for r in res.rows_for(N)]) for N in Ns])
    with open(os.path.join(out_dir, "masses_vs_N.svg"), "w") as fh:
        fh.write(line_plot(mass_series, "Well masses", "N", "mass", logx=True))
    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "seed", "wall_time_s"])
        for r in res.rows:
            w.writerow([r.N, r.seed, f"{r.wall_time:.3f}"])
