"""Curie-Weiss block models coupled through a bottleneck interaction.

Exact finite-N laws of the block magnetizations, a single-spin-flip sampler,
fixed-point solvers and the predicted N -> infinity limit laws.
"""

from .exact import (
    Budget,
    BudgetExceeded,
    LogWeightTable,
    PairCountLaw,
    WellMassReport,
    WellOverlapError,
    WellSpec,
    cross_term,
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
from .fixedpoint import free_energy, m_of_c, m_star, solve_cw, solve_cw_field
from .harness import ExperimentConfig, run_experiment, tv_distance
from .models import (
    DilutedSpec,
    MagnetizationPoint,
    SpecError,
    SpinConfig,
    ThreeBlockSpec,
    TwoBlockSpec,
    energy,
    energy_diluted,
    energy_three_block,
    energy_two_block,
    magnetization,
)
from .predictions import Case, LimitLaw, ScheduleSpec, a_weight, classify, limit_law
from .sampler import ChainConfig, Trajectory, run_chain, sample_mask

__version__ = "0.1.0"
