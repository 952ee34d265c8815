"""Chaos-expansion solvers for stochastic parabolic equations with singular potentials."""

__version__ = "0.1.0"

from .chaos import ChaosField, StochasticData, expand_inputs, kondratiev_norm, mean_variance, sample_realization, solve_propagator
from .grid import GridField, GridSpec
from .hermite import GaussianSample, draw_samples, eval_fourier_hermite, hermite_function, hermite_poly
from .multi_index import MultiIndex, TruncationSet, enumerate_indices, factorial, weight_2N, weight_partial_sum
from .parabolic import OperatorSpec, Trajectory, apriori_bound, solve_deterministic, trajectory_norms
from .regularization import (
    ModeratenessFit,
    MollifierSpec,
    PotentialSpec,
    UnderResolvedError,
    fit_power_law,
    mollifying_net,
    regularize,
    sup_norm_trace,
)
from .verification import (
    EpsilonSchedule,
    SolutionNet,
    StochasticProblem,
    build_very_weak_net,
    consistency_check,
    moderateness_check,
    monte_carlo_oracle,
    uniqueness_check,
)
