"""Stationary distribution and passage times of the (L,1)-reflecting random walk."""

from lrw.branching import Classification, Verdict, classify, kappa_partial_sums, lower_mean_matrix
from lrw.closedform import eigen_pair, l1_stationary, l2_constants, mu_series
from lrw.model import (
    ProbRow,
    ValidatedModel,
    WalkSpec,
    load_model,
    shipped_models,
    state_independent,
    transition_row,
    validate,
)
from lrw.passage import (
    abg,
    exit_probabilities_closed,
    exit_probabilities_limit,
    expected_ascent,
    expected_tau,
    upper_mean_matrix,
)
from lrw.spectral import hitting_root, in_domain, limit_matrix, perron_root
from lrw.stationary import expected_return, stationary_distribution, tail_rate

__all__ = [
    "Classification",
    "ProbRow",
    "ValidatedModel",
    "Verdict",
    "WalkSpec",
    "abg",
    "classify",
    "eigen_pair",
    "exit_probabilities_closed",
    "exit_probabilities_limit",
    "expected_ascent",
    "expected_return",
    "expected_tau",
    "hitting_root",
    "in_domain",
    "kappa_partial_sums",
    "l1_stationary",
    "l2_constants",
    "limit_matrix",
    "load_model",
    "lower_mean_matrix",
    "mu_series",
    "perron_root",
    "shipped_models",
    "stationary_distribution",
    "state_independent",
    "tail_rate",
    "transition_row",
    "upper_mean_matrix",
    "validate",
]
