import math

import numpy as np
import pytest
from conftest import random_model

from lrw.closedform import l1_stationary
from lrw.errors import NotPositiveRecurrent, TailNotInD
from lrw.model import ProbRow, WalkSpec, load_model, shipped_models, state_independent, transition_row, validate
from lrw.oracle import simulate as sim
from lrw.oracle.linalg import truncated_stationary
from lrw.passage import expected_ascent, expected_tau, solver_for
from lrw.stationary import expected_return, stationary_distribution, tail_rate


def test_return_to_zero_l1():
    b = expected_return(state_independent(1 / 3, [2 / 3]), 0)
    assert b.total == pytest.approx(4.0, rel=1e-10)
    assert b.e_tau_next == pytest.approx(3.0, rel=1e-10)


def test_l2_return_decomposition():
    model = load_model(shipped_models()["l2_varying"])
    solver = solver_for(model)
    for i in range(1, 9):
        b = expected_return(model, i)
        p = model.row(i).p
        q1, q2 = model.folded_q(i)
        back_two = solver.exit_split(i + 1).to_im2
        total = 1 + p * expected_tau(model, i + 1)
        total += (q1 + q2 + p * back_two) * expected_ascent(model, i - 1)
        if i >= 2:
            total += q2 * expected_ascent(model, i - 2)
        assert b.total == pytest.approx(total, rel=1e-13)


def test_pi_times_return_is_one():
    res = stationary_distribution(load_model(shipped_models()["l3_varying"]), i_max=30)
    for pi, b in zip(res.pi, res.breakdowns):
        assert pi * b.total == pytest.approx(1.0, rel=1e-14)
        assert b.total >= 1


def test_l1_stationary_matches_mu():
    model = validate(WalkSpec(1, [ProbRow(0.5, (0.5,)), ProbRow(0.6, (0.4,))], ProbRow(1 / 3, (2 / 3,))))
    pi = stationary_distribution(model, i_max=100).pi
    np.testing.assert_allclose(pi, l1_stationary(model, 100), rtol=1e-10)


def test_l2_example_against_truncation():
    model = state_independent(0.5, [0.3, 0.2])
    pi = stationary_distribution(model, i_max=50).pi
    hat = truncated_stationary(model, 400).pi_hat[:51]
    assert np.max(np.abs(pi - hat)) < 1e-8


@pytest.mark.parametrize("L", [1, 2, 3, 4])
def test_random_models_against_truncation(L):
    rng = np.random.default_rng(100 + L)
    model = random_model(rng, L, K=6, min_drift=0.2)
    pi = stationary_distribution(model, i_max=50).pi
    hat = truncated_stationary(model, 400).pi_hat[:51]
    assert np.max(np.abs(pi - hat)) < 1e-8


def test_normalization_report():
    for name in ("birth_death", "l2_constant", "l2_varying", "l3_varying"):
        res = stationary_distribution(load_model(shipped_models()[name]))
        assert res.norm_residual < 1e-6, name
        assert np.all((res.pi > 0) & (res.pi < 1))


def test_balance_equations():
    model = load_model(shipped_models()["l2_varying"])
    top = 60
    pi = stationary_distribution(model, i_max=top + model.L + 1).pi
    inflow = np.zeros(len(pi) + 1)
    for j in range(len(pi)):
        for t, prob in transition_row(model, j).entries:
            inflow[t] += pi[j] * prob
    np.testing.assert_allclose(inflow[1:top], pi[1:top], atol=1e-8)


def test_log_ratio_converges_to_rate():
    model = state_independent(0.25, [0.25, 0.5])
    res = stationary_distribution(model, i_max=100)
    ratios = np.diff(res.log_pi)
    assert abs(ratios[-1] - ratios[-2]) < 1e-4
    assert ratios[-1] == pytest.approx(-math.log(3.5615528128), abs=1e-4)


def test_tail_rate_examples():
    tr = tail_rate(state_independent(1 / 3, [2 / 3]))
    assert tr.rate == pytest.approx(-math.log(2), abs=1e-12)
    tr = tail_rate(state_independent(0.25, [0.25, 0.5]))
    assert tr.rate == pytest.approx(-1.2702, abs=1e-4)
    assert tr.empirical_slope == pytest.approx(tr.rate, rel=0.01)


def test_not_positive_recurrent_rejected():
    with pytest.raises(NotPositiveRecurrent):
        stationary_distribution(state_independent(0.6, [0.3, 0.1]))
    with pytest.raises(NotPositiveRecurrent):
        expected_return(state_independent(0.6, [0.2, 0.2]), 2)
    with pytest.raises(TailNotInD):
        tail_rate(state_independent(0.5, [0.5]))


def test_return_time_monte_carlo():
    model = state_independent(0.4, [0.3, 0.3])
    for i, seed in ((0, 1), (3, 2)):
        exact = expected_return(model, i).total
        est = sim.mean_passage(model, i, sim.RETURN, 10**6, seed)
        assert est.censored == 0
        assert est.within(exact, 3.0)
