import math

import numpy as np
import pytest

from lrw.closedform import (
    eigen_pair,
    l1_stationary,
    l2_constants,
    l2_kappa_partial_sum,
    l2_recurrence_test,
    mu_series,
)
from lrw.errors import NotPositiveRecurrent, NotSummable
from lrw.model import ProbRow, WalkSpec, state_independent, validate
from lrw.spectral import perron_root


def test_mu_series_l1():
    s = mu_series(state_independent(1 / 3, [2 / 3]), 5)
    # mu_1 = 1/q, then ratio p/q = 1/2
    np.testing.assert_allclose(s.mu, [1.0, 1.5, 0.75, 0.375, 0.1875, 0.09375])
    assert s.mu_total == pytest.approx(4.0, rel=1e-14)


def test_l1_pi0_quarter():
    assert l1_stationary(state_independent(1 / 3, [2 / 3]), 10)[0] == pytest.approx(0.25, rel=1e-14)


def test_l1_critical_not_summable():
    with pytest.raises(NotSummable):
        l1_stationary(state_independent(0.5, [0.5]))


def test_mu_series_with_head_rows():
    model = validate(WalkSpec(1, [ProbRow(0.5, (0.5,)), ProbRow(0.2, (0.8,))], ProbRow(0.4, (0.6,))))
    s = mu_series(model, 4)
    expected = [1.0, 1 / 0.5, 1 / 0.5 * 0.5 / 0.8, 1 / 0.5 * 0.5 / 0.8 * 0.2 / 0.6]
    np.testing.assert_allclose(s.mu[:4], expected)


@pytest.mark.parametrize("row", [(0.25, (0.25, 0.5)), (0.4, (0.3, 0.3)), (0.6, (0.3, 0.1)), (0.1, (0.0, 0.9))])
def test_eigen_pair_invariants(row):
    p, (q1, q2) = row
    ev = eigen_pair(ProbRow(p, (q1, q2)))
    assert ev.lambda1 * ev.lambda2 == pytest.approx(-q2 / p, abs=1e-12)
    assert ev.lambda1 + ev.lambda2 == pytest.approx((q1 + q2) / p, abs=1e-12)
    assert ev.lambda1 > 0 >= ev.lambda2 > -1
    assert ev.delta == pytest.approx(math.sqrt((q1 + q2) ** 2 + 4 * p * q2))


def test_l2_constants_example():
    const = l2_constants(ProbRow(0.25, (0.25, 0.5)))
    assert const.exit_two_below == pytest.approx(0.5615528128, rel=1e-9)
    assert const.expected_tau >= 1


def test_l2_tau_reduces_to_l1():
    # q2 = 0: delta = q1 and the formula collapses to 1/(q - p)
    p, q = 1 / 3, 2 / 3
    assert l2_constants(ProbRow(p, (q, 0.0))).expected_tau == pytest.approx(1 / (q - p), rel=1e-13)


def test_l2_constants_needs_strict_inequality():
    with pytest.raises(NotPositiveRecurrent):
        l2_constants(ProbRow(0.6, (0.2, 0.2)))


def test_recurrence_test_examples():
    assert l2_recurrence_test(ProbRow(0.4, (0.3, 0.3)))
    assert not l2_recurrence_test(ProbRow(0.6, (0.3, 0.1)))
    # equality case (raw row, not normalized): 0.3 + 0.2 = 0.5
    assert l2_recurrence_test(ProbRow(0.5, (0.3, 0.1)))


def test_recurrence_test_matches_perron_root():
    for p in np.linspace(0.05, 0.9, 15):
        for f in np.linspace(0.0, 1.0, 15):
            row = ProbRow(p, ((1 - p) * (1 - f), (1 - p) * f))
            if l2_recurrence_test(row):
                assert perron_root(row).lam >= 1.0
            else:
                rho = max(abs(np.linalg.eigvals(np.array([[row.q[0], row.q[1]], [p + row.q[0], row.q[1]]]) / p)))
                assert rho < 1.0


def test_kappa_closed_form_at_lambda_one():
    # drift 0 with L = 2 gives lambda1 = 1 and a linear leading term
    row = ProbRow(0.6, (0.2, 0.2))
    assert eigen_pair(row).lambda1 == pytest.approx(1.0, abs=1e-15)
    values = [l2_kappa_partial_sum(row, n) for n in range(1, 200)]
    assert np.all(np.diff(values) > 0)
