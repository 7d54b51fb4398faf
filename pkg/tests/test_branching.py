import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrw.branching import (
    ScaledProduct,
    Verdict,
    ascent_weights,
    classify,
    kappa_partial_sums,
    kappa_terms_log,
    lower_mean_matrix,
    lower_product,
)
from lrw.closedform import l2_kappa_partial_sum
from lrw.errors import HorizonTooLarge
from lrw.model import ProbRow, WalkSpec, state_independent, validate
from lrw.oracle.linalg import theta_oracle


def test_l2_regular_matrix():
    model = state_independent(0.25, [0.25, 0.5])
    np.testing.assert_allclose(lower_mean_matrix(model, 5), [[1.0, 2.0], [2.0, 2.0]])


def test_l2_folded_first_matrix():
    model = validate(WalkSpec(2, [ProbRow(0.5, (0.3, 0.2))], ProbRow(0.4, (0.3, 0.3))))
    np.testing.assert_allclose(lower_mean_matrix(model, 1), [[1.0, 0.0], [2.0, 0.0]])


def test_l1_matrix_is_ratio():
    model = state_independent(0.4, [0.6])
    np.testing.assert_allclose(lower_mean_matrix(model, 3), [[1.5]])


def test_l3_structure():
    p, q = 0.2, (0.3, 0.4, 0.1)
    M = lower_mean_matrix(state_independent(p, q), 7)
    base = np.tile(np.array(q) / p, (3, 1))
    base[1, 0] += 1
    base[2, 1] += 1
    np.testing.assert_allclose(M, base)


def test_ascent_weights():
    np.testing.assert_array_equal(ascent_weights(3), [2.0, 1.0, 1.0])


def test_scaled_product_matches_direct():
    rng = np.random.default_rng(3)
    mats = [rng.uniform(0, 3, (3, 3)) for _ in range(40)]
    sp = ScaledProduct.identity(3)
    direct = np.eye(3)
    for M in mats:
        sp = sp.left_multiply(M)
        direct = M @ direct
    np.testing.assert_allclose(sp.value(), direct, rtol=1e-10)
    assert 0 < np.max(np.abs(sp.matrix)) <= 1.0


def test_lower_product_orders_factors():
    model = validate(WalkSpec(2, [ProbRow(0.5, (0.3, 0.2)), ProbRow(0.3, (0.3, 0.4))], ProbRow(0.4, (0.3, 0.3))))
    direct = lower_mean_matrix(model, 3) @ lower_mean_matrix(model, 2) @ lower_mean_matrix(model, 1)
    np.testing.assert_allclose(lower_product(model, 3).value(), direct, rtol=1e-12)


def test_kappa_l1_transient_limit():
    # terms (q/p)^k, k >= 1: the sum from k = 1 is 2 (3 once the visit at time 0 is counted)
    sums = kappa_partial_sums(state_independent(0.6, [0.4]), 200)
    assert sums[-1] == pytest.approx(2.0, rel=1e-12)
    assert 1.0 + sums[-1] == pytest.approx(3.0, rel=1e-12)


def test_kappa_l1_critical_grows_linearly():
    sums = kappa_partial_sums(state_independent(0.5, [0.5]), 50)
    np.testing.assert_allclose(sums, np.arange(1, 51))


def test_kappa_l2_geometric_rate():
    model = state_independent(0.25, [0.25, 0.5])
    terms = np.exp(kappa_terms_log(model, 60))
    lam1 = (0.75 + math.sqrt(0.75**2 + 0.5)) / 0.5
    assert terms[-1] / terms[-2] == pytest.approx(lam1, rel=1e-12)
    assert lam1 == pytest.approx(3.5615528, rel=1e-7)


@pytest.mark.parametrize("row", [(0.25, (0.25, 0.5)), (0.4, (0.3, 0.3)), (0.6, (0.3, 0.1)), (0.6, (0.2, 0.2))])
def test_kappa_matches_eigen_closed_form(row):
    model = state_independent(row[0], row[1])
    sums = kappa_partial_sums(model, 50)
    for n in range(1, 51):
        assert sums[n - 1] == pytest.approx(l2_kappa_partial_sum(model.tail, n), rel=1e-8)


def test_kappa_terms_are_theta_means():
    model = validate(WalkSpec(2, [ProbRow(0.5, (0.3, 0.2)), ProbRow(0.45, (0.35, 0.2))], ProbRow(0.4, (0.3, 0.3))))
    terms = np.exp(kappa_terms_log(model, 12))
    for n in range(2, 14):
        assert theta_oracle(model, n) == pytest.approx(terms[n - 2], rel=1e-10)


def test_horizon_too_large_reports_partial():
    model = state_independent(0.05, [0.45, 0.5])
    with pytest.raises(HorizonTooLarge) as info:
        kappa_partial_sums(model, 10_000)
    partial = info.value.partial
    assert 0 < len(partial) < 10_000
    assert np.all(np.diff(partial) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0.0, 1.0))
def test_kappa_nondecreasing(p, f):
    model = state_independent(p, [(1 - p) * (1 - f), (1 - p) * f])
    try:
        sums = kappa_partial_sums(model, 200)
    except HorizonTooLarge as exc:
        sums = exc.partial
    assert np.all(np.diff(sums) >= 0)


def test_classify_examples():
    assert classify(state_independent(0.4, [0.3, 0.3])).verdict == Verdict.POSITIVE_RECURRENT
    assert classify(state_independent(0.5, [0.5])).verdict == Verdict.NULL_RECURRENT
    c = classify(state_independent(0.6, [0.3, 0.1]))
    assert c.verdict == Verdict.TRANSIENT
    assert not c.recurrent


def test_classify_boundary_flag():
    c = classify(state_independent(0.6, [0.2, 0.2]), horizon=2000)
    assert c.boundary_case
    assert c.verdict == Verdict.NULL_RECURRENT
    assert not classify(state_independent(0.5, [0.5])).boundary_case


def test_classify_uses_tail_not_head():
    head = [ProbRow(0.9, (0.05, 0.05))] * 5
    model = validate(WalkSpec(2, head, ProbRow(0.4, (0.3, 0.3))))
    c = classify(model)
    assert c.verdict == Verdict.POSITIVE_RECURRENT
    assert c.evidence["tail_drift"] == pytest.approx(0.5)
    assert c.evidence["tail_spectral_radius"] > 1


def test_transient_kappa_converges():
    c = classify(state_independent(0.6, [0.3, 0.1]), horizon=3000)
    assert not c.evidence["kappa_truncated"]
    assert c.evidence["tail_spectral_radius"] < 1
    sums = kappa_partial_sums(state_independent(0.6, [0.3, 0.1]), 3000)
    assert sums[-1] - sums[-100] < 1e-10 * sums[-1]
