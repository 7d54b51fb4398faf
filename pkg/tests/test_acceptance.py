"""Acceptance criteria, one test per criterion at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from conftest import random_model, random_row

from lrw.branching import Verdict, classify, kappa_terms_log
from lrw.closedform import l1_stationary, l2_constants
from lrw.model import ProbRow, WalkSpec, load_model, shipped_models, state_independent, validate
from lrw.oracle import simulate as sim
from lrw.oracle.linalg import (
    absorption_solve,
    ascent_oracle,
    harmonic_residual,
    harmonic_solution,
    truncated_stationary,
)
from lrw.passage import exit_probabilities_closed, expected_ascent, expected_tau, solver_for
from lrw.spectral import hitting_polynomial, perron_root
from lrw.stationary import stationary_distribution, tail_rate


def _l2_models(n=10, seed=11):
    rng = np.random.default_rng(seed)
    return [random_model(rng, 2, K=int(rng.integers(0, 8))) for _ in range(n)]


def test_ac01_l1_closed_form():
    model = state_independent(1 / 3, [2 / 3])
    solver_for.cache_clear()
    t0 = time.perf_counter()
    pi = stationary_distribution(model, i_max=100).pi
    elapsed = time.perf_counter() - t0
    assert abs(pi[0] - 0.25) < 1e-10
    ref = l1_stationary(model, 100)
    assert np.max(np.abs(pi - ref) / ref) < 1e-10
    assert elapsed < 1.0


def test_ac02_truncation_oracle_equivalence():
    models = _l2_models()
    solver_for.cache_clear()
    t0 = time.perf_counter()
    worst = 0.0
    for model in models:
        assert model.tail.drift > 0.05
        pi = stationary_distribution(model, i_max=50).pi
        hat = truncated_stationary(model, 400).pi_hat[:51]
        worst = max(worst, float(np.max(np.abs(pi - hat))))
    elapsed = time.perf_counter() - t0
    assert worst < 1e-8
    assert elapsed < 10.0


def test_ac03_exit_probability_identity():
    models = _l2_models() + [load_model(shipped_models()[k]) for k in ("l2_varying", "l2_constant")]
    for model in models:
        pairs = [(i, n) for i in range(1, 6) for n in range(i, i + 10)]
        assert len(pairs) == 50
        worst = 0.0
        for i, n in pairs:
            closed = np.array(exit_probabilities_closed(model, i, n).probs)
            oracle = absorption_solve(model, i, n).exit_probs
            worst = max(worst, float(np.max(np.abs(closed - oracle))))
        assert worst < 1e-10


def _close(a, b, tol=1e-8):
    return abs(a - b) <= tol * max(1.0, abs(b))


def test_ac04_expected_time_identities():
    model = load_model(shipped_models()["l2_varying"])
    for i in range(1, 8):
        oracle_tau = absorption_solve(model, i, i + 600, top="absorb").expected_time
        assert _close(expected_tau(model, i), oracle_tau)
        assert _close(expected_ascent(model, i), ascent_oracle(model, i)[i])
    n = 10**6
    for i, seed in ((1, 101), (2, 102), (5, 103)):
        tau = sim.mean_passage(model, i, sim.TAU, n, seed)
        assert tau.censored == 0
        assert tau.within(expected_tau(model, i), 3.0)
        up = sim.mean_passage(model, i, sim.ASCENT, n, seed + 50)
        assert up.censored == 0
        assert up.within(expected_ascent(model, i), 3.0)


TAIL_MODELS = [
    (1, state_independent(1 / 3, [2 / 3])),
    (1, validate(WalkSpec(1, [ProbRow(0.5, (0.5,)), ProbRow(0.6, (0.4,))], ProbRow(0.4, (0.6,))))),
    (2, state_independent(0.4, [0.3, 0.3])),
    (2, validate(WalkSpec(2, [ProbRow(0.5, (0.3, 0.2))], ProbRow(0.25, (0.25, 0.5))))),
    (3, state_independent(0.45, [0.25, 0.2, 0.1])),
]


def test_ac05_tail_rate():
    for L, model in TAIL_MODELS:
        assert model.L == L
        tr = tail_rate(model, window=(30, 80))
        assert abs(tr.empirical_slope / tr.rate - 1.0) < 0.01
        if L == 1:
            p = model.tail.p
            assert abs(tr.rate - (-math.log((1 - p) / p))) < 1e-10


def _inequality_verdict(p, q1, q2):
    gap = q1 + 2 * q2 - p
    if gap > 1e-12:
        return Verdict.POSITIVE_RECURRENT
    if gap < -1e-12:
        return Verdict.TRANSIENT
    return None  # boundary


def test_ac06_recurrence_trichotomy():
    rows = []
    for p in np.linspace(0.05, 0.9, 20):
        for f in np.linspace(0.0, 1.0, 20):
            rows.append((p, (1 - p) * (1 - f), (1 - p) * f))
    boundary = [(p, 2 - 3 * p, 2 * p - 1) for p in np.linspace(0.5, 2 / 3, 10)]
    for p, q1, q2 in rows + boundary:
        c = classify(state_independent(p, [q1, q2]), horizon=2000)
        expected = _inequality_verdict(p, q1, q2)
        if expected is None:
            assert c.boundary_case
            assert c.verdict != Verdict.POSITIVE_RECURRENT
            assert c.recurrent or c.verdict == Verdict.INCONCLUSIVE
        else:
            assert c.verdict == expected
    n_boundary = sum(_inequality_verdict(*r) is None for r in boundary)
    assert n_boundary == 10


def test_ac07_spectral_consistency():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        L = int(rng.integers(1, 7))
        row = random_row(rng, L, min_drift=1e-6)
        r = perron_root(row)
        assert abs(r.lam_power - r.lam_poly) < 1e-10
        assert abs(np.polyval(hitting_polynomial(row), 1.0 / r.lam)) < 1e-12
        assert r.lam > 1.0


def test_ac08_harmonic_residual():
    for name, path in shipped_models().items():
        model = load_model(path)
        y = harmonic_solution(model, 100)
        assert harmonic_residual(model, 100) < 1e-9 * np.max(np.abs(y)), name


def test_ac09_branching_mean_fidelity():
    model = load_model(shipped_models()["l2_varying"])
    top = 10
    exact = np.concatenate(([1.0], np.exp(kappa_terms_log(model, top - 1))))
    theta = sim.sample_theta(model, top, 200_000, seed=909)
    mean = theta.mean(axis=0)
    se = theta.std(axis=0, ddof=1) / math.sqrt(theta.shape[0])
    assert mean[0] == 1.0
    assert np.all(np.abs(mean[1:] - exact[1:]) <= 3 * se[1:])


def test_ac10_l2_golden_values():
    model = state_independent(0.25, [0.25, 0.5])
    const = l2_constants(model.tail)
    solver = solver_for(model)
    for i in range(1, 31):
        assert solver.exit_split(i + 1).to_im2 == pytest.approx(const.exit_two_below, rel=1e-9)
        assert solver.tau(i).value == pytest.approx(const.expected_tau, rel=1e-9)
        assert expected_ascent(model, i) == pytest.approx(const.expected_ascent(i), rel=1e-9)
