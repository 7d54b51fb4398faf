"""Closed forms for two special cases, used as golden references.

* L = 1 (birth-death chain): stationary weights ``mu_i``.
* State-independent L = 2: eigen-decomposition of the 2x2 mean matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lrw.errors import NotPositiveRecurrent, NotSummable
from lrw.model import ProbRow, ValidatedModel

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class MuSeries:
    mu: np.ndarray
    mu_total: float  # math.inf when the series diverges


def mu_series(model: ValidatedModel, n: int) -> MuSeries:
    """``mu_0 = 1``, ``mu_i = p(0)...p(i-1) / (q(1)...q(i))`` for L = 1.

    Beyond the cutoff the ratio ``mu_{i+1}/mu_i`` is the constant ``p/q``,
    so the total is a finite sum plus an exact geometric tail.
    """
    if model.L != 1:
        raise ValueError("mu series is defined for L = 1")
    m = max(n, model.cutoff + 1)
    mu = np.empty(m + 1)
    mu[0] = 1.0
    for i in range(1, m + 1):
        mu[i] = mu[i - 1] * model.up(i - 1) / model.row(i).q[0]
    ratio = model.tail.p / model.tail.q[0]
    if ratio >= 1.0:
        total = math.inf
    else:
        total = math.fsum(mu[:m]) + mu[m] / (1.0 - ratio)
    return MuSeries(mu=mu[: n + 1], mu_total=total)


def l1_stationary(model: ValidatedModel, n: int = 100) -> np.ndarray:
    """``pi_i = mu_i / mu`` for i = 0..n."""
    series = mu_series(model, n)
    if not math.isfinite(series.mu_total):
        raise NotSummable("mu series diverges: no stationary distribution")
    return series.mu / series.mu_total


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    lambda2: float
    delta: float


def _l2_row(tail: ProbRow) -> tuple[float, float, float]:
    if tail.L == 1:
        return tail.p, tail.q[0], 0.0
    if tail.L != 2:
        raise ValueError("L = 2 closed forms need a row with two down-probabilities")
    return tail.p, tail.q[0], tail.q[1]


def eigen_pair(tail: ProbRow) -> EigenPair:
    """Eigenvalues of ``[[q1/p, q2/p], [1 + q1/p, q2/p]]``."""
    p, q1, q2 = _l2_row(tail)
    s = q1 + q2
    delta = math.sqrt(s * s + 4 * p * q2)
    return EigenPair((s + delta) / (2 * p), (s - delta) / (2 * p), delta)


def l2_kappa_partial_sum(tail: ProbRow, n: int) -> float:
    """``sum_{k=1}^n e1 M_k ... M_1 u`` for a state-independent L = 2 walk."""
    ev = eigen_pair(tail)
    l1, l2 = ev.lambda1, ev.lambda2
    second = (1 - l2**n) / (1 - l2) * l2**2
    if l1 == 1.0:
        first = l1**2 * n
    else:
        first = (1 - l1**n) / (1 - l1) * l1**2
    return (first - second) / (l1 - l2)


def l2_recurrence_test(tail: ProbRow, tol: float = BOUNDARY_TOL) -> bool:
    """Recurrence criterion ``q1 + 2 q2 >= p``."""
    p, q1, q2 = _l2_row(tail)
    return q1 + 2 * q2 >= p - tol


@dataclass(frozen=True)
class L2Constants:
    """Passage quantities of a positive-recurrent state-independent L = 2 walk."""

    eigen: EigenPair
    exit_two_below: float  # P^{i+1}[(i+1, inf), i-1]
    expected_tau: float

    def expected_ascent(self, i: int) -> float:
        """``E^i T_{i+1}`` for i >= 1."""
        l1, l2 = self.eigen.lambda1, self.eigen.lambda2
        head = (
            l1**2 * (1 - l1 ** (i - 1)) * (l2 + 2) / (1 - l1)
            - l2**2 * (1 - l2 ** (i - 1)) * (l1 + 2) / (1 - l2)
        ) / (l1 - l2)
        return 1 + head + 2 * (l1 ** (i + 1) - l2 ** (i + 1)) / (l1 - l2)


def l2_constants(tail: ProbRow) -> L2Constants:
    p, q1, q2 = _l2_row(tail)
    if not q1 + 2 * q2 > p + BOUNDARY_TOL:
        raise NotPositiveRecurrent("closed forms need q1 + 2 q2 > p")
    ev = eigen_pair(tail)
    d = ev.delta
    exit_two = (d - q1 - q2) / (2 * p)
    tau = 2 * d / (1 - p - p * q1 + 3 * p * q2 + (1 - 3 * p) * d)
    return L2Constants(eigen=ev, exit_two_below=exit_two, expected_tau=tau)
