"""Finite linear-algebra oracles.

Everything here works on finite pieces of the kernel and never touches
the branching formulas, so it can check them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from lrw.branching import kappa_terms_log
from lrw.errors import SingularSystem
from lrw.model import ValidatedModel, transition_row

DENSE_LIMIT = 2000


def kernel_matrix(model: ValidatedModel, n: int) -> np.ndarray:
    """Rows 0..n-1 of the kernel restricted to columns 0..n (dense)."""
    P = np.zeros((n, n + 1))
    for i in range(n):
        for t, prob in transition_row(model, i).entries:
            P[i, t] += prob
    return P


def _solve(A: np.ndarray, B: np.ndarray, bands: tuple[int, int] | None = None) -> np.ndarray:
    n = A.shape[0]
    try:
        if n <= DENSE_LIMIT or bands is None:
            return scipy.linalg.solve(A, B, check_finite=False)
        lower, upper = bands
        ab = np.zeros((lower + upper + 1, n))
        for d in range(-lower, upper + 1):
            diag = np.diagonal(A, offset=d)
            if d >= 0:
                ab[upper - d, d:] = diag
            else:
                ab[upper - d, : n + d] = diag
        return scipy.linalg.solve_banded((lower, upper), ab, B, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from None


@dataclass(frozen=True)
class TruncatedSolve:
    N: int
    pi_hat: np.ndarray
    boundary_mode: str
    residual: float


def truncated_matrix(model: ValidatedModel, N: int, boundary: str = "self_loop") -> np.ndarray:
    """Kernel on {0..N}; the up-move out of N is redirected.

    ``self_loop`` keeps the walker at N, ``reflect`` sends it to N-1.
    """
    P = np.zeros((N + 1, N + 1))
    P[:, :] = kernel_matrix(model, N + 1)[:, : N + 1]
    up = model.up(N)
    if boundary == "self_loop":
        P[N, N] += up
    elif boundary == "reflect":
        P[N, N - 1] += up
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return P


def truncated_stationary(
    model: ValidatedModel, N: int, boundary: str = "self_loop"
) -> TruncatedSolve:
    """Stationary vector of the chain truncated to {0..N}."""
    if N <= model.L:
        raise ValueError("truncation level must exceed L")
    P = truncated_matrix(model, N, boundary)
    if N + 1 <= DENSE_LIMIT:
        A = (P - np.eye(N + 1)).T
        A[0, :] = 1.0
        b = np.zeros(N + 1)
        b[0] = 1.0
        pi = _solve(A, b)
    else:
        # pin pi(0) = 1 and drop its balance equation; the rest is banded
        A = (P - np.eye(N + 1)).T[1:, 1:]
        b = -P[0, 1:]
        rest = _solve(A, b, bands=(1, model.L))
        pi = np.concatenate(([1.0], rest))
        pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ P - pi)))
    return TruncatedSolve(N=N, pi_hat=pi, boundary_mode=boundary, residual=residual)


@dataclass(frozen=True)
class Absorption:
    """First exit from {lo..hi}.

    ``exit_probs[j-1]`` is the probability of leaving at ``lo-j``;
    ``top_prob`` is the probability of leaving at ``hi+1`` (zero when the
    top reflects). ``expected_time`` is the mean number of steps until
    the walk leaves, from ``start``.
    """

    lo: int
    hi: int
    start: int
    exit_probs: np.ndarray
    top_prob: float
    expected_time: float


def absorption_solve(
    model: ValidatedModel,
    lo: int,
    hi: int,
    start: int | None = None,
    top: str = "absorb",
) -> Absorption:
    """Exit distribution and mean exit time of the interval {lo..hi}.

    With ``top="absorb"`` the walk is stopped at hi+1; with
    ``top="reflect"`` the up-move out of hi becomes a self-loop, so every
    path eventually leaves below ``lo``.
    """
    start = lo if start is None else start
    if not 1 <= lo <= start <= hi:
        raise ValueError("need 1 <= lo <= start <= hi")
    L = model.L
    n = hi - lo + 1
    A = np.eye(n)
    B = np.zeros((n, L + 2))  # columns: lo-1..lo-L, top, ones
    B[:, L + 1] = 1.0
    for s in range(lo, hi + 1):
        r = s - lo
        for t, prob in transition_row(model, s).entries:
            if lo <= t <= hi:
                A[r, t - lo] -= prob
            elif t < lo:
                B[r, lo - t - 1] += prob
            elif top == "absorb":
                B[r, L] += prob
            elif top == "reflect":
                A[r, r] -= prob
            else:
                raise ValueError(f"unknown top mode {top!r}")
    X = _solve(A, B, bands=(L, 1))
    row = X[start - lo]
    return Absorption(
        lo=lo,
        hi=hi,
        start=start,
        exit_probs=row[:L].copy(),
        top_prob=float(row[L]) if top == "absorb" else 0.0,
        expected_time=float(row[L + 1]),
    )


def ascent_oracle(model: ValidatedModel, i: int) -> np.ndarray:
    """Mean hitting times of i+1 from every state 0..i."""
    P = kernel_matrix(model, i + 1)
    A = np.eye(i + 1) - P[:, : i + 1]
    return _solve(A, np.ones(i + 1), bands=(model.L, 1))


def theta_oracle(model: ValidatedModel, n: int) -> float:
    """Mean visits to 0 by a walk started at n-1, counted until it first hits n."""
    P = kernel_matrix(model, n)
    A = np.eye(n) - P[:, :n]
    # row n-1 of the Green's function (I - Q)^-1, read at column 0
    G_row = _solve(A.T, np.eye(n)[:, n - 1])
    return float(G_row[0])


def harmonic_solution(model: ValidatedModel, n_max: int) -> np.ndarray:
    """``y_0 = 0``, ``y_n = 1 + sum_{k=1}^{n-1} e1 M_k ... M_1 u`` for n = 1..n_max."""
    y = np.zeros(n_max + 1)
    if n_max >= 1:
        terms = np.exp(kappa_terms_log(model, max(n_max - 1, 1)))[: n_max - 1]
        y[1:] = 1.0 + np.concatenate(([0.0], np.cumsum(terms)))
    return y


def harmonic_residual(model: ValidatedModel, n_max: int) -> float:
    """Largest violation of ``sum_j P_ij y_j = y_i`` over 1 <= i <= n_max-1."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    y = harmonic_solution(model, n_max)
    worst = 0.0
    for i in range(1, n_max):
        lhs = sum(prob * y[t] for t, prob in transition_row(model, i).entries)
        worst = max(worst, abs(lhs - y[i]))
    return worst
