"""Limit mean matrix of a constant tail row and its Perron root.

The Perron root is computed twice: from the matrix by accelerated power
iteration, and as ``1/x*`` where ``x*`` is the root in (0, 1] of the
hitting polynomial ``F(x) = q_L x^(L+1) + ... + q_1 x^2 - x + p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lrw.branching import DRIFT_TOL, structured_mean_matrix
from lrw.errors import MethodDisagreement, NotInD
from lrw.model import ProbRow

AGREEMENT_TOL = 1e-10
DISAGREEMENT_LIMIT = 1e-8


def limit_matrix(tail: ProbRow) -> np.ndarray:
    return structured_mean_matrix(tail.p, tail.q)


@dataclass(frozen=True)
class DomainVerdict:
    in_D: bool
    strict: bool
    drift: float


def in_domain(tail: ProbRow, tol: float = DRIFT_TOL) -> DomainVerdict:
    """Membership in the positive-drift region ``sum_j j q_j > p``.

    ``strict`` additionally requires the drift to clear ``tol``, so a
    row that is critical up to rounding is never reported as strict.
    """
    drift = tail.drift
    return DomainVerdict(in_D=drift > 0, strict=drift > tol, drift=drift)


def hitting_polynomial(tail: ProbRow) -> np.ndarray:
    """Coefficients of F, highest degree first (``np.polyval`` order)."""
    L = tail.L
    coeffs = np.zeros(L + 2)
    for j, qj in enumerate(tail.q, start=1):
        coeffs[L + 1 - (j + 1)] = qj
    coeffs[L] = -1.0
    coeffs[L + 1] = tail.p
    return coeffs


def _deflate_at_one(coeffs: np.ndarray) -> np.ndarray:
    # F(1) = 0 for every stochastic row; synthetic division by (x - 1).
    out = np.empty(coeffs.size - 1)
    acc = 0.0
    for k in range(coeffs.size - 1):
        acc = acc + coeffs[k]
        out[k] = acc
    return out


def hitting_root(tail: ProbRow, tol: float = DRIFT_TOL) -> float:
    """Root ``x*`` of F in (0, 1]; equals 1 for a critical row.

    Bisection on ``G = F/(x-1)``, which is ``-p`` at 0 and equals the
    drift at 1, then Newton once the bracket is below 1e-3.
    """
    G = _deflate_at_one(hitting_polynomial(tail))
    dG = np.polyder(G)
    g1 = float(np.polyval(G, 1.0))
    if g1 <= tol:
        if g1 < -tol:
            raise NotInD(f"drift {tail.drift!r} < 0: F has no root in (0, 1)")
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if np.polyval(G, mid) < 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(100):
        step = float(np.polyval(G, x) / np.polyval(dG, x))
        x_new = x - step
        if not lo <= x_new <= hi:
            x_new = 0.5 * (lo + hi)
        if np.polyval(G, x_new) < 0:
            lo = max(lo, x_new)
        else:
            hi = min(hi, x_new)
        if abs(x_new - x) <= 4 * np.finfo(float).eps * x_new:
            x = x_new
            break
        x = x_new
    return x


def _power_perron(M: np.ndarray, max_squarings: int = 64, polish: int = 200):
    """Perron root and vector of a nonnegative matrix.

    Works on ``M + I`` (same Perron vector, no peripheral spectrum), first
    by repeated squaring, then by plain power steps. Returns the root, the
    vector (max entry 1) and the Collatz-Wielandt bracket width.
    """
    L = M.shape[0]
    shifted = M + np.eye(L)
    B = shifted / np.max(shifted)
    for _ in range(max_squarings):
        B2 = B @ B
        B2 /= np.max(B2)
        if np.allclose(B2, B, rtol=1e-15, atol=0.0):
            B = B2
            break
        B = B2
    v = B @ np.ones(L)
    v /= np.max(v)
    gap = math.inf
    lam = math.nan
    for _ in range(polish):
        w = shifted @ v
        pos = v > 1e-300
        ratios = w[pos] / v[pos]
        lo, hi = float(ratios.min()), float(ratios.max())
        lam_new = float(w @ v / (v @ v))
        v = w / np.max(w)
        gap = hi - lo
        if gap <= 4 * np.finfo(float).eps * hi and abs(lam_new - lam) <= 4 * np.finfo(float).eps * hi:
            lam = lam_new
            break
        lam = lam_new
    return lam - 1.0, v, gap


@dataclass(frozen=True)
class PerronResult:
    lam: float
    lam_power: float
    lam_poly: float
    x_star: float
    method_agreement: float
    right_residual: float
    left_residual: float
    f_at_inverse: float

    @property
    def log_lambda(self) -> float:
        return math.log(self.lam)


def perron_root(tail: ProbRow, tol: float = AGREEMENT_TOL) -> PerronResult:
    """Perron root of the tail's limit mean matrix, by two independent routes.

    The polynomial value is authoritative (it stays valid when M has zero
    entries). Raises :class:`NotInD` for negative drift and
    :class:`MethodDisagreement` when the routes differ by more than 1e-8
    relative to ``max(1, lambda)``.
    """
    verdict = in_domain(tail)
    if verdict.drift < -DRIFT_TOL:
        raise NotInD(f"tail drift {verdict.drift!r} is negative")
    M = limit_matrix(tail)
    x_star = hitting_root(tail)
    lam_poly = 1.0 / x_star
    lam_power, v, _ = _power_perron(M)
    _, u, _ = _power_perron(M.T)
    scale = max(1.0, lam_poly)
    agreement = abs(lam_power - lam_poly)
    if agreement > DISAGREEMENT_LIMIT * scale:
        raise MethodDisagreement(
            f"power iteration {lam_power!r} vs polynomial {lam_poly!r}"
        )
    F = hitting_polynomial(tail)
    return PerronResult(
        lam=lam_poly,
        lam_power=lam_power,
        lam_poly=lam_poly,
        x_star=x_star,
        method_agreement=agreement,
        right_residual=float(np.max(np.abs(M @ v - lam_poly * v))),
        left_residual=float(np.max(np.abs(u @ M - lam_poly * u))),
        f_at_inverse=float(np.polyval(F, 1.0 / lam_power)),
    )
