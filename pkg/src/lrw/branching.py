"""Lower branching structure: offspring mean matrices, kappa series, recurrence.

A type-l particle at level k records a step from above k that lands at
k-l+1. The mean matrix ``M_k`` maps the type counts at level k to
expected counts at level k-1; products of these matrices give the
expected number of visits to 0 and the expected upward passage times.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from lrw.errors import HorizonTooLarge
from lrw.model import ValidatedModel

DEFAULT_HORIZON = 10_000
LOG_SCALE_BOUND = 700.0
DRIFT_TOL = 1e-12


def e1(L: int) -> np.ndarray:
    v = np.zeros(L)
    v[0] = 1.0
    return v


def ones(L: int) -> np.ndarray:
    return np.ones(L)


def ascent_weights(L: int) -> np.ndarray:
    """Step weights (2, 1, ..., 1): a type-1 arrival costs a down and an up step."""
    w = np.ones(L)
    w[0] = 2.0
    return w


def structured_mean_matrix(p: float, q: Sequence[float]) -> np.ndarray:
    """Every row is q/p; row l (l >= 2) gets an extra 1 in column l-1."""
    q = np.asarray(q, dtype=float)
    L = q.size
    M = np.tile(q / p, (L, 1))
    idx = np.arange(1, L)
    M[idx, idx - 1] += 1.0
    return M


def lower_mean_matrix(model: ValidatedModel, i: int) -> np.ndarray:
    """Offspring mean matrix ``M_i`` of the lower branching process.

    Uses the folded down-probabilities for ``i < L``; for L = 2 this gives
    ``M_1 = [[(q1+q2)/p, 0], [1/p, 0]]``.
    """
    if i < 1:
        raise ValueError("lower mean matrices are indexed from 1")
    return structured_mean_matrix(model.row(i).p, model.folded_q(i))


@dataclass(frozen=True)
class ScaledProduct:
    """A matrix product stored as ``matrix * exp(log_scale)`` with max entry 1."""

    matrix: np.ndarray
    log_scale: float = 0.0

    @classmethod
    def identity(cls, L: int) -> "ScaledProduct":
        return cls(np.eye(L), 0.0)

    def left_multiply(self, M: np.ndarray) -> "ScaledProduct":
        prod = M @ self.matrix
        peak = float(np.max(np.abs(prod)))
        if peak == 0.0:
            return ScaledProduct(prod, -math.inf)
        return ScaledProduct(prod / peak, self.log_scale + math.log(peak))

    def value(self) -> np.ndarray:
        return self.matrix * math.exp(self.log_scale)


def lower_product(model: ValidatedModel, hi: int, lo: int = 1) -> ScaledProduct:
    """``M_hi M_{hi-1} ... M_lo`` as a scaled product."""
    acc = ScaledProduct.identity(model.L)
    for k in range(lo, hi + 1):
        acc = acc.left_multiply(lower_mean_matrix(model, k))
    return acc


def kappa_terms_log(model: ValidatedModel, n: int) -> np.ndarray:
    """Natural logs of ``e1 M_k ... M_1 u`` for k = 1..n (``-inf`` for zero terms)."""
    L = model.L
    v = ones(L)
    log_scale = 0.0
    out = np.empty(n)
    for k in range(1, n + 1):
        v = lower_mean_matrix(model, k) @ v
        peak = float(np.max(v))
        if peak == 0.0:
            out[k - 1 :] = -math.inf
            return out
        v /= peak
        log_scale += math.log(peak)
        out[k - 1] = log_scale + math.log(v[0]) if v[0] > 0 else -math.inf
    return out


def kappa_partial_sums(
    model: ValidatedModel,
    n: int,
    log_scale_bound: float = LOG_SCALE_BOUND,
) -> np.ndarray:
    """Partial sums ``S_k = sum_{m=1}^k e1 M_m ... M_1 u`` for k = 1..n.

    The full series plus one (the visit at time 0) is the expected number
    of visits to 0. Raises :class:`HorizonTooLarge`, carrying the sums
    computed so far, once a term's scale exceeds ``exp(log_scale_bound)``.
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    logs = kappa_terms_log(model, n)
    over = np.nonzero(logs > log_scale_bound)[0]
    stop = int(over[0]) if over.size else n
    sums = np.cumsum(np.exp(logs[:stop]))
    if stop < n:
        raise HorizonTooLarge(
            f"kappa term {stop + 1} exceeds exp({log_scale_bound})", partial=sums
        )
    return sums


class Verdict(str, enum.Enum):
    TRANSIENT = "Transient"
    NULL_RECURRENT = "NullRecurrent"
    POSITIVE_RECURRENT = "PositiveRecurrent"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class Classification:
    verdict: Verdict
    boundary_case: bool = False
    evidence: dict = field(default_factory=dict)

    @property
    def recurrent(self) -> bool:
        return self.verdict in (Verdict.NULL_RECURRENT, Verdict.POSITIVE_RECURRENT)


def classify(
    model: ValidatedModel,
    horizon: int = DEFAULT_HORIZON,
    drift_tol: float = DRIFT_TOL,
) -> Classification:
    """Recurrence class of the walk, decided by the drift of the tail row.

    Changing finitely many rows of an irreducible chain preserves its
    class, so the sign of ``sum_j j q_j - p`` on the tail decides:
    positive recurrent above zero, transient below, null recurrent at
    zero. Partial kappa sums and the tail spectral radius are attached
    as evidence.
    """
    from lrw.spectral import limit_matrix

    sigma = model.tail.drift
    rho = float(np.max(np.abs(np.linalg.eigvals(limit_matrix(model.tail)))))
    evidence = {"tail_drift": sigma, "tail_spectral_radius": rho}

    try:
        sums = kappa_partial_sums(model, horizon)
        evidence["horizon_used"] = horizon
        evidence["kappa_truncated"] = False
    except HorizonTooLarge as exc:
        sums = exc.partial
        evidence["horizon_used"] = len(sums)
        evidence["kappa_truncated"] = True
    evidence["kappa_first"] = [float(s) for s in sums[:5]]
    evidence["kappa_last"] = float(sums[-1]) if len(sums) else None

    if abs(sigma) <= drift_tol:
        boundary = model.L >= 2
        verdict = Verdict.NULL_RECURRENT
        # at zero drift the terms of the kappa series stay bounded away from 0
        terms = np.diff(np.concatenate(([0.0], sums)))
        n = len(terms)
        if n >= 4 and terms[-1] < 0.5 * terms[n // 2]:
            verdict = Verdict.INCONCLUSIVE
        evidence["kappa_growth_per_step"] = float(terms[-1]) if n else None
        return Classification(verdict, boundary, evidence)
    if sigma > 0:
        return Classification(Verdict.POSITIVE_RECURRENT, False, evidence)
    return Classification(Verdict.TRANSIENT, False, evidence)
