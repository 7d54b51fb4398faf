"""First-passage quantities from the upper and lower branching structures.

For a state ``i`` this module provides

* the exit split of ``(i, infinity)``: where the walk lands when it first
  drops below ``i``;
* ``E^i tau_i``, the mean time to first drop below ``i``;
* ``E^i T_{i+1}``, the mean time to first reach ``i+1``.

For L <= 2 the first two come from the upper branching structure (the
matrix ratio for exit probabilities and the immigration series for
``E^i tau_i``); L = 1 is handled as L = 2 with no jumps of size two.
Larger L falls back to absorption solves on growing intervals.
``E^i T_{i+1}`` uses the lower mean matrices for every L.
"""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass

import numpy as np

from lrw.branching import (
    ascent_weights,
    classify,
    lower_mean_matrix,
    Verdict,
)
from lrw.errors import NoConvergence, SeriesDivergent, TransientModel
from lrw.model import ValidatedModel

DEFAULT_TOL = 1e-10
DEFAULT_HORIZON = 10_000
DIVERGENCE_WINDOW = 50
TAU_WEIGHTS = np.array([2.0, 2.0, 1.0])
LOG_OVERFLOW = math.log(1e300)


@dataclass(frozen=True)
class ExitSplit:
    """Where the walk started at ``state`` lands on leaving ``{state, ..., top}``.

    ``probs[j-1]`` is the probability of landing at ``state - j``.
    """

    state: int
    probs: tuple[float, ...]
    converged: bool
    horizon_used: int

    @property
    def to_im1(self) -> float:
        return self.probs[0]

    @property
    def to_im2(self) -> float:
        return self.probs[1] if len(self.probs) > 1 else 0.0

    @property
    def total(self) -> float:
        return math.fsum(self.probs)


@dataclass(frozen=True)
class AbgTriple:
    alpha: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class TauResult:
    value: float
    terms: int
    contraction: float
    truncation_bound: float
    method: str


def _two_q(model: ValidatedModel, i: int) -> tuple[float, float, float]:
    """``(p, q1, q2)`` of state i with folding; q2 = 0 when L = 1."""
    q = model.folded_q(i)
    return model.row(i).p, q[0], (q[1] if model.L == 2 else 0.0)


def upper_aux_matrix(model: ValidatedModel, i: int) -> np.ndarray:
    """``[[(q1+q2)/p, q2/p], [1, 0]]`` for state i (L <= 2)."""
    _require_small_L(model)
    p, q1, q2 = _two_q(model, i)
    return np.array([[(q1 + q2) / p, q2 / p], [1.0, 0.0]])


def _require_small_L(model: ValidatedModel) -> None:
    if model.L > 2:
        raise ValueError(f"closed form available for L <= 2 only (L = {model.L})")


class _ExitAccumulator:
    """Running ``S = Mt_i + Mt_{i+1} Mt_i + ... + Mt_n ... Mt_i`` in scaled form."""

    def __init__(self) -> None:
        self.prod = np.eye(2)
        self.prod_log = 0.0
        self.total = np.zeros((2, 2))
        self.total_log = -math.inf

    def push(self, Mt: np.ndarray) -> None:
        prod = Mt @ self.prod
        peak = float(np.max(np.abs(prod)))
        self.prod = prod / peak
        self.prod_log += math.log(peak)
        common = max(self.total_log, self.prod_log)
        total = self.total * math.exp(self.total_log - common) + self.prod * math.exp(
            self.prod_log - common
        )
        peak = float(np.max(np.abs(total)))
        self.total = total / peak
        self.total_log = common + math.log(peak)

    def ratios(self) -> tuple[float, float]:
        S = self.total
        denom = math.exp(-self.total_log) + S[0, 0]
        return (S[0, 0] - S[0, 1]) / denom, S[0, 1] / denom


def exit_probabilities_closed(model: ValidatedModel, i: int, n: int) -> ExitSplit:
    """Exit split of the finite interval ``{i, ..., n}`` (L <= 2).

    ``P[exit at i-1] = <e1, S v> / (1 + <e1, S e1>)`` and
    ``P[exit at i-2] = <e1, S e2> / (1 + <e1, S e1>)`` with ``v = e1 - e2``.
    The remaining mass leaves through ``n+1``.
    """
    _require_small_L(model)
    if not 1 <= i <= n:
        raise ValueError("need 1 <= i <= n")
    acc = _ExitAccumulator()
    for m in range(i, n + 1):
        acc.push(upper_aux_matrix(model, m))
    a, b = acc.ratios()
    return ExitSplit(i, (a, b) if model.L == 2 else (a,), True, n - i + 1)


class PassageSolver:
    """Memoized passage quantities for one model.

    States above both the cutoff and the folding zone (i >= L) share one
    law, so every per-state quantity that only looks upward is keyed by
    ``min(i, max(cutoff + 1, L))``. The memo tables are guarded by a
    re-entrant lock.
    """

    def __init__(
        self,
        model: ValidatedModel,
        tol: float = DEFAULT_TOL,
        horizon: int = DEFAULT_HORIZON,
        method: str | None = None,
    ) -> None:
        self.model = model
        self.tol = tol
        self.horizon = horizon
        if method is None:
            method = "branching" if model.L <= 2 else "absorption"
        if method == "branching":
            _require_small_L(model)
        elif method != "absorption":
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self._lock = threading.RLock()
        self._splits: dict[int, ExitSplit] = {}
        self._taus: dict[int, TauResult] = {}
        self._ascent_log = [0.0]  # log E^k T_{k+1}, k = 0, 1, ...
        self._ascent_vec = np.zeros(model.L)
        self._ascent_vec_log = -math.inf
        self._verdict: Verdict | None = None

    def _key(self, i: int) -> int:
        return min(i, max(self.model.cutoff + 1, self.model.L))

    def verdict(self) -> Verdict:
        if self._verdict is None:
            self._verdict = classify(self.model, horizon=64).verdict
        return self._verdict

    def _require_recurrent(self) -> None:
        if self.verdict() == Verdict.TRANSIENT:
            raise TransientModel("exit probabilities at infinity need a recurrent walk")

    # exit splits ------------------------------------------------------

    def exit_split(self, i: int) -> ExitSplit:
        """Limit exit split of ``(i, infinity)``."""
        if i < 1:
            raise ValueError("exit splits are defined for i >= 1")
        self._require_recurrent()
        key = self._key(i)
        with self._lock:
            hit = self._splits.get(key)
            if hit is None:
                if self.method == "branching":
                    hit = self._split_branching(key)
                else:
                    hit = self._absorption_limit(key)[0]
                self._splits[key] = hit
        return ExitSplit(i, hit.probs, hit.converged, hit.horizon_used)

    def _split_branching(self, i: int) -> ExitSplit:
        # splits feed every downstream quantity, so they are converged harder
        tol = self.tol * 1e-3
        acc = _ExitAccumulator()
        prev = None
        prev_delta = None
        for m in range(i, i + self.horizon):
            acc.push(upper_aux_matrix(self.model, m))
            cur = np.array(acc.ratios())
            if prev is not None:
                delta = float(np.max(np.abs(cur - prev)))
                if delta < tol:
                    rate = delta / prev_delta if prev_delta else 0.0
                    if rate < 1 and delta * rate / (1 - rate) < tol:
                        return self._make_split(i, cur, True, m - i + 1)
                prev_delta = delta if delta > 0 else prev_delta
            prev = cur
        split = self._make_split(i, prev, False, self.horizon)
        raise NoConvergence(f"exit split at {i} not converged", partial=split)

    def _make_split(self, i: int, pair: np.ndarray, converged: bool, used: int) -> ExitSplit:
        probs = tuple(float(x) for x in pair)
        if self.model.L == 1:
            probs = probs[:1]
        return ExitSplit(i, probs, converged, used)

    def _absorption_limit(self, i: int) -> tuple[ExitSplit, TauResult]:
        from lrw.oracle.linalg import absorption_solve

        width = 32
        prev = None
        while True:
            res = absorption_solve(self.model, i, i + width, top="reflect")
            cur = np.concatenate((res.exit_probs, [res.expected_time]))
            if prev is not None:
                delta = np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))
                if float(np.max(delta)) < self.tol:
                    split = ExitSplit(i, tuple(float(x) for x in res.exit_probs), True, width)
                    tau = TauResult(res.expected_time, width, math.nan, float(np.max(delta)), "absorption")
                    return split, tau
            if width >= self.horizon:
                split = ExitSplit(i, tuple(float(x) for x in res.exit_probs), False, width)
                raise NoConvergence(f"absorption limit at {i} not converged", partial=split)
            prev = cur
            width = min(2 * width, self.horizon)

    # upper branching --------------------------------------------------

    def gamma(self, i: int) -> float:
        """``p(i)`` times the probability that (i+1, inf) is left at i-1."""
        return self.model.row(i).p * self.exit_split(i + 1).to_im2

    def abg(self, i: int) -> AbgTriple:
        _require_small_L(self.model)
        p = self.model.row(i).p
        back = self.exit_split(i + 1).to_im1
        q1_next = _two_q(self.model, i + 1)[1]
        g_next = self.gamma(i + 1)
        denom = q1_next + g_next
        if denom == 0.0:
            alpha = beta = 0.0
        else:
            alpha = p * back * q1_next / denom
            beta = p * back * g_next / denom
        return AbgTriple(alpha, beta, self.gamma(i))

    def upper_mean_matrix(self, k: int) -> np.ndarray:
        t = self.abg(k)
        s = 1.0 - t.alpha - t.beta
        a, b = t.alpha / s, t.beta / s
        return np.array([[a, b, 0.0], [a, b, 1.0], [a, b, 0.0]])

    def immigration(self, i: int) -> np.ndarray:
        """Mean type vector of the final step of tau_i."""
        t = self.abg(i)
        _, q1, q2 = _two_q(self.model, i)
        return np.array([q1, t.gamma, q2]) / (1.0 - t.alpha - t.beta)

    # expected_tau -----------------------------------------------------

    def tau(self, i: int) -> TauResult:
        if i < 1:
            raise ValueError("tau is defined for i >= 1")
        self._require_recurrent()
        key = self._key(i)
        with self._lock:
            hit = self._taus.get(key)
            if hit is None:
                if self.method == "branching":
                    hit = self._tau_branching(key)
                else:
                    split, hit = self._absorption_limit(key)
                    self._splits.setdefault(key, split)
                self._taus[key] = hit
        return hit

    def _tau_branching(self, i: int) -> TauResult:
        x = self.immigration(i)
        total = np.zeros(3)
        norms: list[float] = []
        contraction = math.nan
        for n, k in enumerate(range(i, i + self.horizon)):
            x = x @ self.upper_mean_matrix(k)
            total += x
            size = float(np.max(np.abs(x)))
            norms.append(size)
            if size == 0.0:
                return TauResult(1.0 + float(TAU_WEIGHTS @ total), n + 1, 0.0, 0.0, "branching")
            if n >= 1:
                contraction = size / norms[-2]
            if n >= DIVERGENCE_WINDOW and size >= norms[n - DIVERGENCE_WINDOW]:
                raise SeriesDivergent(
                    f"series for E^{i} tau_{i} does not contract (ratio {contraction:.6g})"
                )
            if n >= 1 and contraction < 1 and size < self.tol * (1 - contraction):
                bound = float(TAU_WEIGHTS.sum()) * size * contraction / (1 - contraction)
                return TauResult(1.0 + float(TAU_WEIGHTS @ total), n + 1, contraction, bound, "branching")
        raise NoConvergence(f"series for E^{i} tau_{i} hit the horizon")

    # expected_ascent --------------------------------------------------

    def ascent_log(self, i: int) -> float:
        """``log E^i T_{i+1}``; ``E^0 T_1 = 1``."""
        if i < 0:
            raise ValueError("states are nonnegative")
        with self._lock:
            w = ascent_weights(self.model.L)
            while len(self._ascent_log) <= i:
                k = len(self._ascent_log)
                # r_k = M_k (w + r_{k-1}) where r_{k-1} = vec * exp(vec_log)
                base = w * math.exp(-self._ascent_vec_log) if math.isfinite(self._ascent_vec_log) else None
                if base is None:
                    r = lower_mean_matrix(self.model, k) @ w
                    r_log = 0.0
                else:
                    r = lower_mean_matrix(self.model, k) @ (base + self._ascent_vec)
                    r_log = self._ascent_vec_log
                peak = float(np.max(r))
                self._ascent_vec = r / peak
                self._ascent_vec_log = r_log + math.log(peak)
                head = self._ascent_vec[0]
                head_log = self._ascent_vec_log + math.log(head) if head > 0 else -math.inf
                self._ascent_log.append(float(np.logaddexp(0.0, head_log)))
            return self._ascent_log[i]


@functools.lru_cache(maxsize=64)
def solver_for(
    model: ValidatedModel,
    tol: float = DEFAULT_TOL,
    horizon: int = DEFAULT_HORIZON,
    method: str | None = None,
) -> PassageSolver:
    return PassageSolver(model, tol=tol, horizon=horizon, method=method)


def exit_probabilities_limit(
    model: ValidatedModel, i: int, tol: float = DEFAULT_TOL, horizon: int = DEFAULT_HORIZON
) -> ExitSplit:
    """Exit split of ``(i, infinity)`` for a recurrent walk."""
    return solver_for(model, tol, horizon).exit_split(i)


def abg(model: ValidatedModel, i: int, tol: float = DEFAULT_TOL) -> AbgTriple:
    """``alpha(i), beta(i), gamma(i)``: how an up-step from i is undone (L <= 2).

    gamma is the chance of stepping up and later landing at i-1; alpha and
    beta split the chance of stepping up and later landing back at i by
    whether that landing comes from i+1 or i+2.
    """
    return solver_for(model, tol).abg(i)


def upper_mean_matrix(model: ValidatedModel, k: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    return solver_for(model, tol).upper_mean_matrix(k)


def expected_tau(model: ValidatedModel, i: int, tol: float = DEFAULT_TOL) -> float:
    """Mean time for the walk started at i to first go below i."""
    return solver_for(model, tol).tau(i).value


def expected_ascent(model: ValidatedModel, i: int, log: bool = False) -> float:
    """``E^i T_{i+1} = 1 + sum_k e1 M_i ... M_{i-k+1} w``.

    With ``log=True`` the natural log is returned; otherwise values above
    1e300 raise :class:`OverflowError`.
    """
    value = solver_for(model).ascent_log(i)
    if log:
        return value
    if value > LOG_OVERFLOW:
        raise OverflowError(f"E^{i} T_{i + 1} = exp({value:.6g}); pass log=True")
    return math.exp(value)
