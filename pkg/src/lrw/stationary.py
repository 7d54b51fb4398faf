"""Mean return times and the stationary distribution.

A return to i starts with one step. An up-step costs the time to drop
back below i+1 and, if that drop overshoots i, the climb back; a down
jump of size j costs the climbs ``E^{i-l} T_{i-l+1}`` for l = 1..j.
Collecting the climbs gives

    E^i T_i = 1 + p(i) E^{i+1} tau_{i+1} + sum_l theta_l E^{i-l} T_{i-l+1},

    theta_l = sum_{k >= l} q_k(i) + p(i) sum_{j=l}^{L-1} P^{i+1}[(i+1, inf), i-j],

and ``pi(i) = 1 / E^i T_i``. Sums are taken in log space so that
astronomically large return times only underflow ``pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lrw.branching import Verdict, classify
from lrw.errors import NotPositiveRecurrent, TailNotInD
from lrw.model import ValidatedModel
from lrw.passage import DEFAULT_TOL, PassageSolver, solver_for
from lrw.spectral import in_domain, perron_root

DEFAULT_IMAX = 200


@dataclass(frozen=True)
class ReturnBreakdown:
    state: int
    e_tau_next: float
    thetas: tuple[float, ...]
    log_descents: tuple[float, ...]
    log_total: float

    @property
    def total(self) -> float:
        return math.exp(self.log_total)

    @property
    def e_descents(self) -> tuple[float, ...]:
        return tuple(math.exp(x) for x in self.log_descents)


@dataclass
class StationaryResult:
    pi: np.ndarray
    breakdowns: list[ReturnBreakdown]
    norm_residual: float
    tail_mass: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def log_pi(self) -> np.ndarray:
        return -np.array([b.log_total for b in self.breakdowns])


def _require_positive_recurrent(model: ValidatedModel) -> None:
    verdict = classify(model, horizon=64).verdict
    if verdict != Verdict.POSITIVE_RECURRENT:
        raise NotPositiveRecurrent(f"walk is {verdict.value}")


def _return_breakdown(solver: PassageSolver, i: int) -> ReturnBreakdown:
    model = solver.model
    if i == 0:
        tau = solver.tau(1).value
        return ReturnBreakdown(0, tau, (), (), math.log1p(tau))
    p = model.row(i).p
    q = model.folded_q(i)
    tau = solver.tau(i + 1).value
    split = solver.exit_split(i + 1).probs  # split[m] = landing at i - m
    L = model.L
    thetas = []
    log_desc = []
    for l in range(1, min(i, L) + 1):
        theta = math.fsum(q[l - 1 :]) + p * math.fsum(split[l:L])
        thetas.append(theta)
        log_desc.append(solver.ascent_log(i - l))
    logs = [0.0, math.log(p * tau)]
    logs += [math.log(t) + d for t, d in zip(thetas, log_desc) if t > 0]
    return ReturnBreakdown(i, tau, tuple(thetas), tuple(log_desc), float(np.logaddexp.reduce(logs)))


def expected_return(model: ValidatedModel, i: int, tol: float = DEFAULT_TOL) -> ReturnBreakdown:
    """Decomposition of ``E^i T_i`` for a positive-recurrent walk."""
    if i < 0:
        raise ValueError("states are nonnegative")
    _require_positive_recurrent(model)
    return _return_breakdown(solver_for(model, tol), i)


def stationary_distribution(
    model: ValidatedModel, i_max: int = DEFAULT_IMAX, tol: float = DEFAULT_TOL
) -> StationaryResult:
    """``pi(i) = 1 / E^i T_i`` for i = 0..i_max.

    No normalization is applied. ``norm_residual`` is ``|sum pi - 1|``
    after adding a geometric tail at ratio ``1/lambda_M`` beyond i_max.
    """
    _require_positive_recurrent(model)
    solver = solver_for(model, tol)
    breakdowns = [_return_breakdown(solver, i) for i in range(i_max + 1)]
    pi = np.exp(-np.array([b.log_total for b in breakdowns]))
    ratio = 1.0 / perron_root(model.tail).lam
    tail_mass = float(pi[-1] * ratio / (1.0 - ratio))
    residual = abs(math.fsum(pi) + tail_mass - 1.0)
    diagnostics = {
        "tol": tol,
        "i_max": i_max,
        "method": solver.method,
        "tail_ratio": ratio,
    }
    return StationaryResult(pi, breakdowns, residual, tail_mass, diagnostics)


@dataclass(frozen=True)
class TailRate:
    lambda_M: float
    rate: float  # -log lambda_M
    empirical_slope: float
    window: tuple[int, int]


def tail_rate(
    model: ValidatedModel, window: tuple[int, int] = (30, 80), tol: float = DEFAULT_TOL
) -> TailRate:
    """Geometric decay rate of pi: ``log pi(i) / i -> -log lambda_M``.

    Also fits a least-squares slope of ``log pi(i)`` over ``window``.
    """
    if not in_domain(model.tail).strict:
        raise TailNotInD(f"tail drift {model.tail.drift!r} is not positive")
    lam = perron_root(model.tail).lam
    lo, hi = window
    result = stationary_distribution(model, i_max=hi, tol=tol)
    idx = np.arange(lo, hi + 1)
    slope = float(np.polyfit(idx, result.log_pi[lo : hi + 1], 1)[0])
    return TailRate(lambda_M=lam, rate=-math.log(lam), empirical_slope=slope, window=window)
