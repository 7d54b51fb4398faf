"""Cross-check battery: every applicable identity against its oracle.

Each check reports a residual and the tolerance it was held to. Checks
that do not apply to a model (wrong L, not positive recurrent, tail
outside D) are reported as skipped. Monte Carlo checks are rerun once
with a fresh seed before they count as failures.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from lrw.branching import Verdict, classify, kappa_terms_log
from lrw.closedform import l1_stationary, l2_constants, l2_recurrence_test
from lrw.errors import LRWError
from lrw.model import ValidatedModel
from lrw.oracle import simulate as sim
from lrw.oracle.linalg import (
    absorption_solve,
    ascent_oracle,
    harmonic_residual,
    harmonic_solution,
    truncated_stationary,
)
from lrw.passage import exit_probabilities_closed, solver_for
from lrw.spectral import in_domain, perron_root
from lrw.stationary import expected_return, stationary_distribution, tail_rate

PASS, FAIL, SKIP = "pass", "fail", "skip"
MC_SIGMAS = 3.0
MC_STEP_BUDGET = 2e8


@dataclass
class Check:
    name: str
    status: str
    residual: float | None = None
    tolerance: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VerifyReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}

    def table(self) -> str:
        lines = [f"{'check':<24} {'status':<6} {'residual':>12} {'tolerance':>10}  detail"]
        for c in self.checks:
            res = "-" if c.residual is None else f"{c.residual:.3e}"
            tol = "-" if c.tolerance is None else f"{c.tolerance:.1e}"
            lines.append(f"{c.name:<24} {c.status.upper():<6} {res:>12} {tol:>10}  {c.detail}")
        return "\n".join(lines)


def _bounded(name: str, residual: float, tol: float, detail: str = "") -> Check:
    ok = math.isfinite(residual) and residual <= tol
    return Check(name, PASS if ok else FAIL, float(residual), tol, detail)


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


# deterministic checks -------------------------------------------------


def check_spectral(model: ValidatedModel) -> Check:
    if not in_domain(model.tail).strict:
        return Check("spectral", SKIP, detail="tail not strictly in D")
    r = perron_root(model.tail)
    scale = max(1.0, r.lam)
    residual = r.method_agreement / scale
    ok = r.method_agreement <= 1e-10 * scale and abs(r.f_at_inverse) <= 1e-12 and r.lam > 1
    detail = f"lambda={r.lam:.12g} |F(1/lambda)|={abs(r.f_at_inverse):.2e}"
    return Check("spectral", PASS if ok else FAIL, residual, 1e-10, detail)


def check_harmonic(model: ValidatedModel, n_max: int = 100) -> Check:
    y = harmonic_solution(model, n_max)
    norm = float(np.max(np.abs(y)))
    return _bounded("harmonic", harmonic_residual(model, n_max) / norm, 1e-9, f"n_max={n_max}")


def check_l2_classify(model: ValidatedModel) -> Check:
    if not (model.state_independent and model.L <= 2):
        return Check("classify-vs-inequality", SKIP, detail="needs a state-independent row, L <= 2")
    c = classify(model, horizon=2000)
    recurrent = l2_recurrence_test(model.tail)
    if model.tail.drift > 1e-12:
        ok = c.verdict == Verdict.POSITIVE_RECURRENT
    elif recurrent:
        ok = c.verdict in (Verdict.NULL_RECURRENT, Verdict.INCONCLUSIVE)
    else:
        ok = c.verdict == Verdict.TRANSIENT
    return Check("classify-vs-inequality", PASS if ok else FAIL, detail=c.verdict.value)


def check_truncation(model: ValidatedModel, pr: bool, N: int = 400, top: int = 50) -> Check:
    if not pr:
        return Check("truncated-oracle", SKIP, detail="not positive recurrent")
    pi = stationary_distribution(model, i_max=top).pi
    hat = truncated_stationary(model, N).pi_hat[: top + 1]
    return _bounded("truncated-oracle", float(np.max(np.abs(pi - hat))), 1e-8, f"N={N}")


def check_mass(model: ValidatedModel, pr: bool, i_max: int = 200) -> Check:
    if not pr:
        return Check("total-mass", SKIP, detail="not positive recurrent")
    res = stationary_distribution(model, i_max=i_max)
    return _bounded("total-mass", res.norm_residual, 1e-8, f"i_max={i_max}")


def check_exit_closed(model: ValidatedModel) -> Check:
    if model.L > 2:
        return Check("exit-closed-form", SKIP, detail="closed form needs L <= 2")
    worst = 0.0
    for i in range(1, 6):
        for n in range(i, i + 10):
            closed = exit_probabilities_closed(model, i, n)
            oracle = absorption_solve(model, i, n)
            worst = max(worst, float(np.max(np.abs(np.array(closed.probs) - oracle.exit_probs[: len(closed.probs)]))))
    return _bounded("exit-closed-form", worst, 1e-10, "50 (i, n) pairs")


def check_tau(model: ValidatedModel, pr: bool, states=range(1, 6), width: int = 600) -> Check:
    if not pr:
        return Check("expected-tau", SKIP, detail="not positive recurrent")
    solver = solver_for(model)
    worst = 0.0
    for i in states:
        oracle = absorption_solve(model, i, i + width, top="absorb").expected_time
        worst = max(worst, _rel(solver.tau(i).value, oracle))
    return _bounded("expected-tau", worst, 1e-8, f"absorbing top at i+{width}")


def check_ascent(model: ValidatedModel, top: int = 20, ceiling: float = 1e6) -> Check:
    """The dense oracle loses about log10(E^i T_{i+1}) digits, so states whose
    climb exceeds ``ceiling`` are not probed."""
    solver = solver_for(model)
    worst = 0.0
    for i in range(top + 1):
        if solver.ascent_log(i) > math.log(ceiling):
            top = i - 1
            break
        oracle = ascent_oracle(model, i)[i]
        worst = max(worst, abs(solver.ascent_log(i) - math.log(oracle)))
    return _bounded("expected-ascent", worst, 1e-8, f"i <= {top}, log scale")


def check_l1(model: ValidatedModel, pr: bool) -> Check:
    if model.L != 1 or not pr:
        return Check("l1-closed-form", SKIP, detail="needs a positive-recurrent L = 1 walk")
    pi = stationary_distribution(model, i_max=100).pi
    return _bounded("l1-closed-form", _rel(pi, l1_stationary(model, 100)), 1e-10, "i <= 100")


def check_l2(model: ValidatedModel, pr: bool) -> Check:
    if not (model.L == 2 and model.state_independent and pr):
        return Check("l2-closed-form", SKIP, detail="needs a positive-recurrent state-independent L = 2 row")
    const = l2_constants(model.tail)
    solver = solver_for(model)
    worst = 0.0
    for i in range(1, 31):
        worst = max(worst, _rel(solver.exit_split(i + 1).to_im2, const.exit_two_below))
        worst = max(worst, _rel(solver.tau(i).value, const.expected_tau))
        worst = max(worst, abs(solver.ascent_log(i) - math.log(const.expected_ascent(i))))
    return _bounded("l2-closed-form", worst, 1e-9, "i = 1..30")


def check_tail_rate(model: ValidatedModel, pr: bool) -> Check:
    if not (pr and in_domain(model.tail).strict):
        return Check("tail-rate", SKIP, detail="needs positive recurrence and tail in D")
    tr = tail_rate(model)
    return _bounded("tail-rate", abs(tr.empirical_slope / tr.rate - 1.0), 0.01, f"lambda={tr.lambda_M:.8g}")


# Monte Carlo checks ---------------------------------------------------


def _mc(name: str, attempt, seed: int) -> Check:
    """``attempt(seed) -> (z, detail)``; one rerun with a fresh seed on failure."""
    z, detail = attempt(seed)
    if z is None:
        return Check(name, SKIP, detail=detail)
    if abs(z) <= MC_SIGMAS:
        return Check(name, PASS, abs(z), MC_SIGMAS, detail)
    z2, detail2 = attempt(seed + 10_007)
    status = PASS if z2 is not None and abs(z2) <= MC_SIGMAS else FAIL
    return Check(name, status, abs(z2), MC_SIGMAS, f"rerun after z={z:.2f}; {detail2}")


def _passage_attempt(model, start, kind, exact, n):
    def attempt(seed):
        if exact * n > MC_STEP_BUDGET:
            return None, f"mean {exact:.3g} too large for {n} samples"
        s = sim.mean_passage(model, start, kind, n, seed)
        if s.censored:
            return math.inf, f"{s.censored} censored samples"
        return (s.mean - exact) / s.std_err, f"mc={s.mean:.6g} exact={exact:.6g} se={s.std_err:.2g}"

    return attempt


def mc_checks(model: ValidatedModel, pr: bool, seed: int, n: int) -> list[Check]:
    solver = solver_for(model)
    out = []
    if pr:
        exact = math.exp(_return_log(model, 0))
        out.append(_mc("mc-return-0", _passage_attempt(model, 0, sim.RETURN, exact, n), seed))
        exact = solver.tau(2).value
        out.append(_mc("mc-tau-2", _passage_attempt(model, 2, sim.TAU, exact, n), seed + 1))
    else:
        out.append(Check("mc-return-0", SKIP, detail="not positive recurrent"))
        out.append(Check("mc-tau-2", SKIP, detail="not positive recurrent"))
    exact = math.exp(solver.ascent_log(2))
    out.append(_mc("mc-ascent-2", _passage_attempt(model, 2, sim.ASCENT, exact, n), seed + 2))
    out.append(_mc("mc-theta", _theta_attempt(model, max(n // 10, 1000)), seed + 3))
    return out


def _return_log(model: ValidatedModel, i: int) -> float:
    return expected_return(model, i).log_total


def _theta_attempt(model: ValidatedModel, n: int, top: int = 10):
    exact = np.concatenate(([1.0], np.exp(kappa_terms_log(model, top - 1))))
    climb = sum(math.exp(solver_for(model).ascent_log(k)) for k in range(top))

    def attempt(seed):
        if climb * n > MC_STEP_BUDGET:
            return None, f"climb to {top} too long ({climb:.3g} steps)"
        th = sim.sample_theta(model, top, n, seed)
        se = th.std(axis=0, ddof=1) / math.sqrt(n)
        z = np.abs(th.mean(axis=0)[1:] - exact[1:]) / se[1:]
        k = int(np.argmax(z))
        return float(z[k]), f"i <= {top}, worst at i={k + 2}"

    return attempt


def run_battery(
    model: ValidatedModel,
    seed: int = 0,
    samples: int = 200_000,
    monte_carlo: bool = True,
    truncate: int = 400,
) -> VerifyReport:
    """Run every check that applies to ``model``."""
    pr = classify(model, horizon=64).verdict == Verdict.POSITIVE_RECURRENT
    builders = [
        lambda: check_spectral(model),
        lambda: check_harmonic(model),
        lambda: check_l2_classify(model),
        lambda: check_truncation(model, pr, N=truncate),
        lambda: check_mass(model, pr),
        lambda: check_exit_closed(model),
        lambda: check_tau(model, pr),
        lambda: check_ascent(model),
        lambda: check_l1(model, pr),
        lambda: check_l2(model, pr),
        lambda: check_tail_rate(model, pr),
    ]
    names = [
        "spectral", "harmonic", "classify-vs-inequality", "truncated-oracle", "total-mass",
        "exit-closed-form", "expected-tau", "expected-ascent", "l1-closed-form",
        "l2-closed-form", "tail-rate",
    ]
    checks = []
    for name, build in zip(names, builders):
        try:
            checks.append(build())
        except LRWError as exc:
            checks.append(Check(name, FAIL, detail=f"{type(exc).__name__}: {exc}"))
    if monte_carlo:
        try:
            checks.extend(mc_checks(model, pr, seed, samples))
        except LRWError as exc:
            checks.append(Check("monte-carlo", FAIL, detail=f"{type(exc).__name__}: {exc}"))
    return VerifyReport(checks)
