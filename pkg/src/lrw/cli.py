"""Command-line interface.

Every command emits a report ``{"schema": 1, "command", "model_digest",
"results", "diagnostics"}``. With ``--json`` it is printed as
key-sorted JSON so identical inputs give byte-identical output;
otherwise a plain table is printed.

Exit codes: 0 success, 1 model error, 2 numerical failure (including a
failed cross-check in ``verify``), 3 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from lrw.branching import DEFAULT_HORIZON, classify
from lrw.errors import LRWError, ModelError, NumericalError
from lrw.model import ValidatedModel, load_model
from lrw.passage import DEFAULT_TOL, exit_probabilities_closed, solver_for
from lrw.spectral import hitting_polynomial, in_domain, limit_matrix, perron_root
from lrw.stationary import stationary_distribution, tail_rate

SCHEMA = 1
EXIT_OK, EXIT_MODEL, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _clean(value: Any) -> Any:
    """Make a value JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def _dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False)


# commands -------------------------------------------------------------


def cmd_validate(model: ValidatedModel, args) -> tuple[dict, dict]:
    return {"model": model.to_dict(), "cutoff": model.cutoff}, {}


def cmd_classify(model: ValidatedModel, args) -> tuple[dict, dict]:
    c = classify(model, horizon=args.horizon)
    results = {"verdict": c.verdict.value, "boundary_case": c.boundary_case, "evidence": c.evidence}
    return results, {"horizon": args.horizon}


def cmd_stationary(model: ValidatedModel, args) -> tuple[dict, dict]:
    res = stationary_distribution(model, i_max=args.imax, tol=args.tol)
    cumulative = np.cumsum(res.pi)
    rows = [
        {"i": i, "pi": float(res.pi[i]), "expected_return": res.breakdowns[i].total, "cumulative": float(cumulative[i])}
        for i in range(args.imax + 1)
    ]
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["i", "pi", "expected_return"])
            for r in rows:
                writer.writerow([r["i"], repr(r["pi"]), repr(r["expected_return"])])
    results = {"rows": rows, "tail_mass": res.tail_mass, "norm_residual": res.norm_residual}
    diagnostics = dict(res.diagnostics)
    if args.truncate:
        from lrw.oracle.linalg import truncated_stationary

        hat = truncated_stationary(model, args.truncate).pi_hat
        top = min(args.imax, args.truncate) + 1
        diagnostics["truncate"] = args.truncate
        diagnostics["truncated_sup_diff"] = float(np.max(np.abs(res.pi[:top] - hat[:top])))
    return results, diagnostics


def cmd_tail_rate(model: ValidatedModel, args) -> tuple[dict, dict]:
    tr = tail_rate(model, tol=args.tol)
    results = {
        "lambda_M": tr.lambda_M,
        "minus_log_lambda": tr.rate,
        "empirical_slope": tr.empirical_slope,
    }
    return results, {"window": list(tr.window), "tol": args.tol}


def cmd_passage(model: ValidatedModel, args) -> tuple[dict, dict]:
    i = args.state
    if i < 1:
        raise UsageError("--state must be >= 1")
    solver = solver_for(model, args.tol, args.horizon)
    results: dict[str, Any] = {"state": i}
    if args.interval is not None:
        if args.interval < i:
            raise UsageError("--interval must be >= --state")
        if model.L <= 2:
            split = exit_probabilities_closed(model, i, args.interval)
            results["exit_split"] = {"probs": split.probs, "top": 1.0 - split.total, "interval": [i, args.interval]}
        else:
            from lrw.oracle.linalg import absorption_solve

            res = absorption_solve(model, i, args.interval)
            results["exit_split"] = {"probs": res.exit_probs, "top": res.top_prob, "interval": [i, args.interval]}
    else:
        split = solver.exit_split(i)
        results["exit_split"] = {"probs": split.probs, "converged": split.converged, "horizon_used": split.horizon_used}
    if model.L <= 2 and solver.method == "branching":
        t = solver.abg(i)
        results["abg"] = {"alpha": t.alpha, "beta": t.beta, "gamma": t.gamma}
    if in_domain(model.tail).strict:
        tau = solver.tau(i)
        results["expected_tau"] = tau.value
        results["expected_tau_terms"] = tau.terms
    log_ascent = solver.ascent_log(i)
    results["log_expected_ascent"] = log_ascent
    results["expected_ascent"] = math.exp(log_ascent) if log_ascent < 700 else math.inf
    return results, {"tol": args.tol, "horizon": args.horizon, "method": solver.method}


def cmd_spectral(model: ValidatedModel, args) -> tuple[dict, dict]:
    tail = model.tail
    dom = in_domain(tail)
    results: dict[str, Any] = {
        "M": limit_matrix(tail),
        "F_coefficients": hitting_polynomial(tail),
        "drift": dom.drift,
        "in_D": dom.in_D,
    }
    if dom.strict:
        r = perron_root(tail)
        results.update(
            lambda_M=r.lam,
            x_star=r.x_star,
            lambda_power=r.lam_power,
            lambda_poly=r.lam_poly,
            method_agreement=r.method_agreement,
            right_residual=r.right_residual,
            left_residual=r.left_residual,
            F_at_inverse=r.f_at_inverse,
        )
    return results, {}


def cmd_simulate(model: ValidatedModel, args) -> tuple[dict, dict]:
    from lrw.oracle.simulate import simulate

    stats = simulate(model, args.steps, args.seed)
    return stats.to_dict(), {"steps": args.steps, "seed": args.seed}


def cmd_verify(model: ValidatedModel, args) -> tuple[dict, dict]:
    from lrw.oracle.verify import run_battery

    report = run_battery(model, seed=args.seed, samples=args.samples, truncate=args.truncate or 400)
    args._verify_table = report.table()
    args._verify_failed = not report.passed
    return report.to_dict(), {"seed": args.seed, "samples": args.samples, "truncate": args.truncate or 400}


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "stationary": cmd_stationary,
    "tail-rate": cmd_tail_rate,
    "passage": cmd_passage,
    "spectral": cmd_spectral,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("model", help="model JSON file")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    common.add_argument("--json", action="store_true", help="print the JSON report")

    parser = _Parser(prog="lrw", description="(L,1)-reflecting random walk toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common])
    sub.add_parser("classify", parents=[common])
    p = sub.add_parser("stationary", parents=[common])
    p.add_argument("--imax", type=int, default=100)
    p.add_argument("--csv", metavar="PATH")
    p.add_argument("--truncate", type=int, metavar="N")
    sub.add_parser("tail-rate", parents=[common])
    p = sub.add_parser("passage", parents=[common])
    p.add_argument("--state", type=int, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--limit", action="store_true", help="exit split of (i, infinity) (default)")
    mode.add_argument("--interval", type=int, metavar="N", help="exit split of {i..N}")
    sub.add_parser("spectral", parents=[common])
    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("verify", parents=[common])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--truncate", type=int, metavar="N")
    return parser


def _table(command: str, results: dict, args) -> str:
    if command == "verify":
        return args._verify_table
    if command == "stationary":
        lines = [f"{'i':>5} {'pi':>24} {'expected_return':>24} {'cumulative':>20}"]
        for r in results["rows"]:
            lines.append(f"{r['i']:>5} {r['pi']:>24.17g} {r['expected_return']:>24.17g} {r['cumulative']:>20.15f}")
        lines.append(f"tail_mass {results['tail_mass']:.6e}  norm_residual {results['norm_residual']:.3e}")
        return "\n".join(lines)
    lines = []
    for key, value in _clean(results).items():
        if isinstance(value, dict):
            lines.append(f"{key}:")
            lines.extend(f"  {k:<22} {v}" for k, v in value.items())
        else:
            lines.append(f"{key:<24} {value}")
    return "\n".join(lines)


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    """Run one command; returns the exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "steps", 1) < 1 or getattr(args, "imax", 0) < 0:
            raise UsageError("--steps must be >= 1 and --imax >= 0")
        try:
            model = load_model(args.model)
        except (OSError, ValueError) as exc:
            if isinstance(exc, LRWError):
                raise
            raise ModelError(f"cannot read {args.model}: {exc}") from None
        results, diagnostics = COMMANDS[args.command](model, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"model error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_MODEL
    except (NumericalError, OverflowError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_NUMERICAL
    diagnostics.setdefault("tol", args.tol)
    report = {
        "schema": SCHEMA,
        "command": args.command,
        "model_digest": model.digest(),
        "results": results,
        "diagnostics": diagnostics,
    }
    if args.json:
        print(_dumps(report), file=out)
    else:
        print(_table(args.command, results, args), file=out)
    if getattr(args, "_verify_failed", False):
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
