"""Command-line interface: ``lptnreg <subcommand> ...``.

Exit codes: 0 success, 1 numerical failure, 2 input error. Failures print a
one-line JSON diagnostic on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .estimation import map_estimate, mle_estimate
from .exceptions import (
    DomainError,
    InitializationError,
    InputError,
    QuadratureError,
    RankDeficiencyError,
    SamplerDiagnosticError,
    ShapeError,
    StructuralError,
    UnsupportedModelError,
)
from .inference import outlier_report, predict, summarize
from .io import read_dataset, write_report, write_table
from .lptn import derive_params
from .models import Lptn, Normal, Student, parse_model
from .regression import Prior, center_covariates, validate_propriety
from .robustness import OutlierPath, kl_sigma_star, robustness_curve
from .samplers import RjConfig, bayes_factor_rj, sample_posterior
from .simstudy import StudyConfig, run_study

_INPUT_ERRORS = (
    InputError,
    DomainError,
    ShapeError,
    UnsupportedModelError,
    RankDeficiencyError,
    StructuralError,
)
_NUMERIC_ERRORS = (
    QuadratureError,
    SamplerDiagnosticError,
    InitializationError,
    FloatingPointError,
    ArithmeticError,
    RuntimeError,
)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected a comma-separated list of integers, got {text!r}") from None


def _load(args):
    data = read_dataset(args.data, args.response, args.delimiter)
    check = validate_propriety(data.n, data.p)
    if not check:
        raise InputError(check.reason)
    if args.center:
        centered, means = center_covariates(data)
        return centered, means
    return data, np.zeros(data.p - 1)


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _chain(args, data, model, prior):
    return sample_posterior(data, model, prior, args.iters, args.burnin, args.seed)


def _header(args, data, model, prior, means):
    return {
        "command": args.command,
        "model": model.label,
        "prior": prior.value,
        "seed": args.seed,
        "n": data.n,
        "p": data.p,
        "centered": bool(args.center),
        "column_means": dict(zip(data.coef_names[1:], means)),
    }


def cmd_fit(args) -> int:
    data, means = _load(args)
    model, prior = parse_model(args.model), Prior.parse(args.prior)
    chain = _chain(args, data, model, prior)
    summary = summarize(chain, args.level, data.coef_names)
    map_fit = map_estimate(data, model, prior).params
    mle_fit = mle_estimate(data, model).params
    point = {"map": (*map_fit.beta, map_fit.sigma), "mle": (*mle_fit.beta, mle_fit.sigma)}
    params = {}
    for j, s in enumerate(summary.parameters):
        params[s.name] = {
            "mean": s.mean,
            "median": s.median,
            "map": point["map"][j],
            "mle": point["mle"][j],
            "hpd_lower": s.lower,
            "hpd_upper": s.upper,
        }
    report = _header(args, data, model, prior, means)
    report.update(
        level=args.level,
        iterations=args.iters,
        burn_in=args.burnin,
        acceptance_rate=summary.acceptance_rate,
        parameters=params,
    )
    _emit(args, write_report(report))
    return 0


def cmd_predict(args) -> int:
    data, means = _load(args)
    model, prior = parse_model(args.model), Prior.parse(args.prior)
    x = _floats(args.x)
    if len(x) != data.p - 1:
        raise InputError(f"--x needs {data.p - 1} covariate values, got {len(x)}")
    x_new = np.append(1.0, np.asarray(x) - means)
    chain = _chain(args, data, model, prior)
    pred = predict(chain, x_new, model, args.level, seed=args.seed)
    report = _header(args, data, model, prior, means)
    report.update(
        x_new=x,
        level=args.level,
        median=pred.median,
        hpd_lower=pred.lower,
        hpd_upper=pred.upper,
    )
    _emit(args, write_report(report))
    return 0


def cmd_outliers(args) -> int:
    data, _ = _load(args)
    model, prior = parse_model(args.model), Prior.parse(args.prior)
    model.outlyingness(0.0)
    chain = _chain(args, data, model, prior)
    rep = outlier_report(chain, data, model, args.threshold)
    rows = [["row", "y", "fitted", "error", "z", "outlyingness", "flag"]]
    for i in range(data.n):
        rows.append(
            [i + 1, data.y[i], rep.fitted[i], rep.error[i], rep.z[i], rep.outlyingness[i], int(rep.flag[i])]
        )
    _emit(args, write_table(rows))
    return 0


def cmd_bf(args) -> int:
    data, means = _load(args)
    model, prior = parse_model(args.model), Prior.parse(args.prior)
    cfg = RjConfig(args.iters, args.burnin, args.seed, args.index)
    res = bayes_factor_rj(data, model, prior, cfg)
    report = _header(args, data, model, prior, means)
    report.update(
        tested=data.coef_names[args.index - 1],
        tested_index=args.index,
        iterations=args.iters,
        burn_in=args.burnin,
        bayes_factor=res.value,
        std_error=res.std_error,
        p_full=res.p_full,
    )
    _emit(args, write_report(report))
    return 0


def cmd_robustness(args) -> int:
    data, _ = _load(args)
    prior = Prior.parse(args.prior)
    models = [parse_model(m) for m in args.models.split(",")]
    path = OutlierPath(args.row - 1, args.a, args.b, _floats(args.omegas))
    rows = None
    for model in models:
        curve = robustness_curve(data, model, prior, path, args.iters, args.burnin, args.seed)
        body = list(curve.rows())
        if rows is None:
            rows = [["model", *body[0]]]
        rows += [[model.label, *r] for r in body[1:]]
    _emit(args, write_table(rows))
    return 0


def cmd_efficiency(args) -> int:
    rows = [["rho", "tau", "lambda", "sigma_ratio"]]
    for rho in _floats(args.rhos):
        p = derive_params(rho)
        rows.append([rho, p.tau, p.lam, kl_sigma_star(rho)])
    _emit(args, write_table(rows))
    return 0


def cmd_simstudy(args) -> int:
    estimators = {"normal": Normal()}
    for rho in _floats(args.rhos):
        m = Lptn(rho)
        estimators[m.label] = m
    for df in _floats(args.dfs):
        m = Student(df)
        estimators[m.label] = m
    cfg = StudyConfig(
        scenarios=tuple(_ints(args.scenarios)),
        estimators=estimators,
        sample_sizes=tuple(_ints(args.sizes)),
        replications=args.reps,
        seed=args.seed,
        workers=args.workers,
    )
    for s in cfg.scenarios:
        if s not in range(5):
            raise InputError(f"unknown scenario {s}; expected 0-4")
    report = run_study(cfg)
    _emit(args, write_table(report.rows()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lptnreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stochastic=True, data=True):
        if data:
            p.add_argument("data", help="delimited file with a header row")
            p.add_argument("--response", required=True, help="name of the response column")
            p.add_argument("--delimiter", default=None, help="field delimiter (sniffed if omitted)")
            p.add_argument("--no-center", dest="center", action="store_false",
                           help="do not centre the covariates")
            p.add_argument("--prior", default="recip-sigma", choices=["recip-sigma", "flat"])
        if stochastic:
            p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    def sampling(p, iters=50_000, burnin=10_000):
        p.add_argument("--model", default="lptn:0.95", help="normal, student:<df> or lptn:<rho>")
        p.add_argument("--iters", type=int, default=iters)
        p.add_argument("--burnin", type=int, default=burnin)

    p = sub.add_parser("fit", help="posterior summaries, MAP and MLE")
    common(p)
    sampling(p)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="posterior predictive median and HPD interval")
    common(p)
    sampling(p)
    p.add_argument("--x", required=True, help="comma-separated covariate values (original scale)")
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("outliers", help="per-observation outlyingness and flags")
    common(p)
    sampling(p)
    p.add_argument("--threshold", type=float, default=0.01)
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("bf", help="reversible-jump Bayes factor for beta_j != 0")
    common(p)
    sampling(p, iters=200_000, burnin=20_000)
    p.add_argument("--index", type=int, required=True,
                   help="1-based coefficient index (intercept is 1)")
    p.set_defaults(func=cmd_bf)

    p = sub.add_parser("robustness", help="posterior means as one response moves along a + b*omega")
    common(p)
    p.add_argument("--models", default="normal,lptn:0.95")
    p.add_argument("--iters", type=int, default=20_000)
    p.add_argument("--burnin", type=int, default=5_000)
    p.add_argument("--row", type=int, required=True, help="1-based row of the moving observation")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--omegas", default="1,2,5,10,100,1000,10000,100000,1000000")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("efficiency", help="sigma*/sigma_0 for LPTN(rho) under normal data")
    common(p, stochastic=False, data=False)
    p.add_argument("--rhos", default="0.80,0.84,0.90,0.93,0.95,0.98")
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("simstudy", help="premium versus protection study")
    common(p, data=False)
    p.add_argument("--scenarios", default="0,1,2,3,4")
    p.add_argument("--rhos", default="0.80,0.84,0.90,0.93,0.95,0.98")
    p.add_argument("--dfs", default="1,2,4,6,10")
    p.add_argument("--sizes", default="50,100")
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simstudy)
    return parser


def _fail(command, exc, code) -> int:
    diag = {"command": command, "error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(diag) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        return _fail(args.command, exc, 2)
    except _NUMERIC_ERRORS as exc:
        return _fail(args.command, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
