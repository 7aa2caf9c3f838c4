"""Command-line interface: ``inardisp <subcommand> ...``.

Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import InarError
from .estimation import (
    PARAM_NAMES,
    asymptotic_cov_dp,
    asymptotic_cov_gp,
    cml_fit,
    cls_fit,
    yw_fit,
)
from .experiments import DEFAULT_SEED, McConfig, run_cov_check, run_mc_study
from .inference import equidispersion_test, lr_test, sample_stats
from .process import dispersion_table, model_from_params, simulate, stationary_moments
from .reporting import (
    RunManifest,
    fit_document,
    latex_dispersion_table,
    latex_mc_table,
    mc_document,
    read_series,
    test_document,
    write_report,
    write_series,
)

SEED_ENV = "INARDISP_SEED"
FAMILIES = ("poisson", "dp", "gp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _choice_list(choices):
    def parse(text: str) -> list[str]:
        items = [v.strip().lower() for v in text.split(",") if v.strip()]
        if items == ["all"]:
            return list(choices)
        bad = [v for v in items if v not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(choices)} or 'all'")
        return items

    return parse


def _add_input(p):
    p.add_argument("input", help="series file (one count per line, or CSV with --column)")
    p.add_argument("--column", help="CSV column name or zero-based index; implies CSV input")
    p.add_argument("--format", choices=("plain", "csv"), default=None)


def _load(args):
    fmt = args.format or ("csv" if args.column is not None else "plain")
    return read_series(args.input, fmt, args.column)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="inardisp", description="INAR(1) models with Poisson, double Poisson and generalized Poisson innovations.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="simulate an INAR(1) path")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--phi", type=float)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("fit", help="fit models to a series")
    _add_input(p)
    p.add_argument("--family", type=_choice_list(FAMILIES), default=["poisson", "dp", "gp"])
    p.add_argument("--method", type=_choice_list(("yw", "cls", "cml")), default=["cml"])
    p.add_argument("--max-lag", type=int, default=5)
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("test-dispersion", help="equidispersion test")
    _add_input(p)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--direction", choices=("over", "under"), default="over")
    p.add_argument("--alpha-hat", type=float)
    p.add_argument("--uncentered", action="store_true", help="compare the raw Fisher index with the threshold")
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("lr-test", help="likelihood-ratio test between nested fitted families")
    p.add_argument("input", nargs="?")
    p.add_argument("--column")
    p.add_argument("--format", choices=("plain", "csv"), default=None)
    p.add_argument("--null", dest="null_family", choices=FAMILIES, default="poisson")
    p.add_argument("--alt", dest="alt_family", choices=("dp", "gp"), default="dp")
    p.add_argument("--loglik-null", type=float)
    p.add_argument("--loglik-alt", type=float)
    p.add_argument("--df", type=int)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("mc-study", help="Monte Carlo bias/MSE study from a JSON config")
    p.add_argument("config", help="JSON file with McConfig fields")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--latex-table", action="store_true")
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("cov-check", help="empirical vs asymptotic covariance of the CLS estimators")
    p.add_argument("--family", choices=("dp", "gp"), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--length", type=int, default=5000)
    p.add_argument("--replicates", type=int, default=2000)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("disp-table", help="stationary Fisher index grid")
    p.add_argument("--family", choices=("dp", "gp"), required=True)
    p.add_argument("--alphas", type=_float_list, required=True)
    p.add_argument("--phis", type=_float_list, required=True)
    p.add_argument("--latex-table", action="store_true")
    p.add_argument("-o", "--output", default="-")
    return parser


def _implied(fit) -> dict | None:
    try:
        m = stationary_moments(fit.model())
    except (InarError, ValueError, TypeError):
        return None
    return {"mean": m.mean, "variance": m.variance, "fisher_index": m.fisher_index}


def _cls_std_errors(fit, T: int) -> dict | None:
    # plug-in standard errors from the CLS limit laws, where one exists
    try:
        if fit.method != "cls" or not fit.in_domain():
            return None
        if fit.family == "dp":
            cov = asymptotic_cov_dp(fit.alpha, fit.mu, fit.phi)
        elif fit.family == "gp":
            cov = asymptotic_cov_gp(fit.alpha, fit.mu, fit.phi)
        else:
            return None
    except (InarError, ValueError):
        return None
    se = np.sqrt(np.diag(cov.matrix) / T)
    return {name: float(v) for name, v in zip(cov.labels, se) if math.isfinite(v)}


def _cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.family != "poisson" and args.phi is None:
        raise UsageError(f"--phi is required for family {args.family}")
    model = model_from_params(args.family, args.alpha, args.mu, args.phi)
    series = simulate(model, args.length, args.burn_in, np.random.default_rng(seed))
    write_series(series, args.output)
    return 0


def _cmd_fit(args) -> int:
    series = _load(args)
    stats = sample_stats(series, args.max_lag)
    fits = []
    for family in args.family:
        for method in args.method:
            try:
                if method == "cml":
                    fit = cml_fit(series, family)
                elif method == "yw":
                    fit = yw_fit(series, family)
                else:
                    fit = cls_fit(series, family)
                    fit.std_errors = _cls_std_errors(fit, len(series))
                fits.append(fit_document(fit, _implied(fit)))
            except InarError as exc:
                fits.append({"method": method, "family": family, "error": str(exc)})
    sample = {
        "T": len(series),
        "mean": stats.mean,
        "variance": stats.variance,
        "fisher_index": stats.fisher_index,
        "acf": list(stats.acf),
    }
    config = {"input": str(args.input), "family": args.family, "method": args.method}
    manifest = RunManifest.create("fit", config)
    if len(fits) == 1:
        doc = dict(fits[0])
        doc["sample"] = sample
    else:
        doc = {"sample": sample, "fits": fits}
    write_report(doc, args.output, manifest)
    return 0 if all("error" not in f for f in fits) else 2


def _cmd_test_dispersion(args) -> int:
    series = _load(args)
    report = equidispersion_test(series, args.alpha_hat, args.beta, args.direction, centered=not args.uncentered)
    config = {"input": str(args.input), "beta": args.beta, "direction": args.direction,
              "alpha_hat": args.alpha_hat, "centered": not args.uncentered}
    write_report(test_document(report), args.output, RunManifest.create("test-dispersion", config))
    return 0


def _cmd_lr_test(args) -> int:
    config = {"null": args.null_family, "alt": args.alt_family, "level": args.level}
    if args.input is not None:
        series = _load(args)
        null_fit = cml_fit(series, args.null_family)
        alt_fit = cml_fit(series, args.alt_family)
        df = args.df or (len(PARAM_NAMES[args.alt_family]) - len(PARAM_NAMES[args.null_family]))
        if df < 1:
            raise UsageError("the alternative family must have more parameters than the null")
        report = lr_test(null_fit.loglik, alt_fit.loglik, df, args.level)
        config["input"] = str(args.input)
        doc = test_document(report)
        doc["fits"] = [fit_document(null_fit, _implied(null_fit)), fit_document(alt_fit, _implied(alt_fit))]
    else:
        if args.loglik_null is None or args.loglik_alt is None:
            raise UsageError("give an input series or both --loglik-null and --loglik-alt")
        df = args.df or 1
        report = lr_test(args.loglik_null, args.loglik_alt, df, args.level)
        config.update(loglik_null=args.loglik_null, loglik_alt=args.loglik_alt, df=df)
        doc = test_document(report)
    write_report(doc, args.output, RunManifest.create("lr-test", config))
    return 0


def _cmd_mc_study(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise InarError(f"invalid JSON config: {exc}") from exc
    if args.replicates is not None:
        raw["replicates"] = args.replicates
    if args.seed is not None:
        raw["master_seed"] = args.seed
    raw.setdefault("master_seed", default_seed())
    try:
        config = McConfig.from_dict(raw)
    except TypeError as exc:
        raise InarError(f"bad config: {exc}") from exc
    result = run_mc_study(config, workers=args.workers)
    if args.latex_table:
        text = latex_mc_table(result)
        _emit(text, args.output)
        return 0
    manifest = RunManifest.create("mc-study", dict(raw), config.master_seed)
    write_report(mc_document(result), args.output, manifest)
    return 0


def _cmd_cov_check(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    params = {"alpha": args.alpha, "mu": args.mu, "phi": args.phi}
    check = run_cov_check(args.family, params, args.length, args.replicates, seed, workers=args.workers)
    doc = {
        "family": check.family,
        "labels": list(check.labels),
        "empirical": check.empirical,
        "analytic": check.analytic,
        "rel_diff": check.rel_diff,
        "n_failed": check.n_failed,
    }
    config = dict(params, family=args.family, T=args.length, replicates=args.replicates)
    write_report(doc, args.output, RunManifest.create("cov-check", config, seed))
    return 0


def _cmd_disp_table(args) -> int:
    table = dispersion_table(args.family, args.alphas, args.phis)
    if args.latex_table:
        _emit(latex_dispersion_table(args.family, args.alphas, args.phis, table), args.output)
        return 0
    doc = {
        "family": args.family,
        "alphas": args.alphas,
        "phis": args.phis,
        "rows": [{"phi": phi, "fisher_index": list(row)} for phi, row in zip(args.phis, table)],
    }
    config = {"family": args.family, "alphas": args.alphas, "phis": args.phis}
    write_report(doc, args.output, RunManifest.create("disp-table", config))
    return 0


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "test-dispersion": _cmd_test_dispersion,
    "lr-test": _cmd_lr_test,
    "mc-study": _cmd_mc_study,
    "cov-check": _cmd_cov_check,
    "disp-table": _cmd_disp_table,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        if str(exc) and not isinstance(exc.__context__, argparse.ArgumentError):
            sys.stderr.write(f"inardisp: usage error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (InarError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"inardisp: error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"inardisp: error: {exc}\n")
        return 2


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
