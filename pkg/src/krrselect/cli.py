"""Command line interface: ``krrselect {fit,simulate,compare,prop1,calibrate}``.

Exit codes: 0 success, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .fit import FitOptions, fit_on_csv

log = logging.getLogger("krrselect")

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _noise(text: str):
    if text == "auto":
        return "auto"
    try:
        m, gamma = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--noise expects 'auto' or 'M,gamma', got {text!r}") from None
    if not (m > 0 and gamma > 0):
        raise argparse.ArgumentTypeError("noise parameters must be positive")
    return (m, gamma)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _shared(p: argparse.ArgumentParser, kernel_default=None) -> None:
    p.add_argument("--kernel", default=kernel_default, help="'gaussian:<h>' or 'trig:<a>:<J>'")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--mode", choices=("paper", "practical"), default="practical")
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--c-scale", dest="c_scale", type=float, default=None)
    p.add_argument("--c-lp", dest="c_lp", type=float, default=None)
    p.add_argument("--noise", type=_noise, default="auto", help="'auto' or 'M,gamma'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.add_argument("--no-lambda-factor", dest="threshold_lambda_factor", action="store_false",
                   help="use the ASUS threshold without the lambda_{k-1} factor")


def _experiment(p: argparse.ArgumentParser, selectors: str) -> None:
    p.add_argument("--selectors", default=selectors, help="comma-separated subset of asus,lp,holdout")
    p.add_argument("--sizes", type=_int_list, default=(256, 512, 1024, 2048, 4096))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--J", type=int, default=2000)
    p.add_argument("--profile", choices=("flat", "harmonic"), default="harmonic")
    p.add_argument("--split-fraction", dest="split_fraction", type=float, default=0.2)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent trials")
    p.add_argument("--timing", action="store_true", help="record wall_ms (makes output non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="krrselect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="select lambda and fit KRR on a CSV file")
    p.add_argument("csv", help="CSV with header x1..xd,y")
    p.add_argument("--selector", choices=("asus", "lp", "holdout"), default="asus")
    p.add_argument("--split-fraction", dest="split_fraction", type=float, default=0.2)
    p.add_argument("--no-center", dest="center", action="store_false", help="do not subtract mean(y)")
    _shared(p, kernel_default="gaussian:0.2")

    for name, selectors, help_text in (
        ("simulate", "asus", "rate experiment on synthetic data (per-trial CSV + JSON report)"),
        ("compare", "asus,lp,holdout", "selector comparison table"),
        ("prop1", "asus", "successive-difference and resolvent-identity diagnostics"),
        ("calibrate", "asus,lp", "sweep threshold scales against the grid oracle"),
    ):
        p = sub.add_parser(name, help=help_text)
        _experiment(p, selectors)
        _shared(p)
        if name == "calibrate":
            p.add_argument("--c-grid", dest="c_grid", type=_float_list, default=bench.CALIBRATION_GRID)
            p.add_argument("--r-values", dest="r_values", type=_float_list, default=(0.5, 1.0))
    return parser


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _config(args) -> bench.ExperimentConfig:
    kwargs = dict(
        selectors=tuple(s.strip() for s in args.selectors.split(",") if s.strip()),
        sizes=args.sizes, trials=args.trials, sigma=args.sigma, r=args.r, a=args.a, J=args.J,
        kernel=args.kernel, profile=args.profile, delta=args.delta, b=args.b, q=args.q, mode=args.mode,
        split_fraction=args.split_fraction, base_seed=args.seed, noise=args.noise,
        threshold_lambda_factor=args.threshold_lambda_factor, jobs=args.jobs, timing=args.timing, output=args.out,
    )
    paper = args.mode == "paper"
    kwargs["c_scale"] = args.c_scale if args.c_scale is not None else (1.0 if paper else bench.CALIBRATED_C_SCALE)
    kwargs["c_lp"] = args.c_lp if args.c_lp is not None else (1.0 if paper else bench.CALIBRATED_C_LP)
    if args.cap is not None:
        kwargs["cap"] = args.cap
    return bench.ExperimentConfig(**kwargs)


def _run(args) -> int:
    if args.command == "fit":
        opts = FitOptions(
            selector=args.selector, delta=args.delta, b=args.b, q=args.q, mode=args.mode,
            cap=args.cap if args.cap is not None else 400, c_scale=args.c_scale, c_lp=args.c_lp,
            noise=args.noise, split_fraction=args.split_fraction, seed=args.seed, center=args.center,
            threshold_lambda_factor=args.threshold_lambda_factor,
        )
        summary = fit_on_csv(args.csv, args.kernel, opts)
        _emit(json.dumps(summary, indent=2) + "\n", args.out)
        return 0

    config = _config(args)
    if args.command == "simulate":
        report = bench.run_rate_experiment(config)
        if args.out is None:
            sys.stdout.write(report.to_csv())
        else:
            out = Path(args.out)
            out.write_text(report.to_csv(), encoding="utf-8")
            out.with_suffix(".json").write_text(report.to_json(), encoding="utf-8")
        for name, fit in report.slopes.items():
            log.info("slope %s: rho %.3f  k %.3f", name,
                     fit["rho"] if name == "theory" else fit["rho"]["slope"],
                     fit["k"] if name == "theory" else fit["k"]["slope"])
    elif args.command == "compare":
        _emit(bench.run_selector_comparison(config), args.out)
    elif args.command == "prop1":
        _emit(bench.run_prop1_diagnostic(config), args.out)
    elif args.command == "calibrate":
        doc = bench.run_calibration(config, r_values=args.r_values, c_grid=args.c_grid)
        _emit(json.dumps(doc, indent=2, sort_keys=True, default=list) + "\n", args.out)
        log.info("best c_scale %g, best c_lp %g", doc["best_c_scale"], doc["best_c_lp"])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _run(args)
    # LinAlgError subclasses ValueError, so it must be caught first
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"krrselect: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"krrselect: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
