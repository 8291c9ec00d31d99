"""Command-line entry point: ``robust-t <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 properness refusal, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .errors import InvalidInputError, RobustTError
from .experiments import (
    SCHEMES,
    SimConfig,
    default_sweep_values,
    emit_curves,
    parse_gamma,
    simulate_dataset,
    sweep_outlier,
    table1_experiment,
)
from .hmc import HmcConfig, fit_limiting_posterior, fit_posterior
from .io import read_dataset, write_dataset, write_table
from .model import (
    FLAT,
    JEFFREYS,
    OutlierSpec,
    check_limiting_properness,
    check_properness,
    check_thm1_condition,
)
from .ols import ols_fit


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _gammas(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser, sampling=True, gamma=True):
    if gamma:
        p.add_argument("--gamma", default="4", help="degrees of freedom: positive integer or 'inf'")
    if sampling:
        p.add_argument("--prior", choices=("jeffreys", "flat"), default="jeffreys")
        p.add_argument("--samples", type=int, default=200_000)
        p.add_argument("--burnin", type=int, default=None, help="default: 10%% of --samples")
        p.add_argument("--step-size", type=float, default=0.05)
        p.add_argument("--leapfrog", type=int, default=20)
        p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-t", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a regression dataset")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--beta", type=_floats, default=None, help="true coefficients (default: all ones)")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--scheme", choices=SCHEMES, default="sequential")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("fit", help="posterior summary by HMC (normal model for --gamma inf)")
    p.add_argument("data")
    _common(p)

    p = sub.add_parser("limit-fit", help="summary of the outlier-limiting posterior")
    p.add_argument("data")
    p.add_argument("--outliers", type=_ints, required=True, help="1-based outlier indices, comma-separated")
    _common(p)

    p = sub.add_parser("ols", help="OLS estimates and normal-model posterior SDs")
    p.add_argument("data")
    _common(p, sampling=False, gamma=False)

    p = sub.add_parser("sweep-outlier", help="posterior mean of beta2 as one response grows")
    p.add_argument("data")
    p.add_argument("--index", type=int, default=None, help="1-based row to move (default: last)")
    p.add_argument("--y-values", type=_floats, default=None)
    p.add_argument("--gammas", type=_gammas, default=["1", "4", "10", "inf"])
    _common(p, gamma=False)

    p = sub.add_parser("table1", help="limiting vs reduced posterior of beta2")
    p.add_argument("data")
    p.add_argument("--index", type=int, default=None, help="1-based outlier row (default: last)")
    p.add_argument("--gammas", type=_ints, default=[1, 4, 10])
    _common(p, gamma=False)

    for name, help_ in (("sigma-star", "sigma*/sigma0 as a function of gamma"),
                        ("phi", "efficiency factor phi as a function of gamma")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--gamma-min", type=int, default=1)
        p.add_argument("--gamma-max", type=int, default=30)
        _common(p, sampling=False, gamma=False)

    p = sub.add_parser("check", help="properness and convergence conditions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--outliers", type=int, default=0, help="number of outliers |O|")
    p.add_argument("--gamma", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _hmc_config(args) -> HmcConfig:
    return HmcConfig(step_size=args.step_size, n_leapfrog=args.leapfrog, n_samples=args.samples,
                     n_burnin=args.burnin, seed=args.seed)


def _prior(args):
    return FLAT if args.prior == "flat" else JEFFREYS


def _emit(args, records, seed=None):
    text = write_table(records, None, args.format, seed=seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _normal_records(data):
    fit = ols_fit(data)
    if not fit.has_cov:
        raise InvalidInputError(f"need n > p + 2 for the normal posterior covariance, got n={data.n}")
    sd = np.sqrt(np.clip(np.diag(fit.posterior_cov), 0.0, None))
    return [{"param": f"beta{j + 1}", "mean": float(fit.beta_hat[j]), "sd": float(sd[j])}
            for j in range(data.p)]


def run(args) -> int:
    cmd = args.command
    if cmd == "simulate":
        beta = args.beta if args.beta is not None else [1.0] * args.p
        data = simulate_dataset(SimConfig(args.n, args.p, beta, args.sigma, args.scheme, args.seed))
        text = write_dataset(data)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    elif cmd == "fit":
        data = read_dataset(args.data)
        g = parse_gamma(args.gamma)
        if math.isinf(g):
            _emit(args, _normal_records(data), args.seed)
        else:
            s = fit_posterior(data, g, _prior(args), _hmc_config(args))
            _emit(args, s.records(), args.seed)
    elif cmd == "limit-fit":
        data = read_dataset(args.data)
        g = parse_gamma(args.gamma)
        if math.isinf(g):
            raise InvalidInputError("the limiting posterior needs a finite gamma")
        s = fit_limiting_posterior(data, OutlierSpec.from_indices(args.outliers), g,
                                   _prior(args), _hmc_config(args))
        _emit(args, s.records(), args.seed)
    elif cmd == "ols":
        data = read_dataset(args.data)
        fit = ols_fit(data)
        recs = []
        for j in range(data.p):
            sd = math.sqrt(max(fit.posterior_cov[j, j], 0.0)) if fit.has_cov else math.nan
            recs.append({"param": f"beta{j + 1}", "beta_hat": float(fit.beta_hat[j]), "posterior_sd": sd})
        _emit(args, recs, args.seed)
    elif cmd == "sweep-outlier":
        data = read_dataset(args.data)
        idx = args.index or data.n
        values = args.y_values if args.y_values is not None else default_sweep_values(data, idx)
        res = sweep_outlier(data, idx, values, args.gammas, _hmc_config(args), _prior(args), jobs=args.jobs)
        _emit(args, res.records(), args.seed)
    elif cmd == "table1":
        data = read_dataset(args.data)
        idx = args.index or data.n
        res = table1_experiment(data, idx, args.gammas, _hmc_config(args), _prior(args), jobs=args.jobs)
        _emit(args, res.records(), args.seed)
    elif cmd in ("sigma-star", "phi"):
        kind = "sigma_star" if cmd == "sigma-star" else "phi"
        _emit(args, emit_curves(kind, args.gamma_min, args.gamma_max), args.seed)
    elif cmd == "check":
        if args.n < 1 or args.p < 1 or not 0 <= args.outliers <= args.n:
            raise InvalidInputError("need n >= 1, p >= 1 and 0 <= outliers <= n")
        thm = check_thm1_condition(args.n, args.p, args.outliers, args.gamma)
        recs = [
            {"check": "properness", "value": check_properness(args.n, args.p)},
            {"check": "limiting_properness",
             "value": check_limiting_properness(args.n, args.p, args.outliers, args.gamma)},
            {"check": "convergence_condition", "value": thm.holds},
            {"check": "max_outliers", "value": thm.max_outliers},
            {"check": "breakdown_fraction", "value": thm.breakdown_fraction},
        ]
        args.seed = None
        _emit(args, recs)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except RobustTError as exc:
        print(f"robust-t: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"robust-t: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
