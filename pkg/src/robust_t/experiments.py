"""Simulation and the outlier experiments: sweep, limiting-vs-reduced table, curves."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .asymptotics import GAUSS_HERMITE, QuadratureSpec, phi_factor, solve_sigma_star
from .errors import InvalidInputError, RobustTError
from .hmc import HmcConfig, fit_limiting_posterior, fit_posterior
from .model import (
    JEFFREYS,
    Dataset,
    OutlierSpec,
    PriorSpec,
    check_gamma,
    check_limiting_properness,
    check_properness,
    check_thm1_condition,
)
from .ols import normal_posterior_beta2_summary

SCHEMES = ("sequential", "iid_standard_normal")
SWEEP_OFFSETS = (25.0, 50.0, 100.0, 250.0, 1e3, 1e4)
SIM_STREAM = 2  # Philox key word distinguishing simulation draws from chain draws


@dataclass(frozen=True)
class SimConfig:
    n: int = 20
    p: int = 2
    beta_true: Sequence[float] = (1.0, 1.0)
    sigma_true: float = 1.0
    covariate_scheme: str = "sequential"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        if len(self.beta_true) != self.p:
            raise InvalidInputError(f"beta_true needs {self.p} entries")
        if not self.n > self.p + 1:
            raise InvalidInputError(f"need n > p + 1, got n={self.n}, p={self.p}")
        if not self.sigma_true >= 0:
            raise InvalidInputError("sigma_true must be non-negative")
        if self.covariate_scheme not in SCHEMES:
            raise InvalidInputError(f"covariate_scheme must be one of {SCHEMES}")
        if self.covariate_scheme == "sequential" and self.p > 2:
            raise InvalidInputError("the sequential scheme has one covariate (p <= 2)")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")


def simulate_dataset(config: SimConfig) -> Dataset:
    """y_i = x_i' beta + sigma * eps_i with standard normal errors.

    Sequential covariates are x_i2 = i; otherwise covariates 2..p are i.i.d.
    standard normal (drawn before the errors from the same stream).
    """
    key = np.array([int(config.seed), SIM_STREAM], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    n, p = config.n, config.p
    X = np.ones((n, p))
    if p > 1:
        if config.covariate_scheme == "sequential":
            X[:, 1] = np.arange(1, n + 1, dtype=float)
        else:
            X[:, 1:] = rng.standard_normal((n, p - 1))
    eps = rng.standard_normal(n)
    y = X @ np.asarray(config.beta_true) + config.sigma_true * eps
    return Dataset(X, y)


def default_sweep_values(dataset: Dataset, index: int) -> list:
    """The observed y_index followed by the fixed large values."""
    return [float(dataset.response[index - 1])] + list(SWEEP_OFFSETS)


def parse_gamma(value):
    """int degrees of freedom, or math.inf for the normal model."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "infinity", "+inf"):
            return math.inf
        try:
            value = int(v)
        except ValueError:
            raise InvalidInputError(f"gamma must be a positive integer or 'inf', got {value!r}") from None
    if isinstance(value, float) and math.isinf(value) and value > 0:
        return math.inf
    return check_gamma(value)


def _gamma_key(g):
    return (1, 0) if math.isinf(g) else (0, g)


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    y_n: float
    posterior_mean_beta2: float
    mcse: float
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepResult:
    rows: tuple

    def records(self) -> list:
        return [
            {"gamma": r.gamma, "y_n": r.y_n, "posterior_mean_beta2": r.posterior_mean_beta2,
             "mcse": r.mcse, "error": r.error}
            for r in self.rows
        ]

    @classmethod
    def from_records(cls, records) -> "SweepResult":
        return cls(tuple(SweepRow(rec["gamma"], rec["y_n"], rec["posterior_mean_beta2"],
                                  rec["mcse"], rec.get("error")) for rec in records))

    def column(self, gamma) -> list:
        """Rows for one gamma, in y_n order."""
        return [r for r in self.rows if r.gamma == gamma]


def sweep_outlier(dataset: Dataset, outlier_index: int, y_values: Sequence[float],
                  gammas: Sequence, hmc: HmcConfig = HmcConfig(), prior: PriorSpec = JEFFREYS,
                  jobs: int = 1, backend=None) -> SweepResult:
    """Posterior mean of beta_2 as the response of row ``outlier_index`` moves.

    Finite gamma cells are HMC fits; ``inf`` cells use the normal-model
    closed form (mcse 0). A cell whose posterior is not known to be proper
    is reported with an error message instead of aborting the sweep.
    """
    if dataset.p < 2:
        raise InvalidInputError("need p >= 2 for a slope coefficient")
    if not 1 <= outlier_index <= dataset.n:
        raise InvalidInputError(f"outlier_index {outlier_index} outside 1..{dataset.n}")
    gammas = [parse_gamma(g) for g in gammas]
    cells = [(g, float(v)) for g in gammas for v in y_values]

    def run(cell):
        g, v = cell
        y = np.array(dataset.response)
        y[outlier_index - 1] = v
        data = dataset.with_response(y)
        try:
            if math.isinf(g):
                s = normal_posterior_beta2_summary(data)
                return SweepRow(g, v, s["mean"], 0.0)
            if not check_properness(data.n, data.p):
                return SweepRow(g, v, math.nan, math.nan, f"improper: need n > p + 1 (n={data.n}, p={data.p})")
            fit = fit_posterior(data, g, prior, hmc, backend=backend)
            return SweepRow(g, v, float(fit.mean[1]), float(fit.mcse_mean[1]))
        except RobustTError as exc:
            return SweepRow(g, v, math.nan, math.nan, str(exc))

    rows = _map(run, cells, jobs)
    rows.sort(key=lambda r: (_gamma_key(r.gamma), r.y_n))
    return SweepResult(tuple(rows))


# ---------------------------------------------------------------------------
# limiting vs reduced


@dataclass(frozen=True)
class Table1Row:
    gamma: float
    distribution: str  # "limiting", "reduced" or "normal_reduced"
    mean_beta2: float
    sd_beta2: float
    mcse_mean: float
    mcse_sd: float
    error: Optional[str] = None


@dataclass(frozen=True)
class Table1Result:
    rows: tuple = field(default_factory=tuple)

    def get(self, gamma, distribution) -> Table1Row:
        for r in self.rows:
            if r.gamma == gamma and r.distribution == distribution:
                return r
        raise KeyError((gamma, distribution))

    def records(self) -> list:
        return [
            {"gamma": r.gamma, "distribution": r.distribution, "mean_beta2": r.mean_beta2,
             "sd_beta2": r.sd_beta2, "mcse_mean": r.mcse_mean, "mcse_sd": r.mcse_sd, "error": r.error}
            for r in self.rows
        ]

    @classmethod
    def from_records(cls, records) -> "Table1Result":
        return cls(tuple(Table1Row(rec["gamma"], rec["distribution"], rec["mean_beta2"], rec["sd_beta2"],
                                   rec["mcse_mean"], rec["mcse_sd"], rec.get("error")) for rec in records))


def _row_from_fit(g, dist, fit) -> Table1Row:
    return Table1Row(g, dist, float(fit.mean[1]), float(fit.sd[1]),
                     float(fit.mcse_mean[1]), float(fit.mcse_sd[1]))


def _nan_row(g, dist, msg) -> Table1Row:
    return Table1Row(g, dist, math.nan, math.nan, math.nan, math.nan, msg)


def table1_experiment(dataset: Dataset, outlier_index: int, gammas: Sequence[int],
                      hmc: HmcConfig = HmcConfig(), prior: PriorSpec = JEFFREYS, jobs: int = 1,
                      backend=None, outliers: Optional[OutlierSpec] = None) -> Table1Result:
    """beta_2 under the limiting posterior versus the posterior without the outlier.

    ``outliers`` overrides the default outlier set ``{outlier_index}`` for the
    limiting columns (an empty set gives the full posterior). The normal
    model on the reduced data is appended as a closed-form row.
    """
    if dataset.p < 2:
        raise InvalidInputError("need p >= 2 for a slope coefficient")
    if outliers is None:
        outliers = OutlierSpec.from_indices([outlier_index])
    reduced = dataset.drop(outlier_index)
    n_out = len(outliers.outlier_indices)
    gammas = [check_gamma(g) for g in gammas]
    jobs_list = [(g, kind) for g in gammas for kind in ("limiting", "reduced")]

    def run(job):
        g, kind = job
        try:
            if kind == "limiting":
                if not check_limiting_properness(dataset.n, dataset.p, n_out, g):
                    return _nan_row(g, kind, "limiting posterior not known to be proper")
                if n_out and not check_thm1_condition(dataset.n, dataset.p, n_out, g).holds:
                    return _nan_row(g, kind, "convergence condition on |O^c| fails")
                return _row_from_fit(g, kind, fit_limiting_posterior(dataset, outliers, g, prior, hmc,
                                                                     backend=backend))
            if not check_properness(reduced.n, reduced.p):
                return _nan_row(g, kind, "reduced posterior not known to be proper")
            return _row_from_fit(g, kind, fit_posterior(reduced, g, prior, hmc, backend=backend))
        except RobustTError as exc:
            return _nan_row(g, kind, str(exc))

    rows = _map(run, jobs_list, jobs)
    try:
        s = normal_posterior_beta2_summary(reduced)
        rows.append(Table1Row(math.inf, "normal_reduced", s["mean"], s["sd"], 0.0, 0.0))
    except RobustTError as exc:
        rows.append(_nan_row(math.inf, "normal_reduced", str(exc)))
    return Table1Result(tuple(rows))


# ---------------------------------------------------------------------------
# curves


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def emit_curves(kind: str, gamma_min: int, gamma_max: int,
                spec: QuadratureSpec = GAUSS_HERMITE) -> list:
    """Rows {gamma, value} of sigma*/sigma0 or phi, to 6 significant digits."""
    gamma_min, gamma_max = check_gamma(gamma_min), check_gamma(gamma_max)
    if gamma_min > gamma_max:
        raise InvalidInputError("gamma_min must not exceed gamma_max")
    if kind == "sigma_star":
        fn = lambda g: solve_sigma_star(g).value  # noqa: E731
    elif kind == "phi":
        fn = lambda g: phi_factor(g, spec)  # noqa: E731
    else:
        raise InvalidInputError(f"kind must be 'sigma_star' or 'phi', got {kind!r}")
    return [{"gamma": g, "value": _sig6(fn(g))} for g in range(gamma_min, gamma_max + 1)]
