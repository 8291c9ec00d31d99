"""Hamiltonian Monte Carlo over (beta, nu) and chain summaries.

Randomness comes from Philox4x64-10 (numpy's ``Philox``) keyed by
``(seed, stream)``: stream 0 drives the main chain, stream 1 the pilot run.
Per iteration the chain consumes one row of ``d`` standard normals
(momentum) and, after all rows are drawn, one uniform (acceptance), so a
run is a pure function of (seed, config, target).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize

from . import kernels
from .errors import InvalidInputError, NumericalError
from .model import (
    JEFFREYS,
    Dataset,
    OutlierSpec,
    Params,
    PriorSpec,
    _custom_terms,
    check_gamma,
    limiting_nu_coef,
    require_limiting_proper,
    require_proper,
    _nu_coef,
)
from .ols import ols_fit, residual_scale
from .special import student_log_const

DEFAULT_PROBS = (0.025, 0.5, 0.975)
_U64 = 2**64


@dataclass(frozen=True)
class HmcConfig:
    step_size: float = 0.05
    n_leapfrog: int = 20
    n_samples: int = 200_000
    n_burnin: Optional[int] = None  # None -> 10% of n_samples
    seed: int = 0
    mass_diagonal: Optional[Sequence[float]] = None
    init: Optional[Params] = None
    # fit_* only: locate the mode and run a pilot chain to set the mass
    tune: bool = True
    n_pilot: int = 4000

    def __post_init__(self):
        if not self.step_size > 0:
            raise InvalidInputError("step_size must be positive")
        if self.n_leapfrog < 1 or self.n_samples < 1:
            raise InvalidInputError("n_leapfrog and n_samples must be >= 1")
        if self.n_burnin is not None and self.n_burnin < 0:
            raise InvalidInputError("n_burnin must be >= 0")
        if not 0 <= int(self.seed) < _U64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")
        if self.mass_diagonal is not None:
            m = np.asarray(self.mass_diagonal, dtype=float)
            if m.ndim != 1 or not np.all(m > 0) or not np.all(np.isfinite(m)):
                raise InvalidInputError("mass_diagonal entries must be positive and finite")
            object.__setattr__(self, "mass_diagonal", tuple(m.tolist()))
        if self.n_pilot < 0:
            raise InvalidInputError("n_pilot must be >= 0")

    @property
    def burnin(self) -> int:
        return self.n_samples // 10 if self.n_burnin is None else self.n_burnin


@dataclass(frozen=True)
class Chain:
    draws: np.ndarray  # n_samples x d, (beta, nu) coordinates
    accept_rate: float
    seed: int


@dataclass(frozen=True)
class Target:
    logpdf: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Summary:
    mean: np.ndarray
    sd: np.ndarray
    quantiles: dict
    ess: np.ndarray
    mcse_mean: np.ndarray
    mcse_sd: np.ndarray
    names: tuple = ()
    accept_rate: Optional[float] = None
    chain: Optional[Chain] = field(default=None, repr=False, compare=False)

    def records(self) -> list:
        """One dict per parameter, for tabular output."""
        rows = []
        for j, name in enumerate(self.names or [f"theta{k + 1}" for k in range(len(self.mean))]):
            row = {"param": name, "mean": float(self.mean[j]), "sd": float(self.sd[j])}
            for prob, q in self.quantiles.items():
                row[f"q{prob:g}"] = float(q[j])
            row["ess"] = float(self.ess[j])
            row["mcse_mean"] = float(self.mcse_mean[j])
            row["mcse_sd"] = float(self.mcse_sd[j])
            rows.append(row)
        return rows


# ---------------------------------------------------------------------------
# randomness


def random_streams(seed: int, n_iter: int, d: int, stream: int = 0):
    """Standard-normal momenta (n_iter x d) and log-uniforms (n_iter)."""
    key = np.array([int(seed), int(stream)], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    xi = rng.standard_normal((n_iter, d))
    log_u = np.log(rng.random(n_iter))
    return xi, log_u


def _inv_mass(config: HmcConfig, d: int) -> np.ndarray:
    if config.mass_diagonal is None:
        return np.ones(d)
    m = np.asarray(config.mass_diagonal, dtype=float)
    if m.shape != (d,):
        raise InvalidInputError(f"mass_diagonal needs {d} entries, got {m.shape[0]}")
    return 1.0 / m


# ---------------------------------------------------------------------------
# sampling


def hmc_sample(target, config: HmcConfig, init=None, backend=None) -> Chain:
    """Metropolis-adjusted leapfrog HMC for an arbitrary differentiable target.

    ``target`` exposes ``logpdf(theta)`` and ``grad(theta)`` on flat
    parameter vectors. Proposals hitting non-finite values are rejected.
    When both callables are numba-compiled and the numba backend is active
    the whole chain runs compiled; otherwise the same loop runs in Python.
    """
    init = config.init if init is None else init
    if init is None:
        raise InvalidInputError("hmc_sample needs an initial point (config.init)")
    theta0 = init.to_vector() if isinstance(init, Params) else np.asarray(init, dtype=float)
    d = theta0.shape[0]
    lp0, g0 = float(target.logpdf(theta0)), np.asarray(target.grad(theta0), dtype=float)
    if not (math.isfinite(lp0) and g0.shape == (d,) and np.all(np.isfinite(g0))):
        raise NumericalError("log density or gradient is not finite at the initial point")
    inv_mass = _inv_mass(config, d)
    step, n_leap = float(config.step_size), int(config.n_leapfrog)
    compiled = ((backend or kernels.BACKEND) == "numba"
                and kernels.is_jitted(target.logpdf) and kernels.is_jitted(target.grad))
    if compiled:
        fn = _combined(target.logpdf, target.grad)

        def loop(xi, lu, th):
            return kernels.hmc_loop_nb(fn, (), th, step, n_leap, inv_mass, xi, lu)
    else:
        def fn(theta, out):
            try:
                out[:] = target.grad(theta)
                return float(target.logpdf(theta))
            except (ArithmeticError, ValueError):
                return math.nan

        def loop(xi, lu, th):
            return kernels.run_hmc_python(fn, (), th, step, n_leap, inv_mass, xi, lu)
    draws, rate = _run(loop, theta0, config, d, stream=0)
    return Chain(draws, rate, int(config.seed))


@lru_cache(maxsize=32)
def _combined(logpdf, grad):
    return kernels.combine_jitted(logpdf, grad)


def _run(loop, theta0, config, d, stream):
    burn = config.burnin
    n_iter = burn + config.n_samples
    xi, log_u = random_streams(config.seed, n_iter, d, stream)
    draws, n_acc = loop(xi, log_u, np.array(theta0, dtype=float))
    return draws[burn:], n_acc / n_iter


def _student_chain(X, y, gamma, nu_coef, prior: PriorSpec, config: HmcConfig, backend=None) -> Chain:
    d = X.shape[1] + 1
    logc = student_log_const(gamma)
    g = float(gamma)
    c = float(nu_coef)
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    step, n_leap = float(config.step_size), int(config.n_leapfrog)

    if prior.kind == "custom":
        if prior.custom_grad is None:
            raise InvalidInputError("custom prior needs custom_grad for sampling")

        def into(theta, out):
            val = kernels.logpost_grad_np(theta, out, X, y, g, c, logc)
            try:
                lp, gp = _custom_terms(prior, theta)
            except OverflowError:
                return math.nan
            out += gp
            return val + lp

        def loop(xi, lu, th, inv_mass):
            return kernels.run_hmc_python(into, (), th, step, n_leap, inv_mass, xi, lu)
    else:
        def into(theta, out):
            return kernels.logpost_grad_np(theta, out, X, y, g, c, logc)

        def loop(xi, lu, th, inv_mass):
            return kernels.hmc_student(X, y, g, c, logc, th, step, n_leap, inv_mass, xi, lu, backend)

    def logp_grad(theta):
        grad = np.empty(d)
        with np.errstate(all="ignore"):
            val = into(np.asarray(theta, dtype=float), grad)
        return val, grad

    theta0 = _initial_point(X, y, config)
    lp0, g0 = logp_grad(theta0)
    if not (math.isfinite(lp0) and np.all(np.isfinite(g0))):
        raise NumericalError("log density or gradient is not finite at the initial point")

    if config.mass_diagonal is not None or not config.tune:
        inv_mass = _inv_mass(config, d)
    else:
        theta0, inv_mass = _tune(logp_grad, loop, theta0, config, d)

    draws, rate = _run(lambda xi, lu, th: loop(xi, lu, th, inv_mass), theta0, config, d, stream=0)
    if not np.all(np.isfinite(draws)):
        raise NumericalError("chain produced non-finite draws")
    return Chain(draws, rate, int(config.seed))


def _initial_point(X, y, config: HmcConfig) -> np.ndarray:
    if config.init is not None:
        theta = config.init.to_vector()
        if theta.shape[0] != X.shape[1] + 1:
            raise InvalidInputError("init has the wrong number of coefficients")
        return theta
    return ols_start(Dataset(X, y))


def ols_start(dataset: Dataset) -> np.ndarray:
    """OLS coefficients and log residual scale."""
    fit = ols_fit(dataset)
    scale = residual_scale(fit, dataset.n, dataset.p)
    scale = max(scale, 1e-6 * (1.0 + float(np.max(np.abs(dataset.response)))))
    return np.append(fit.beta_hat, math.log(scale))


def _find_mode(logp_grad, theta0):
    def neg(theta):
        with np.errstate(all="ignore"):
            lp, g = logp_grad(theta)
        if not math.isfinite(lp):
            return 1e300, np.zeros_like(theta)
        return -lp, -g

    res = scipy.optimize.minimize(neg, theta0, jac=True, method="BFGS",
                                  options={"gtol": 1e-8, "maxiter": 2000})
    theta = res.x if np.all(np.isfinite(res.x)) and -res.fun >= logp_grad(theta0)[0] else theta0
    return np.asarray(theta, dtype=float)


def _laplace_inv_mass(logp_grad, theta, d):
    """Diagonal of the inverse negative Hessian (central differences of the gradient)."""
    H = np.empty((d, d))
    for j in range(d):
        h = 1e-5 * max(1.0, abs(theta[j]))
        e = np.zeros(d)
        e[j] = h
        H[:, j] = (logp_grad(theta + e)[1] - logp_grad(theta - e)[1]) / (2 * h)
    H = -0.5 * (H + H.T)
    try:
        cov = np.linalg.inv(H)
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None
    v = np.diag(cov)
    return v if np.all(np.isfinite(v)) and np.all(v > 0) else None


def _tune(logp_grad, loop, theta0, config: HmcConfig, d):
    """Mode search, Laplace mass, then a pilot chain to refine the mass.

    Returns a starting point and the inverse mass diagonal for the main run.
    """
    theta = _find_mode(logp_grad, theta0)
    inv_mass = _laplace_inv_mass(logp_grad, theta, d)
    if inv_mass is None:
        inv_mass = np.ones(d)
    if config.n_pilot < 20:
        return theta, inv_mass
    xi, log_u = random_streams(config.seed, config.n_pilot, d, stream=1)
    draws, n_acc = loop(xi, log_u, theta, inv_mass)
    tail = draws[config.n_pilot // 2:]
    v = tail.var(axis=0)
    if n_acc / config.n_pilot > 0.2 and np.all(v > 0) and np.all(np.isfinite(v)):
        inv_mass = v
    return draws[-1].copy(), inv_mass


# ---------------------------------------------------------------------------
# summaries


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation of a 1-D series via FFT."""
    n = x.shape[0]
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def ess_geyer(x: np.ndarray) -> float:
    """Effective sample size by Geyer's initial positive (and monotone) sequence."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4 or not np.ptp(x) > 0:
        return float(n)
    rho = autocorrelation(x)
    n_pairs = n // 2
    pairs = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    tau_sum = 0.0
    prev = math.inf
    for gk in pairs:
        if gk <= 0:
            break
        gk = min(gk, prev)
        tau_sum += gk
        prev = gk
    tau = -1.0 + 2.0 * tau_sum
    if not tau > 0:
        return float(n)
    return float(min(n / tau, n))


def type7_quantile(x, prob):
    """Column-wise quantile with linear interpolation between order statistics."""
    return np.quantile(x, prob, axis=0, method="linear")


def summarize(chain, probs: Sequence[float] = DEFAULT_PROBS, names=()) -> Summary:
    """Componentwise mean, SD, quantiles, ESS and Monte Carlo standard errors.

    ``chain`` is a :class:`Chain` or a draws matrix. MCSE of the SD uses the
    delta method on the ESS of squared deviations.
    """
    draws = chain.draws if isinstance(chain, Chain) else np.asarray(chain, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    n, d = draws.shape
    if n < 10:
        raise InvalidInputError("need at least 10 draws to summarize")
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0)
    ess = np.array([ess_geyer(draws[:, j]) for j in range(d)])
    mcse = np.where(sd > 0, sd / np.sqrt(ess), 0.0)
    mcse_sd = np.zeros(d)
    for j in range(d):
        if sd[j] > 0:
            sq = (draws[:, j] - mean[j]) ** 2
            mcse_var = sq.std() / math.sqrt(ess_geyer(sq))
            mcse_sd[j] = mcse_var / (2.0 * sd[j])
    quantiles = {float(pr): type7_quantile(draws, pr) for pr in probs}
    accept = chain.accept_rate if isinstance(chain, Chain) else None
    return Summary(mean, sd, quantiles, ess, mcse, mcse_sd, tuple(names), accept,
                   chain if isinstance(chain, Chain) else None)


def _beta_sigma_names(p):
    return tuple(f"beta{j + 1}" for j in range(p)) + ("sigma",)


def _summarize_beta_sigma(chain: Chain, p: int, probs) -> Summary:
    draws = chain.draws.copy()
    draws[:, -1] = np.exp(draws[:, -1])
    if not np.all(draws[:, -1] > 0):
        raise NumericalError("non-positive sigma draw")
    s = summarize(draws, probs, names=_beta_sigma_names(p))
    return replace(s, accept_rate=chain.accept_rate, chain=chain)


def fit_posterior(dataset: Dataset, gamma: int, prior: PriorSpec = JEFFREYS,
                  config: HmcConfig = HmcConfig(), probs=DEFAULT_PROBS, backend=None) -> Summary:
    """Sample the Student-t regression posterior and summarize (beta, sigma)."""
    gamma = check_gamma(gamma)
    require_proper(dataset.n, dataset.p)
    nu_coef = _nu_coef(dataset.n, prior)
    chain = _student_chain(dataset.design, dataset.response, gamma, nu_coef, prior, config, backend)
    return _summarize_beta_sigma(chain, dataset.p, probs)


def fit_limiting_posterior(dataset: Dataset, outliers: OutlierSpec, gamma: int,
                           prior: PriorSpec = JEFFREYS, config: HmcConfig = HmcConfig(),
                           probs=DEFAULT_PROBS, backend=None) -> Summary:
    """Sample the limiting posterior in which each outlier leaves sigma^gamma."""
    gamma = check_gamma(gamma)
    keep = outliers.mask(dataset.n)
    n_out = dataset.n - int(keep.sum())
    if n_out == dataset.n:
        raise InvalidInputError("every observation is flagged as an outlier")
    require_limiting_proper(dataset.n, dataset.p, n_out, gamma)
    X, y = dataset.design[keep], dataset.response[keep]
    nu_coef = limiting_nu_coef(X.shape[0], n_out, gamma, prior)
    chain = _student_chain(X, y, gamma, nu_coef, prior, config, backend)
    return _summarize_beta_sigma(chain, dataset.p, probs)
