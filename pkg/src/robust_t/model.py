"""Student-t linear regression: data types, log-posteriors and condition checks.

Sampling coordinates are ``theta = (beta_1, ..., beta_p, nu)`` with
``sigma = exp(nu)``. Outlier indices are 1-based at the API boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import ImproperPosteriorError, InvalidInputError
from .kernels import logpost_grad_np
from .special import student_log_const

PRIOR_KINDS = ("jeffreys", "flat", "custom")
PRIOR_BOUND_SLACK = 1e-12


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_gamma(gamma) -> int:
    """Validate degrees of freedom: a positive integer."""
    if isinstance(gamma, bool):
        raise InvalidInputError("gamma must be a positive integer")
    if isinstance(gamma, float):
        if not gamma.is_integer():
            raise InvalidInputError(f"gamma must be a positive integer, got {gamma}")
        gamma = int(gamma)
    if not isinstance(gamma, (int, np.integer)) or gamma < 1:
        raise InvalidInputError(f"gamma must be a positive integer, got {gamma!r}")
    return int(gamma)


@dataclass(frozen=True)
class Dataset:
    design: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim != 2 or y.ndim != 1:
            raise InvalidInputError("design must be 2-D and response 1-D")
        n, p = X.shape
        if n < 1 or p < 1:
            raise InvalidInputError("need n >= 1 and p >= 1")
        if y.shape[0] != n:
            raise InvalidInputError(f"design has {n} rows but response has {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInputError("design and response must be finite")
        if not np.all(X[:, 0] == 1.0):
            raise InvalidInputError("first design column must be identically 1 (intercept)")
        object.__setattr__(self, "design", _readonly(X))
        object.__setattr__(self, "response", _readonly(y))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def with_response(self, y) -> "Dataset":
        return Dataset(self.design, y)

    def drop(self, index: int) -> "Dataset":
        """Copy without the (1-based) row ``index``."""
        i = _to_zero_based(index, self.n)
        keep = np.arange(self.n) != i
        return Dataset(self.design[keep], self.response[keep])

    def subset(self, mask) -> "Dataset":
        return Dataset(self.design[mask], self.response[mask])


@dataclass(frozen=True)
class Params:
    beta: np.ndarray
    nu: float

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if beta.ndim != 1 or not np.all(np.isfinite(beta)) or not math.isfinite(self.nu):
            raise InvalidInputError("params must be finite, beta 1-D")
        object.__setattr__(self, "beta", _readonly(beta))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def sigma(self) -> float:
        return math.exp(self.nu)

    def to_vector(self) -> np.ndarray:
        return np.append(self.beta, self.nu)

    @classmethod
    def from_vector(cls, theta) -> "Params":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1], float(theta[-1]))


@dataclass(frozen=True)
class PriorSpec:
    """Prior on (beta, sigma).

    ``custom_log_prior(beta, sigma)`` is the log prior density in the
    original (beta, sigma) coordinates; ``custom_grad(beta, sigma)`` returns
    its partial derivatives ``(d/dbeta, d/dsigma)`` and is only needed for
    gradients and sampling. A custom prior must satisfy
    ``prior <= max(C, C/sigma)``; this is asserted at every evaluation.
    """

    kind: str = "jeffreys"
    custom_log_prior: Optional[Callable] = None
    custom_grad: Optional[Callable] = None
    bound_constant: float = 1.0

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise InvalidInputError(f"prior kind must be one of {PRIOR_KINDS}, got {self.kind!r}")
        if self.kind == "custom" and self.custom_log_prior is None:
            raise InvalidInputError("custom prior needs custom_log_prior")
        if not self.bound_constant > 0:
            raise InvalidInputError("bound_constant must be positive")


JEFFREYS = PriorSpec("jeffreys")
FLAT = PriorSpec("flat")


def log_prior(prior: PriorSpec, beta, sigma: float) -> float:
    """Log prior density at (beta, sigma), bound-checked for custom priors."""
    if prior.kind == "jeffreys":
        return -math.log(sigma)
    if prior.kind == "flat":
        return 0.0
    lp = float(prior.custom_log_prior(np.asarray(beta), sigma))
    bound = math.log(prior.bound_constant) + max(0.0, -math.log(sigma))
    if lp > bound + PRIOR_BOUND_SLACK:
        raise ImproperPosteriorError(
            f"custom prior violates pi(beta, sigma) <= max(C, C/sigma) at sigma={sigma:g}: "
            f"log prior {lp:.6g} > log bound {bound:.6g}"
        )
    return lp


@dataclass(frozen=True)
class OutlierSpec:
    """Outlier index set O (1-based) with optional paths y_i = a_i + b_i * omega."""

    outlier_indices: frozenset
    a: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    omega: Optional[float] = None

    def __post_init__(self):
        idx = frozenset(int(i) for i in self.outlier_indices)
        object.__setattr__(self, "outlier_indices", idx)
        if (self.a is None) != (self.b is None):
            raise InvalidInputError("a and b must be given together")
        if self.b is not None:
            a = _readonly(self.a)
            b = _readonly(self.b)
            if a.shape != b.shape or a.ndim != 1:
                raise InvalidInputError("a and b must be vectors of equal length")
            nonzero = frozenset(int(i) + 1 for i in np.flatnonzero(b != 0.0))
            if nonzero != idx:
                raise InvalidInputError("b_i must be nonzero exactly on the outlier indices")
            if self.omega is None or not self.omega > 0:
                raise InvalidInputError("omega must be a positive real")
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> "OutlierSpec":
        return cls(frozenset(indices))

    def response(self) -> np.ndarray:
        """The materialized response a + b * omega."""
        if self.b is None:
            raise InvalidInputError("no outlier paths configured")
        return self.a + self.b * self.omega

    def mask(self, n: int) -> np.ndarray:
        """Boolean mask of the non-outlying rows."""
        keep = np.ones(n, dtype=bool)
        for i in self.outlier_indices:
            keep[_to_zero_based(i, n)] = False
        return keep


def _to_zero_based(index: int, n: int) -> int:
    if not 1 <= index <= n:
        raise InvalidInputError(f"index {index} outside 1..{n}")
    return int(index) - 1


# ---------------------------------------------------------------------------
# densities


def _theta(params) -> np.ndarray:
    if isinstance(params, Params):
        return params.to_vector()
    return np.asarray(params, dtype=float)


def _check_dims(dataset: Dataset, theta: np.ndarray):
    if dataset.n == 0:
        raise InvalidInputError("dataset is empty")
    if theta.shape != (dataset.p + 1,):
        raise InvalidInputError(f"expected {dataset.p + 1} parameters, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("params must be finite")


def _nu_coef(n_rows: int, prior: PriorSpec) -> float:
    # Jacobian of sigma = e^nu contributes +nu; Jeffreys 1/sigma contributes -nu.
    return n_rows - 1 + (1 if prior.kind == "jeffreys" else 0)


def _custom_terms(prior, theta):
    """(log prior, gradient in theta coordinates) of a custom prior."""
    beta, nu = theta[:-1], theta[-1]
    sigma = math.exp(nu)
    lp = log_prior(prior, beta, sigma)
    if prior.custom_grad is None:
        return lp, None
    db, ds = prior.custom_grad(beta, sigma)
    return lp, np.append(np.asarray(db, dtype=float), float(ds) * sigma)


def _evaluate(X, y, theta, gamma, nu_coef, prior, want_grad):
    grad = np.empty(theta.shape[0])
    logc = student_log_const(gamma)
    val = logpost_grad_np(theta, grad, X, y, float(gamma), float(nu_coef), logc)
    if prior.kind == "custom":
        lp, g = _custom_terms(prior, theta)
        val += lp
        if want_grad:
            if g is None:
                raise InvalidInputError("custom prior needs custom_grad for gradients")
            grad += g
    return val, grad


def log_posterior(dataset: Dataset, params, gamma: int, prior: PriorSpec = JEFFREYS) -> float:
    """Unnormalized log posterior of (beta, nu = log sigma).

    Includes the Student normalizing constant of each residual term, so for
    the Jeffreys prior this is ``-n nu + sum_i log f((y_i - x_i'beta) / e^nu)``.
    """
    gamma = check_gamma(gamma)
    theta = _theta(params)
    _check_dims(dataset, theta)
    nu_coef = _nu_coef(dataset.n, prior)
    return _evaluate(dataset.design, dataset.response, theta, gamma, nu_coef, prior, False)[0]


def grad_log_posterior(dataset: Dataset, params, gamma: int, prior: PriorSpec = JEFFREYS) -> np.ndarray:
    """Gradient of :func:`log_posterior` with respect to (beta, nu)."""
    gamma = check_gamma(gamma)
    theta = _theta(params)
    _check_dims(dataset, theta)
    nu_coef = _nu_coef(dataset.n, prior)
    return _evaluate(dataset.design, dataset.response, theta, gamma, nu_coef, prior, True)[1]


def limiting_nu_coef(n_inliers: int, n_outliers: int, gamma: int, prior: PriorSpec) -> float:
    """Coefficient of -nu in the limiting log target.

    Each outlier's likelihood factor is replaced by sigma^gamma.
    """
    return _nu_coef(n_inliers, prior) - n_outliers * gamma


def _limiting_parts(dataset: Dataset, outliers: OutlierSpec):
    keep = outliers.mask(dataset.n)
    n_out = dataset.n - int(keep.sum())
    if n_out == dataset.n:
        raise InvalidInputError("every observation is flagged as an outlier")
    return dataset.design[keep], dataset.response[keep], n_out


def log_limiting_posterior(dataset: Dataset, outliers: OutlierSpec, params, gamma: int,
                           prior: PriorSpec = JEFFREYS) -> float:
    """Unnormalized log density of the outlier-limiting posterior.

    Outlying rows are dropped and each contributes sigma^gamma instead; the
    value does not depend on the outlying responses.
    """
    gamma = check_gamma(gamma)
    theta = _theta(params)
    _check_dims(dataset, theta)
    X, y, n_out = _limiting_parts(dataset, outliers)
    nu_coef = limiting_nu_coef(X.shape[0], n_out, gamma, prior)
    return _evaluate(X, y, theta, gamma, nu_coef, prior, False)[0]


def grad_log_limiting_posterior(dataset: Dataset, outliers: OutlierSpec, params, gamma: int,
                                prior: PriorSpec = JEFFREYS) -> np.ndarray:
    gamma = check_gamma(gamma)
    theta = _theta(params)
    _check_dims(dataset, theta)
    X, y, n_out = _limiting_parts(dataset, outliers)
    nu_coef = limiting_nu_coef(X.shape[0], n_out, gamma, prior)
    return _evaluate(X, y, theta, gamma, nu_coef, prior, True)[1]


def pdf_ratio(y: float, xtb: float, sigma: float, gamma: int) -> float:
    """(1/sigma) f((y - xtb)/sigma) / f(y), from the closed-form power expression.

    Tends to sigma**gamma as |y| grows.
    """
    if not sigma > 0:
        raise InvalidInputError("sigma must be positive")
    gamma = check_gamma(gamma)
    r = (y - xtb) / sigma
    # log(g + y^2) - log(g + r^2), written to stay accurate for |y| ~ 1e6 and beyond
    ay, ar = abs(y), abs(r)
    if ay > 1.0 and ar > 1.0:
        log_num_den = 2.0 * (math.log(ay) - math.log(ar)) + math.log1p(gamma / (ay * ay)) - math.log1p(gamma / (ar * ar))
    else:
        log_num_den = math.log(gamma + y * y) - math.log(gamma + r * r)
    return math.exp(-math.log(sigma) + 0.5 * (gamma + 1) * log_num_den)


# ---------------------------------------------------------------------------
# condition checks (exact arithmetic)


def check_properness(n: int, p: int) -> bool:
    """Posterior is proper under a prior bounded by max(C, C/sigma) when n > p + 1."""
    _check_counts(n, p, 0)
    return n > p + 1


def check_limiting_properness(n: int, p: int, n_outliers: int, gamma: int) -> bool:
    """Limiting posterior is proper when n - |O| (gamma + 1) > p + 1."""
    gamma = check_gamma(gamma)
    _check_counts(n, p, n_outliers)
    return n - n_outliers * (gamma + 1) > p + 1


@dataclass(frozen=True)
class Thm1Check:
    holds: bool
    max_outliers: int
    breakdown_fraction: float


def check_thm1_condition(n: int, p: int, n_outliers: int, gamma: int) -> Thm1Check:
    """Sufficient condition for convergence to the limiting posterior.

    ``holds`` is |O^c| >= max(n/2 + p - 1/2, |O| gamma + p + 2).
    ``max_outliers`` is the largest |O| meeting both |O| <= n/2 - p + 1/2 and
    |O| <= (n - p - 2)/(gamma + 1); it is negative when no count does.
    """
    gamma = check_gamma(gamma)
    _check_counts(n, p, n_outliers)
    n_in = n - n_outliers
    bound = max(Fraction(n + 2 * p - 1, 2), Fraction(n_outliers * gamma + p + 2))
    holds = n_in >= bound
    max_out = min((n - 2 * p + 1) // 2, (n - p - 2) // (gamma + 1))
    bd = min(Fraction(1, 2) - Fraction(2 * p - 1, 2 * n), Fraction(n - p - 2, n * (gamma + 1)))
    return Thm1Check(bool(holds), int(max_out), float(bd))


def _check_counts(n, p, n_outliers):
    if n < 1 or p < 1:
        raise InvalidInputError("need n >= 1 and p >= 1")
    if not 0 <= n_outliers <= n:
        raise InvalidInputError("need 0 <= n_outliers <= n")


def require_proper(n: int, p: int):
    if not check_properness(n, p):
        raise ImproperPosteriorError(f"posterior may be improper: need n > p + 1, got n={n}, p={p}")


def require_limiting_proper(n: int, p: int, n_outliers: int, gamma: int):
    if not check_limiting_properness(n, p, n_outliers, gamma):
        raise ImproperPosteriorError(
            "limiting posterior may be improper: need n - |O|(gamma+1) > p + 1, got "
            f"{n} - {n_outliers}*({gamma}+1) = {n - n_outliers * (gamma + 1)} <= {p + 1}"
        )
