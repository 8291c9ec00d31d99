"""Large-sample quantities of the Student-t model under normal errors.

* the pseudo-true scale ratio r = sigma*/sigma0, root of
  ``(g + 1) E[U^2 / (e^{2 eta} g + U^2)] - 1 = 0`` with U ~ N(0, 1);
* the efficiency factor phi(g) multiplying the OLS asymptotic covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_hermitenorm

from .errors import InvalidInputError, NumericalError
from .model import check_gamma
from .special import mills_complement

ETA_BRACKET = (-20.0, 20.0)
ROOT_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class QuadratureSpec:
    """How to compute E[h(Z)], Z ~ N(0, 1).

    ``gauss_hermite`` uses ``order`` nodes of the probabilists' Hermite rule;
    ``adaptive_simpson`` integrates h * density over [-truncation, truncation]
    to absolute tolerance ``tol``.
    """

    method: str = "gauss_hermite"
    order: int = 500
    tol: float = 1e-12
    truncation: float = 12.0

    def __post_init__(self):
        if self.method not in ("gauss_hermite", "adaptive_simpson"):
            raise InvalidInputError(f"unknown quadrature method {self.method!r}")
        if self.method == "gauss_hermite" and self.order < 20:
            raise InvalidInputError("Gauss-Hermite order must be >= 20")
        if self.method == "adaptive_simpson":
            if not 0 < self.tol <= 1e-10:
                raise InvalidInputError("adaptive tolerance must be in (0, 1e-10]")
            if self.truncation < 10:
                raise InvalidInputError("truncation must be >= 10")


GAUSS_HERMITE = QuadratureSpec("gauss_hermite", order=500)
ADAPTIVE = QuadratureSpec("adaptive_simpson", tol=1e-12, truncation=12.0)


@lru_cache(maxsize=16)
def _hermite_rule(order: int):
    x, w = roots_hermitenorm(order)
    w = w / math.sqrt(2.0 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float,
                     max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with Richardson correction (explicit stack)."""
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((m, b, fm, frm, fb, right, 0.5 * eps, depth + 1))
            stack.append((a, m, fa, flm, fm, left, 0.5 * eps, depth + 1))
    return total


def normal_expectation(integrand: Callable, spec: QuadratureSpec = GAUSS_HERMITE) -> float:
    """E[integrand(Z)] for Z standard normal.

    The Gauss-Hermite route calls ``integrand`` once on the node array; the
    adaptive route calls it on scalars. Gauss-Hermite loses accuracy when
    the integrand has poles close to the real axis (e.g. u^2/(c + u^2) for
    small c); prefer the adaptive method there.
    """
    if spec.method == "gauss_hermite":
        x, w = _hermite_rule(spec.order)
        return float(np.dot(w, np.asarray(integrand(x), dtype=float)))
    t = spec.truncation
    # Integrate each half separately so that u = 0 is always a node.
    half = 0.5 * spec.tol

    def h(u):
        return float(integrand(u)) * math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)

    return adaptive_simpson(h, -t, 0.0, half) + adaptive_simpson(h, 0.0, t, half)


# ---------------------------------------------------------------------------
# pseudo-true scale


@dataclass(frozen=True)
class ScaleRatio:
    value: float  # sigma* / sigma0
    eta: float
    gamma: int
    residual: float


def _check_eta(eta):
    if not ETA_BRACKET[0] <= eta <= ETA_BRACKET[1]:
        raise InvalidInputError(f"eta must lie in {list(ETA_BRACKET)}, got {eta}")


def scale_equation_closed(eta: float, gamma: int) -> float:
    """(g+1) [1 - sqrt(2 pi c) exp(c/2) Phi(-sqrt c)] - 1 with c = e^{2 eta} g."""
    gamma = check_gamma(gamma)
    _check_eta(eta)
    c = math.exp(2.0 * eta) * gamma
    return (gamma + 1) * mills_complement(c) - 1.0


def scale_equation_integral(eta: float, gamma: int, spec: QuadratureSpec = ADAPTIVE) -> float:
    """(g+1) E[U^2 / (e^{2 eta} g + U^2)] - 1 by quadrature."""
    gamma = check_gamma(gamma)
    _check_eta(eta)
    c = math.exp(2.0 * eta) * gamma
    return (gamma + 1) * normal_expectation(lambda u: u * u / (c + u * u), spec) - 1.0


def scale_equation_lhs(eta: float, gamma: int, spec: Optional[QuadratureSpec] = None) -> float:
    """Left side of the pseudo-true scale equation at eta = log(sigma/sigma0).

    Strictly decreasing in eta, from gamma (eta -> -inf) to -1 (eta -> inf).
    With ``spec=None`` the normal-CDF closed form is used, otherwise the
    integral form under ``spec``.
    """
    if spec is None:
        return scale_equation_closed(eta, gamma)
    return scale_equation_integral(eta, gamma, spec)


def solve_sigma_star(gamma: int, spec: Optional[QuadratureSpec] = None,
                     bracket=ETA_BRACKET) -> ScaleRatio:
    """Solve for eta* = log(sigma*/sigma0) by bracketed root finding."""
    gamma = check_gamma(gamma)
    lo, hi = bracket

    def fn(eta):
        return scale_equation_lhs(eta, gamma, spec)

    f_lo, f_hi = fn(lo), fn(hi)
    if not (f_lo > 0 > f_hi):
        raise NumericalError(f"root not bracketed on [{lo}, {hi}]: f = ({f_lo:g}, {f_hi:g})")
    eta = brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    res = fn(eta)
    if not abs(res) < ROOT_RESIDUAL_TOL:
        raise NumericalError(f"root residual {res:g} exceeds {ROOT_RESIDUAL_TOL:g}")
    return ScaleRatio(math.exp(eta), eta, gamma, res)


# ---------------------------------------------------------------------------
# efficiency


def phi_from_ratio(ratio: float, gamma, spec: QuadratureSpec = GAUSS_HERMITE) -> float:
    """phi for a given sigma*/sigma0; ``gamma = inf`` gives the normal-model limit."""
    if math.isinf(gamma):
        num = normal_expectation(lambda z: z * z, spec)
        den = normal_expectation(lambda z: np.ones_like(z) if isinstance(z, np.ndarray) else 1.0, spec)
        return num / den**2
    s = ratio * ratio * gamma

    def score_sq(z):
        return z * z / (1.0 + z * z / s) ** 2

    def score_slope(z):
        return (1.0 - z * z / s) / (1.0 + z * z / s) ** 2

    num = normal_expectation(score_sq, spec)
    den = normal_expectation(score_slope, spec)
    return num / den**2


def phi_factor(gamma: int, spec: QuadratureSpec = GAUSS_HERMITE) -> float:
    """Asymptotic variance inflation of the Student coefficient estimator over OLS."""
    gamma = check_gamma(gamma)
    return phi_from_ratio(solve_sigma_star(gamma).value, gamma, spec)


def ols_asymptotic_variance_factor() -> float:
    """The OLS benchmark factor against which phi is read."""
    return 1.0
