"""Scalar special functions: Student-t log density and normal tail helpers."""

import math

import numpy as np
from scipy.special import erfcx

_SQRT2 = math.sqrt(2.0)
_LOG_PI = math.log(math.pi)

# Above this value of c the product sqrt(2 pi c) exp(c/2) Phi(-sqrt(c)) is
# formed from the scaled complementary error function.
MILLS_SWITCH = 50.0


def student_log_const(gamma: float) -> float:
    """log Gamma((g+1)/2) - log Gamma(g/2) - log(g pi)/2."""
    return (
        math.lgamma(0.5 * (gamma + 1.0))
        - math.lgamma(0.5 * gamma)
        - 0.5 * (math.log(gamma) + _LOG_PI)
    )


def student_logpdf(z, gamma):
    """Log density of the standardized Student-t with ``gamma`` degrees of freedom.

    Accepts scalars or arrays; returns the same shape.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    z = np.asarray(z, dtype=float)
    out = student_log_const(gamma) - 0.5 * (gamma + 1.0) * np.log1p(z * z / gamma)
    return float(out) if out.ndim == 0 else out


def normal_cdf(x: float) -> float:
    """Standard normal CDF through erfc, accurate in both tails."""
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def mills_product(c: float) -> float:
    """sqrt(2 pi c) * exp(c/2) * Phi(-sqrt(c)) for c >= 0.

    Equal to sqrt(c) times the Mills ratio of the normal at sqrt(c); tends
    to 1 as c grows. For large c the huge exponential and tiny tail are
    never formed separately.
    """
    if c < 0:
        raise ValueError(f"c must be non-negative, got {c}")
    if c <= MILLS_SWITCH:
        return math.sqrt(2.0 * math.pi * c) * math.exp(0.5 * c) * normal_cdf(-math.sqrt(c))
    # Phi(-x) = erfcx(x/sqrt2) exp(-x^2/2) / 2
    return math.sqrt(0.5 * math.pi * c) * float(erfcx(math.sqrt(0.5 * c)))


def mills_complement(c: float) -> float:
    """1 - mills_product(c) = E[U^2 / (c + U^2)] for U ~ N(0, 1), c >= 0.

    For large c the difference is about 1/c and subtracting from 1 would
    cancel, so it comes from the continued fraction of the Mills ratio:
    R(x) = 1/(x + t) with t = 1/(x + 2/(x + 3/(x + ...))), so 1 - x R(x) = t/(x + t).
    """
    if c <= MILLS_SWITCH:
        return 1.0 - mills_product(c)
    x = math.sqrt(c)
    t = 0.0
    for k in range(200, 1, -1):
        t = k / (x + t)
    t = 1.0 / (x + t)
    return t / (x + t)
