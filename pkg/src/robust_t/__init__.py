"""Bayesian Student-t linear regression: posteriors, outlier limits, asymptotics."""

__version__ = "0.1.0"

from ._accel import BACKEND
from .errors import ImproperPosteriorError, InvalidInputError, NumericalError, RobustTError
from .model import (
    FLAT,
    JEFFREYS,
    Dataset,
    OutlierSpec,
    Params,
    PriorSpec,
    check_limiting_properness,
    check_properness,
    check_thm1_condition,
    grad_log_limiting_posterior,
    grad_log_posterior,
    log_limiting_posterior,
    log_posterior,
    pdf_ratio,
)
from .special import normal_cdf, student_logpdf
