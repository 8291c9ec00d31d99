"""Normal linear regression baseline: OLS and the improper-prior posterior of beta."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import InvalidInputError
from .model import Dataset

RANK_TOL = 1e-9


@dataclass(frozen=True)
class OlsFit:
    beta_hat: np.ndarray
    fitted: np.ndarray
    residual_sumsq: float
    xtx_inv: np.ndarray
    # None when n <= p + 2 (posterior covariance undefined)
    posterior_cov: Optional[np.ndarray]

    @property
    def has_cov(self) -> bool:
        return self.posterior_cov is not None


def ols_fit(dataset: Dataset) -> OlsFit:
    """Least squares through a column-pivoted QR factorization.

    The posterior covariance of beta under the normal model with prior
    1/sigma is ``RSS / (n - p - 2) * (X'X)^{-1}``, available when n > p + 2.
    """
    X, y = dataset.design, dataset.response
    n, p = X.shape
    if n < p:
        raise InvalidInputError(f"need at least p={p} rows, got {n}")
    Q, R, perm = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    bad = np.flatnonzero(diag <= RANK_TOL * diag[0])
    if diag[0] == 0.0 or bad.size:
        col = perm[bad[0]] + 1 if bad.size else 1
        raise InvalidInputError(f"design is rank deficient: column x{col} is linearly dependent on the others")
    z = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(p)
    beta[perm] = z
    fitted = X @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    # (X'X)^{-1} = P R^{-1} R^{-T} P'
    r_inv = scipy.linalg.solve_triangular(R, np.eye(p))
    inv_perm = r_inv @ r_inv.T
    xtx_inv = np.empty((p, p))
    xtx_inv[np.ix_(perm, perm)] = inv_perm
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)
    cov = rss / (n - p - 2) * xtx_inv if n > p + 2 else None
    return OlsFit(beta, fitted, rss, xtx_inv, cov)


def normal_posterior_beta2_summary(dataset: Dataset) -> dict:
    """Posterior mean and SD of the first slope under the normal model."""
    if dataset.p < 2:
        raise InvalidInputError("need p >= 2 for a slope coefficient")
    fit = ols_fit(dataset)
    if not fit.has_cov:
        raise InvalidInputError(f"need n > p + 2 for the posterior covariance, got n={dataset.n}")
    return {"mean": float(fit.beta_hat[1]), "sd": math.sqrt(max(fit.posterior_cov[1, 1], 0.0))}


def ols_response_slope(dataset: Dataset, index: int) -> np.ndarray:
    """d beta_hat / d y_index, i.e. (X'X)^{-1} x_index (index is 1-based)."""
    if not 1 <= index <= dataset.n:
        raise InvalidInputError(f"index {index} outside 1..{dataset.n}")
    return ols_fit(dataset).xtx_inv @ dataset.design[index - 1]


def residual_scale(fit: OlsFit, n: int, p: int) -> float:
    """sqrt(RSS / (n - p)), or sqrt(RSS / n) when n <= p."""
    dof = n - p if n > p else n
    return math.sqrt(fit.residual_sumsq / dof)
