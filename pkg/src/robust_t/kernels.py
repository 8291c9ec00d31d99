"""Hot kernels: Student-t regression log-density/gradient and the HMC loop.

Every regression target handled here has the form

    log pi(beta, nu) = n_obs * logc - nu_coef * nu
                       - (g + 1)/2 * sum_i log1p((r_i / e^nu)^2 / g)

over the rows passed in, where ``logc`` is the Student log normalizing
constant. Full and limiting posteriors under the built-in priors differ only
in the rows passed and in ``nu_coef``.

The log-density exists twice, a loop version for numba and a vectorized
numpy version. The HMC loop is written once and either compiled or run as
plain Python. ``robust_t._accel.BACKEND`` picks the default; both paths are
importable for cross-checks and benchmarks.
"""

import math

import numpy as np

from ._accel import BACKEND, HAVE_NUMBA, njit

# ---------------------------------------------------------------------------
# log-density and gradient; signature (theta, grad_out, X, y, gamma, nu_coef, logc)


@njit(cache=True, nogil=True)
def logpost_grad_nb(theta, grad, X, y, gamma, nu_coef, logc):
    n, p = X.shape
    nu = theta[p]
    inv_s = math.exp(-nu)
    c = (gamma + 1.0) / gamma
    total = 0.0
    gnu = 0.0
    for j in range(p):
        grad[j] = 0.0
    for i in range(n):
        xb = 0.0
        for j in range(p):
            xb += X[i, j] * theta[j]
        z = (y[i] - xb) * inv_s
        q = z * z / gamma
        total += math.log1p(q)
        wz = c * z / (1.0 + q)
        for j in range(p):
            grad[j] += wz * X[i, j]
        gnu += wz * z
    for j in range(p):
        grad[j] *= inv_s
    grad[p] = gnu - nu_coef
    return n * logc - 0.5 * (gamma + 1.0) * total - nu_coef * nu


def logpost_grad_np(theta, grad, X, y, gamma, nu_coef, logc):
    p = X.shape[1]
    nu = theta[p]
    inv_s = np.exp(-nu)
    z = (y - X @ theta[:p]) * inv_s
    q = z * z / gamma
    wz = ((gamma + 1.0) / gamma) * z / (1.0 + q)
    grad[:p] = (wz @ X) * inv_s
    grad[p] = wz @ z - nu_coef
    return X.shape[0] * logc - 0.5 * (gamma + 1.0) * np.log1p(q).sum() - nu_coef * nu


# ---------------------------------------------------------------------------
# HMC


def hmc_loop(logp_grad, args, theta0, step, n_leap, inv_mass, xi, log_u):
    """Metropolis-adjusted leapfrog HMC driven by pre-drawn randomness.

    ``logp_grad(theta, grad_out, *args)`` returns the log density and writes
    the gradient. Row t of ``xi`` holds standard normals turned into the
    momentum of iteration t; ``log_u[t]`` is its log-uniform for acceptance.
    Trajectories reaching non-finite values are rejected.
    Returns (draws, number of accepted proposals).
    """
    n_iter, d = xi.shape
    draws = np.empty((n_iter, d))
    theta = theta0.copy()
    grad = np.empty(d)
    lp = logp_grad(theta, grad, *args)
    prop = np.empty(d)
    gprop = np.empty(d)
    mom = np.empty(d)
    sqrt_m = np.sqrt(1.0 / inv_mass)
    n_acc = 0
    for t in range(n_iter):
        kin0 = 0.0
        for j in range(d):
            mom[j] = sqrt_m[j] * xi[t, j]
            kin0 += mom[j] * mom[j] * inv_mass[j]
            prop[j] = theta[j]
            gprop[j] = grad[j]
        h0 = lp - 0.5 * kin0
        ok = True
        lp_prop = lp
        for j in range(d):
            mom[j] += 0.5 * step * gprop[j]
        for leap in range(n_leap):
            for j in range(d):
                prop[j] += step * inv_mass[j] * mom[j]
            lp_prop = logp_grad(prop, gprop, *args)
            ok = math.isfinite(lp_prop)
            for j in range(d):
                ok = ok and math.isfinite(gprop[j])
            if not ok:
                break
            half = 0.5 if leap == n_leap - 1 else 1.0
            for j in range(d):
                mom[j] += half * step * gprop[j]
        if ok:
            kin = 0.0
            for j in range(d):
                kin += mom[j] * mom[j] * inv_mass[j]
            log_ratio = lp_prop - 0.5 * kin - h0
            if math.isfinite(log_ratio) and log_u[t] < log_ratio:
                for j in range(d):
                    theta[j] = prop[j]
                    grad[j] = gprop[j]
                lp = lp_prop
                n_acc += 1
        for j in range(d):
            draws[t, j] = theta[j]
    return draws, n_acc


# Same source, compiled. Compiled once per distinct logp_grad function.
hmc_loop_nb = njit(nogil=True)(hmc_loop)


def run_hmc_python(logp_grad, args, theta0, step, n_leap, inv_mass, xi, log_u):
    with np.errstate(all="ignore"):
        return hmc_loop(logp_grad, args, np.asarray(theta0, dtype=float), float(step), int(n_leap),
                        np.asarray(inv_mass, dtype=float), xi, log_u)


def hmc_student(X, y, gamma, nu_coef, logc, theta0, step, n_leap, inv_mass, xi, log_u, backend=None):
    """HMC on a Student-t regression target with the chosen backend."""
    args = (X, y, float(gamma), float(nu_coef), float(logc))
    if (backend or BACKEND) == "numba":
        return hmc_loop_nb(logpost_grad_nb, args, np.asarray(theta0, dtype=float), float(step),
                           int(n_leap), np.asarray(inv_mass, dtype=float), xi, log_u)
    return run_hmc_python(logpost_grad_np, args, theta0, step, n_leap, inv_mass, xi, log_u)


def is_jitted(fn) -> bool:
    """True for numba-compiled callables."""
    if not HAVE_NUMBA:
        return False
    from numba.core.registry import CPUDispatcher

    return isinstance(fn, CPUDispatcher)


def combine_jitted(logpdf, grad):
    """Compiled ``logp_grad(theta, out)`` from separately compiled logpdf and grad."""

    @njit(nogil=True)
    def logp_grad(theta, out):
        g = grad(theta)
        for j in range(out.shape[0]):
            out[j] = g[j]
        return logpdf(theta)

    return logp_grad


LOGPOST_GRAD = {"numba": logpost_grad_nb, "numpy": logpost_grad_np}
