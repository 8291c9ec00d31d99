import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from robust_t.errors import ImproperPosteriorError, InvalidInputError
from robust_t.model import (
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
from robust_t.special import student_logpdf

from conftest import random_dataset


def scipy_log_posterior(data, theta, g, nu_coef=None):
    beta, nu = theta[:-1], theta[-1]
    z = (data.response - data.design @ beta) / math.exp(nu)
    coef = data.n if nu_coef is None else nu_coef
    return float(np.sum(stats.t.logpdf(z, g))) - coef * nu


def central_diff(f, theta, h=1e-5):
    out = np.empty_like(theta)
    for j in range(theta.shape[0]):
        e = np.zeros_like(theta)
        e[j] = h
        out[j] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def assert_grad_close(g, fd):
    err = np.abs(g - fd)
    ok = err <= np.maximum(1e-5 * np.abs(fd), 1e-8)
    assert ok.all(), (g, fd, err)


def random_config(rng):
    n = int(rng.integers(5, 41))
    p = int(rng.integers(1, 5))
    data = random_dataset(rng, n, p, scale=float(rng.uniform(0.2, 3.0)))
    theta = np.append(rng.normal(0, 1.5, p), rng.uniform(-1.0, 1.0))
    g = int(rng.choice([1, 4, 10]))
    return data, theta, g


# ---------------------------------------------------------------------------
# data types


def test_dataset_validation():
    with pytest.raises(InvalidInputError):
        Dataset(np.array([[1.0, 2.0], [2.0, 3.0]]), np.array([0.0, 1.0]))  # no intercept
    with pytest.raises(InvalidInputError):
        Dataset(np.array([[1.0], [1.0]]), np.array([0.0, np.nan]))
    with pytest.raises(InvalidInputError):
        Dataset(np.ones((3, 1)), np.zeros(2))
    d = Dataset(np.ones((3, 1)), np.arange(3.0))
    assert (d.n, d.p) == (3, 1)
    with pytest.raises(ValueError):
        d.response[0] = 5.0


def test_dataset_drop_is_one_based():
    d = Dataset(np.ones((4, 1)), np.array([1.0, 2.0, 3.0, 4.0]))
    assert list(d.drop(1).response) == [2.0, 3.0, 4.0]
    assert list(d.drop(4).response) == [1.0, 2.0, 3.0]
    with pytest.raises(InvalidInputError):
        d.drop(0)


def test_params_roundtrip():
    p = Params(np.array([1.0, -2.0]), 0.3)
    q = Params.from_vector(p.to_vector())
    assert np.array_equal(q.beta, p.beta) and q.nu == p.nu
    assert p.sigma == pytest.approx(math.exp(0.3))
    with pytest.raises(InvalidInputError):
        Params(np.array([np.inf]), 0.0)


def test_outlier_spec_paths():
    a = np.array([0.0, 1.0, 2.0])
    b = np.array([0.0, 0.0, 3.0])
    spec = OutlierSpec(frozenset({3}), a, b, 10.0)
    assert np.array_equal(spec.response(), [0.0, 1.0, 32.0])
    assert list(spec.mask(3)) == [True, True, False]
    with pytest.raises(InvalidInputError):
        OutlierSpec(frozenset({2}), a, b, 10.0)  # b nonzero off O
    with pytest.raises(InvalidInputError):
        OutlierSpec(frozenset({3}), a, b, -1.0)
    with pytest.raises(InvalidInputError):
        OutlierSpec.from_indices([4]).mask(3)


# ---------------------------------------------------------------------------
# log posterior


def test_single_point_value():
    d = Dataset(np.ones((1, 1)), np.zeros(1))
    assert log_posterior(d, Params(np.zeros(1), 0.0), 1) == pytest.approx(-math.log(math.pi), abs=1e-14)


def test_rejects_wrong_dims_and_gamma():
    d = Dataset(np.ones((2, 1)), np.zeros(2))
    with pytest.raises(InvalidInputError):
        log_posterior(d, Params(np.zeros(2), 0.0), 1)
    for g in (0, 2.5, -1):
        with pytest.raises(InvalidInputError):
            log_posterior(d, Params(np.zeros(1), 0.0), g)


def test_shift_invariance():
    rng = np.random.default_rng(0)
    for _ in range(20):
        data, theta, g = random_config(rng)
        c = float(rng.normal(0, 10))
        shifted = data.with_response(data.response + c)
        th2 = theta.copy()
        th2[0] += c
        a = log_posterior(data, theta, g)
        b = log_posterior(shifted, th2, g)
        assert b == pytest.approx(a, rel=1e-12, abs=1e-10)


def test_matches_scipy_sum():
    rng = np.random.default_rng(1)
    for _ in range(100):
        data, theta, g = random_config(rng)
        assert log_posterior(data, theta, g) == pytest.approx(scipy_log_posterior(data, theta, g), rel=1e-11)


def test_flat_prior_adds_nu():
    rng = np.random.default_rng(2)
    for _ in range(20):
        data, theta, g = random_config(rng)
        diff = log_posterior(data, theta, g, FLAT) - log_posterior(data, theta, g, JEFFREYS)
        assert diff == pytest.approx(theta[-1], abs=1e-10)
        gd = grad_log_posterior(data, theta, g, FLAT) - grad_log_posterior(data, theta, g, JEFFREYS)
        assert np.allclose(gd, np.append(np.zeros(data.p), 1.0), atol=1e-10)


def test_params_and_vector_inputs_agree():
    rng = np.random.default_rng(3)
    data, theta, g = random_config(rng)
    assert log_posterior(data, Params.from_vector(theta), g) == log_posterior(data, theta, g)


# ---------------------------------------------------------------------------
# gradients


def test_gradient_at_interpolation():
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    beta = np.array([0.5, -2.0])
    d = Dataset(X, X @ beta)
    for g in (1, 4, 10):
        grad = grad_log_posterior(d, np.append(beta, 0.7), g)
        assert np.allclose(grad, [0.0, 0.0, -6.0], atol=1e-14)


def test_gradient_finite_differences_full():
    rng = np.random.default_rng(4)
    for _ in range(100):
        data, theta, g = random_config(rng)
        fd = central_diff(lambda t: log_posterior(data, t, g), theta)
        assert_grad_close(grad_log_posterior(data, theta, g), fd)


def test_gradient_finite_differences_limiting():
    rng = np.random.default_rng(5)
    for _ in range(100):
        data, theta, g = random_config(rng)
        k = int(rng.integers(0, max(1, data.n // 3)))
        out = OutlierSpec.from_indices(rng.choice(np.arange(1, data.n + 1), size=k, replace=False).tolist())
        fd = central_diff(lambda t: log_limiting_posterior(data, out, t, g), theta)
        assert_grad_close(grad_log_limiting_posterior(data, out, theta, g), fd)


def test_gradient_sign_symmetry():
    rng = np.random.default_rng(6)
    for _ in range(20):
        data, theta, g = random_config(rng)
        neg = data.with_response(-data.response)
        th2 = np.append(-theta[:-1], theta[-1])
        g1 = grad_log_posterior(data, theta, g)
        g2 = grad_log_posterior(neg, th2, g)
        assert np.allclose(g2[:-1], -g1[:-1], rtol=1e-12, atol=1e-12)
        assert g2[-1] == pytest.approx(g1[-1], rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# limiting posterior


def test_limiting_empty_outliers_is_full():
    rng = np.random.default_rng(7)
    empty = OutlierSpec.from_indices([])
    for _ in range(20):
        data, theta, g = random_config(rng)
        for prior in (JEFFREYS, FLAT):
            assert log_limiting_posterior(data, empty, theta, g, prior) == log_posterior(data, theta, g, prior)
            assert np.array_equal(grad_log_limiting_posterior(data, empty, theta, g, prior),
                                  grad_log_posterior(data, theta, g, prior))


def test_limiting_one_outlier_gamma2_offset():
    rng = np.random.default_rng(8)
    for _ in range(20):
        data, theta, _ = random_config(rng)
        idx = int(rng.integers(1, data.n + 1))
        out = OutlierSpec.from_indices([idx])
        reduced = data.drop(idx)
        lim = log_limiting_posterior(data, out, theta, 2)
        red = log_posterior(reduced, theta, 2)
        # nu coefficient -(|O^c| - 2) against -|O^c|
        assert lim - red == pytest.approx(2 * theta[-1], abs=1e-10)
        # independent recomputation
        ref = scipy_log_posterior(reduced, theta, 2, nu_coef=reduced.n - 2)
        assert lim == pytest.approx(ref, rel=1e-11)


def test_limiting_ignores_outlying_response():
    rng = np.random.default_rng(9)
    data, theta, g = random_config(rng)
    out = OutlierSpec.from_indices([1, data.n])
    y = np.array(data.response)
    y[0] += 1e6
    y[-1] -= 3e3
    moved = data.with_response(y)
    assert log_limiting_posterior(moved, out, theta, g) == log_limiting_posterior(data, out, theta, g)


def test_limiting_nu_gradient_at_zero_residuals():
    X = np.column_stack([np.ones(8), np.arange(8.0)])
    beta = np.array([1.0, 1.0])
    y = X @ beta
    y[7] = 1e4
    d = Dataset(X, y)
    out = OutlierSpec.from_indices([8])
    for g in (1, 3):
        grad = grad_log_limiting_posterior(d, out, np.append(beta, -0.2), g)
        assert grad[-1] == pytest.approx(-(7 - 1 * g), abs=1e-12)
        assert np.allclose(grad[:-1], 0.0, atol=1e-12)


def test_limiting_rejects_all_outliers():
    d = Dataset(np.ones((3, 1)), np.zeros(3))
    with pytest.raises(InvalidInputError):
        log_limiting_posterior(d, OutlierSpec.from_indices([1, 2, 3]), np.zeros(2), 1)


def test_full_posterior_approaches_limit_plus_constant():
    # as y_n grows, log pi(theta | y) - log f(y_n) - log pi_lim(theta) -> 0
    X = np.column_stack([np.ones(10), np.arange(1.0, 11.0)])
    rng = np.random.default_rng(10)
    y = X @ np.array([1.0, 1.0]) + rng.standard_normal(10)
    out = OutlierSpec.from_indices([10])
    theta = np.array([0.8, 1.1, 0.2])
    for g in (1, 4):
        gaps = []
        for big in (1e3, 1e5, 1e7):
            y2 = y.copy()
            y2[-1] = big
            d = Dataset(X, y2)
            gaps.append(abs(log_posterior(d, theta, g) - student_logpdf(big, g)
                            - log_limiting_posterior(d, out, theta, g)))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-5  # O(|x'beta| / y_n)


# ---------------------------------------------------------------------------
# custom prior


def test_custom_prior_matches_jeffreys():
    rng = np.random.default_rng(11)
    prior = PriorSpec("custom", lambda b, s: -math.log(s), lambda b, s: (np.zeros(b.shape[0]), -1.0 / s), 1.0)
    for _ in range(10):
        data, theta, g = random_config(rng)
        assert log_posterior(data, theta, g, prior) == pytest.approx(log_posterior(data, theta, g), rel=1e-12)
        assert np.allclose(grad_log_posterior(data, theta, g, prior), grad_log_posterior(data, theta, g),
                           rtol=1e-12, atol=1e-12)


def test_custom_prior_gradient_fd():
    rng = np.random.default_rng(12)
    prior = PriorSpec("custom", lambda b, s: -0.5 * float(b @ b) / 100.0 - math.log(s) - math.log1p(s),
                      lambda b, s: (-b / 100.0, -1.0 / s - 1.0 / (1.0 + s)), 1.0)
    for _ in range(20):
        data, theta, g = random_config(rng)
        fd = central_diff(lambda t: log_posterior(data, t, g, prior), theta)
        assert_grad_close(grad_log_posterior(data, theta, g, prior), fd)


def test_custom_prior_bound_violation():
    prior = PriorSpec("custom", lambda b, s: math.log(5.0), bound_constant=1.0)
    d = Dataset(np.ones((4, 1)), np.arange(4.0))
    with pytest.raises(ImproperPosteriorError):
        log_posterior(d, np.array([0.0, 0.0]), 1, prior)
    ok = PriorSpec("custom", lambda b, s: math.log(5.0), bound_constant=5.0)
    assert math.isfinite(log_posterior(d, np.array([0.0, 0.0]), 1, ok))


def test_builtin_priors_within_bound():
    from robust_t.model import log_prior

    for s in (1e-3, 0.5, 1.0, 2.0, 1e3):
        assert math.exp(log_prior(JEFFREYS, [0.0], s)) == pytest.approx(1.0 / s)
        assert log_prior(FLAT, [0.0], s) == 0.0
        for pr in (JEFFREYS, FLAT):
            assert math.exp(log_prior(pr, [0.0], s)) <= max(1.0, 1.0 / s) * (1 + 1e-12)


# ---------------------------------------------------------------------------
# pdf ratio


def test_pdf_ratio_identity_case():
    for y in (-1e6, -3.0, 0.0, 0.5, 42.0):
        for g in (1, 4, 10):
            assert pdf_ratio(y, 0.0, 1.0, g) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("g,target", [(1, 2.0), (4, 16.0)])
def test_pdf_ratio_large_y(g, target):
    assert pdf_ratio(1e6, 3.0, 2.0, g) == pytest.approx(target, rel=1e-4)


def test_pdf_ratio_matches_density_quotient():
    rng = np.random.default_rng(13)
    for _ in range(200):
        y, xtb = rng.normal(0, 20, 2)
        s = float(rng.uniform(0.1, 10))
        g = int(rng.integers(1, 11))
        ref = math.exp(stats.t.logpdf((y - xtb) / s, g) - math.log(s) - stats.t.logpdf(y, g))
        assert pdf_ratio(y, xtb, s, g) == pytest.approx(ref, rel=1e-11)


def _gaps(xtb, s, g, start, sign=1.0):
    ys = sign * start * np.logspace(0, 6, 60)
    return [abs(pdf_ratio(float(y), xtb, s, g) / s**g - 1.0) for y in ys]


def _monotone(gaps):
    # ignore differences at rounding level
    return all(b <= a + 1e-13 for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("g", [1, 4, 10])
@pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
def test_pdf_ratio_monotone_centered(g, s):
    start = 10 * s * math.sqrt(g)
    assert _monotone(_gaps(0.0, s, g, start))
    assert _monotone(_gaps(0.0, s, g, start, -1.0))


@pytest.mark.parametrize("g", [1, 4, 10])
@pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("xtb", [-2.5, 0.3, 7.0])
def test_pdf_ratio_monotone_shifted(g, s, xtb):
    # (g + y^2)/(g + (y - xtb)^2/s^2) - 1 changes sign near y = ((s^2 - 1) g + xtb^2) / (2 xtb),
    # so monotone decay starts beyond a multiple of that point
    cross = abs(((s * s - 1) * g + xtb * xtb) / (2 * xtb))
    start = 10 * max(abs(xtb), s * math.sqrt(g), cross)
    assert _monotone(_gaps(xtb, s, g, start))
    assert _monotone(_gaps(xtb, s, g, start, -1.0))
    for y in (1e6, -1e6):
        assert abs(pdf_ratio(y, xtb, s, g) / s**g - 1) < 1e-2


def test_pdf_ratio_not_monotone_from_short_threshold():
    # counterexample to monotone decay from |y| > 10 max(|xtb|, s sqrt(g)) alone
    s, g, xtb = 10.0, 10, 2.5
    start = 10 * max(abs(xtb), s * math.sqrt(g))
    assert not _monotone(_gaps(xtb, s, g, start))


def test_pdf_ratio_rejects_bad_sigma():
    with pytest.raises(InvalidInputError):
        pdf_ratio(1.0, 0.0, 0.0, 1)


# ---------------------------------------------------------------------------
# scaled density bound: f(z/v) <= v^(g+1) f(z) for v >= 1


def scaled_log_ratio(z, v, g):
    return student_logpdf(z / v, g) - (g + 1) * math.log(v) - student_logpdf(z, g)


@given(st.floats(-1e6, 1e6), st.floats(1.0, 1e4), st.integers(1, 10))
def test_scaled_density_bound(z, v, g):
    assert scaled_log_ratio(z, v, g) <= 1e-12


# ---------------------------------------------------------------------------
# condition checks


def test_check_examples():
    assert check_properness(10, 2) and check_properness(4, 2) and not check_properness(3, 2)
    assert check_limiting_properness(20, 2, 1, 1)
    assert not check_limiting_properness(20, 2, 1, 17)
    for g in (1, 5, 100):
        assert check_limiting_properness(20, 2, 0, g) == check_properness(20, 2)
        assert check_limiting_properness(3, 2, 0, g) == check_properness(3, 2)
    assert check_thm1_condition(20, 2, 1, 1).holds
    assert not check_thm1_condition(20, 2, 9, 1).holds
    assert abs(check_thm1_condition(1000, 2, 0, 1).breakdown_fraction - 0.498) < 1e-3


def test_check_rejects_bad_counts():
    with pytest.raises(InvalidInputError):
        check_properness(0, 1)
    with pytest.raises(InvalidInputError):
        check_limiting_properness(5, 1, 6, 1)


@given(st.integers(1, 300), st.integers(1, 12), st.integers(1, 40), st.data())
def test_thm1_against_brute_force(n, p, g, data):
    k = data.draw(st.integers(0, n))
    res = check_thm1_condition(n, p, k, g)
    holds = Fraction(n - k) >= max(Fraction(n, 2) + p - Fraction(1, 2), Fraction(k * g + p + 2))
    assert res.holds == holds
    ok = [m for m in range(-2 * (n + p + 2), n + 1)
          if Fraction(m) <= Fraction(n, 2) - p + Fraction(1, 2) and Fraction(m) <= Fraction(n - p - 2, g + 1)]
    assert res.max_outliers == max(ok)
    bd = min(Fraction(1, 2) - (p - Fraction(1, 2)) / n, Fraction(n - p - 2, n * (g + 1)))
    assert res.breakdown_fraction == float(bd)
    # the convergence condition at |O| = k is the same as k <= max_outliers
    assert res.holds == (k <= res.max_outliers)


@given(st.integers(1, 500), st.integers(1, 20), st.integers(0, 500), st.integers(1, 50))
def test_limiting_properness_exact(n, p, k, g):
    k = min(k, n)
    assert check_limiting_properness(n, p, k, g) == (n - k * (g + 1) > p + 1)
