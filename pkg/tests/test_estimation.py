import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.stats import binom

from inardisp.errors import DegenerateSeriesError, EstimationError
from inardisp.estimation import (
    asymptotic_cov_dp,
    asymptotic_cov_gp,
    cls_alpha_mu,
    cls_fit_dp,
    cls_fit_gp,
    cls_objective,
    cml_fit,
    conditional_loglik,
    fit,
    yw_fit_dp,
    yw_fit_gp,
    yw_fit_poisson,
)
from inardisp.innovations import exact_sum, pmf
from inardisp.process import CountSeries, model_from_params, simulate, transition_row

SMALL = [1, 2, 0, 3, 1, 4, 2, 2]


def frac_yw(x):
    x = [Fraction(v) for v in x]
    n = len(x)
    m = sum(x) / n
    g0 = sum((v - m) ** 2 for v in x) / n
    g1 = sum((x[i] - m) * (x[i + 1] - m) for i in range(n - 1)) / n
    return g1 / g0, m, g0


# --- closed forms ------------------------------------------------------------


def test_yw_dp_hand_arithmetic():
    a, m, g0 = frac_yw(SMALL)
    f = yw_fit_dp(SMALL)
    assert f.alpha == pytest.approx(float(a), rel=1e-14)
    assert f.mu == pytest.approx(float((1 - a) * m), rel=1e-14)
    assert f.phi == pytest.approx(float(m / (g0 * (1 + a) - m * a)), rel=1e-13)


def test_yw_gp_solves_dispersion_equation():
    f = yw_fit_gp(SMALL)
    a, m, g0 = frac_yw(SMALL)
    fi = float(g0 / m)
    # the estimator inverts FI = (1 + a q^2) / ((1 + a) q^2), q = 1 - phi
    q = 1 - f.phi
    assert (1 + f.alpha * q * q) / ((1 + f.alpha) * q * q) == pytest.approx(fi, rel=1e-12)
    assert f.mu == pytest.approx(float(1 - a) * q * float(m), rel=1e-13)


def test_yw_poisson():
    a, m, _ = frac_yw(SMALL)
    f = yw_fit_poisson(SMALL)
    assert (f.alpha, f.mu) == pytest.approx((float(a), float((1 - a) * m)))


def test_cls_hand_arithmetic():
    prev, curr = SMALL[:-1], SMALL[1:]
    n = len(prev)
    sxy = sum(Fraction(p * c) for p, c in zip(prev, curr))
    sxx = sum(Fraction(p * p) for p in prev)
    a = (n * sxy - sum(curr) * sum(prev)) / (n * sxx - sum(prev) ** 2)
    mu = (sum(curr) - a * sum(prev)) / n
    assert cls_alpha_mu(SMALL) == pytest.approx((float(a), float(mu)), rel=1e-14)
    res = [c - a * p - mu for p, c in zip(prev, curr)]
    phi = (sum(curr) - a * sum(prev)) / sum(r * r - a * (1 - a) * p for r, p in zip(res, prev))
    assert cls_fit_dp(SMALL).phi == pytest.approx(float(phi), rel=1e-13)


def test_cls_gp_with_known_mu():
    a, _ = cls_alpha_mu(SMALL)
    prev, curr = SMALL[:-1], SMALL[1:]
    f = cls_fit_gp(SMALL, mu_known=1.2)
    assert f.phi == pytest.approx(1 - 1.2 * len(prev) / (sum(curr) - a * sum(prev)))
    assert cls_fit_gp(SMALL).mu == pytest.approx(yw_fit_gp(SMALL).mu)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=5, max_size=60).filter(lambda x: len(set(x[:-1])) > 1))
def test_cls_is_stationary_point_of_objective(x):
    a, mu = cls_alpha_mu(x)
    res = minimize(lambda p: cls_objective(x, p[0], p[1]), [0.0, float(np.mean(x))], method="BFGS",
                   options={"gtol": 1e-10})
    assert cls_objective(x, a, mu) <= res.fun + 1e-8 * max(1.0, res.fun)


def test_degenerate_series():
    with pytest.raises(DegenerateSeriesError):
        yw_fit_dp([3, 3, 3, 3])
    with pytest.raises(DegenerateSeriesError):
        cls_alpha_mu([2, 2, 2, 5])
    with pytest.raises(DegenerateSeriesError):
        cls_alpha_mu([1, 2])


def test_dp_yw_rejects_nonpositive_denominator():
    # strongly underdispersed and positively correlated: FI < alpha / (1 + alpha)
    with pytest.raises(EstimationError):
        yw_fit_dp([5, 5, 5, 6, 6, 6, 5, 5, 5, 6, 6, 6])


def test_out_of_domain_estimates_warn():
    f = yw_fit_dp([0, 1, 0, 1, 0, 1, 5, 0, 1])
    assert f.alpha < 0
    assert not f.in_domain() and f.warnings


# --- likelihood --------------------------------------------------------------


def brute_loglik(x, model):
    total = 0.0
    for l, k in zip(x[:-1], x[1:]):
        p = sum(binom.pmf(i, l, model.alpha) * float(pmf(model.innovations, k - i, model.normalization))
                for i in range(min(l, k) + 1))
        total += math.log(p) if p > 0 else -math.inf
    return total


@pytest.mark.parametrize(
    "model",
    [
        model_from_params("poisson", 0.4, 2.0),
        model_from_params("dp", 0.3, 5.0, 0.5),
        model_from_params("dp", 0.3, 5.0, 2.0, exact_sum()),
        model_from_params("gp", 0.3, 1.0, 0.5),
        model_from_params("gp", 0.3, 1.0, -0.2),
    ],
)
def test_conditional_loglik_matches_brute_force(model):
    x = list(simulate(model, 120, rng=4))
    assert conditional_loglik(x, model) == pytest.approx(brute_loglik(x, model), rel=1e-11)


def test_loglik_minus_inf_for_impossible_transition():
    # GP(1, -0.5) innovations take only the values 0 and 1
    model = model_from_params("gp", 0.3, 1.0, -0.5)
    assert conditional_loglik([0, 3, 1], model) == -math.inf


# --- CML ---------------------------------------------------------------------


def test_cml_poisson_structure():
    x = simulate(model_from_params("poisson", 0.4, 2.0), 400, rng=8)
    f = cml_fit(x, "poisson")
    assert f.k == 2 and f.phi is None and f.converged
    n = len(x) - 1
    assert f.aic == pytest.approx(-2 * f.loglik + 4)
    assert f.bic == pytest.approx(-2 * f.loglik + 2 * math.log(n))


@pytest.mark.parametrize("family,params", [("dp", (0.3, 5.0, 0.5)), ("gp", (0.3, 1.0, 0.5))])
def test_cml_maximizes_likelihood(family, params):
    model = model_from_params(family, *params)
    x = simulate(model, 600, rng=21)
    f = cml_fit(x, family)
    ll = lambda p: conditional_loglik(x, model_from_params(family, *p))
    assert f.loglik == pytest.approx(ll((f.alpha, f.mu, f.phi)), rel=1e-12)
    # independent optimizer from a different start lands on the same value
    res = minimize(lambda p: -ll(p), [0.5, params[1] * 1.3, params[2] * 0.8], method="L-BFGS-B",
                   bounds=[(0.01, 0.95), (0.05, 50), (0.05, 0.95) if family == "gp" else (0.05, 20)])
    assert f.loglik >= -res.fun - 1e-6
    assert f.loglik >= ll(params)


def test_cml_standard_errors_against_resampling_spread():
    model = model_from_params("gp", 0.3, 1.0, 0.5)
    fits = [cml_fit(simulate(model, 800, rng=100 + r), "gp") for r in range(60)]
    spread = np.std([[f.alpha, f.mu, f.phi] for f in fits], axis=0, ddof=1)
    reported = np.mean([[f.std_errors[k] for k in ("alpha", "mu", "phi")] for f in fits], axis=0)
    np.testing.assert_allclose(reported, spread, rtol=0.35)


def test_cml_fixed_parameter_reduces_k():
    x = simulate(model_from_params("dp", 0.3, 5.0, 0.5), 300, rng=2)
    f = cml_fit(x, "dp", fixed={"phi": 0.5})
    assert f.phi == 0.5
    assert f.aic == pytest.approx(-2 * f.loglik + 4)
    with pytest.raises(ValueError):
        cml_fit(x, "dp", fixed={"beta": 1.0})


def test_cml_never_worse_than_start():
    x = simulate(model_from_params("gp", 0.3, 1.0, -0.5), 200, rng=5)
    start = yw_fit_gp(x)
    f = cml_fit(x, "gp")
    try:
        ll0 = conditional_loglik(x, start.model())
    except ValueError:
        ll0 = -math.inf
    assert f.loglik >= ll0


def test_fit_dispatch():
    x = simulate(model_from_params("dp", 0.3, 5.0, 0.5), 200, rng=9)
    assert fit(x, "dp", "yw").method == "yw"
    assert fit(x, "dp", "cls").phi == cls_fit_dp(x).phi


# --- asymptotic covariances --------------------------------------------------


def stationary_law(model, n=160, iters=800):
    P = np.zeros((n, n))
    for l in range(n):
        row = transition_row(model, l)[:n]
        P[l, : row.size] = row
    pi = np.full(n, 1.0 / n)
    for _ in range(iters):
        pi = pi @ P
    return pi / pi.sum()


def sandwich(model, grad, var_e):
    # V = E[g g'], W = E[g g' d(X)], d = alpha(1-alpha) X + Var(e)
    pi = stationary_law(model)
    k = np.arange(pi.size, dtype=float)
    g = grad(k)
    d = model.alpha * (1 - model.alpha) * k + var_e
    V = np.einsum("n,in,jn->ij", pi, g, g)
    W = np.einsum("n,in,jn,n->ij", pi, g, g, d)
    Vi = np.linalg.inv(V)
    return Vi @ W @ Vi


def test_dp_covariance_against_sandwich_on_stationary_law():
    model = model_from_params("dp", 0.3, 5.0, 0.5, exact_sum())
    from inardisp.innovations import dp_moments

    _, var_e = dp_moments(model.innovations, exact_sum())
    oracle = sandwich(model, lambda k: np.vstack([k, np.ones_like(k)]), var_e)
    got = asymptotic_cov_dp(0.3, 5.0, 0.5).matrix
    # the closed form mixes nominal (mu, phi) with an exactly normalized gamma
    np.testing.assert_allclose(got, oracle, rtol=0.03)


def test_dp_literal_covariance_is_far_from_sandwich():
    lit = asymptotic_cov_dp(0.3, 5.0, 0.5, literal=True).matrix
    cor = asymptotic_cov_dp(0.3, 5.0, 0.5).matrix
    assert lit[1, 1] == pytest.approx(cor[1, 1] - (25 - 5) * 1.3 / 0.7)
    assert lit[1, 1] < 0.5 * cor[1, 1]


def test_gp_covariance_against_sandwich_on_stationary_law():
    model = model_from_params("gp", 0.3, 1.0, 0.5)
    c = 1.0 / 0.25
    oracle = sandwich(model, lambda k: np.vstack([k, np.full_like(k, c)]), 8.0)
    got = asymptotic_cov_gp(0.3, 1.0, 0.5).matrix
    np.testing.assert_allclose(got, oracle, rtol=1e-6)


def test_gp_simplified_variant_disagrees():
    simplified = asymptotic_cov_gp(0.3, 1.0, 0.5, variant="simplified").matrix
    good = asymptotic_cov_gp(0.3, 1.0, 0.5).matrix
    assert np.all(np.abs(simplified - good) / np.abs(good) > 0.15)
    with pytest.raises(ValueError):
        asymptotic_cov_gp(0.3, 1.0, 0.5, variant="other")


def test_covariances_symmetric_positive_definite():
    for S in (asymptotic_cov_dp(0.5, 2.0, 1.5).matrix, asymptotic_cov_gp(0.6, 2.0, 0.2).matrix):
        np.testing.assert_array_equal(S, S.T)
        assert np.all(np.linalg.eigvalsh(S) > 0)
        assert not S.flags.writeable
