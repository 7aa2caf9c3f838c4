"""
Estimators for INAR(1) models with Poisson, DP and GP innovations.

Closed-form Yule-Walker (YW) and conditional least squares (CLS) estimators
return raw values, even outside the parameter space, and attach a warning;
the Monte Carlo tables need the unclamped estimators. Conditional maximum
likelihood (CML) maximizes the transition log-likelihood with a Nelder-Mead
simplex in unconstrained coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, gammaln, logit, xlog1py, xlogy

from . import innovations as inn
from .errors import DegenerateSeriesError, EstimationError, InarError, SingularMatrixError
from .inference import information_criteria
from .innovations import APPROX_NORMALIZER, NormalizationMode
from .process import (
    CountSeries,
    Inar1Model,
    as_series,
    model_from_params,
    require_length,
    stationary_moments,
    stationary_third_moment,
)

__all__ = [
    "FitResult",
    "AsymptoticCov",
    "PARAM_NAMES",
    "cls_alpha_mu",
    "cls_objective",
    "cls_fit_dp",
    "cls_fit_gp",
    "cls_fit_poisson",
    "yw_fit_dp",
    "yw_fit_gp",
    "yw_fit_poisson",
    "yw_fit",
    "cls_fit",
    "fit",
    "conditional_loglik",
    "cml_fit",
    "asymptotic_cov_dp",
    "asymptotic_cov_gp",
]

PARAM_NAMES = {"poisson": ("alpha", "mu"), "dp": ("alpha", "mu", "phi"), "gp": ("alpha", "mu", "phi")}


@dataclass
class FitResult:
    method: str
    family: str
    alpha: float
    mu: float
    phi: float | None = None
    std_errors: dict | None = None
    loglik: float | None = None
    aic: float | None = None
    bic: float | None = None
    converged: bool = True
    warnings: list = field(default_factory=list)
    n_obs: int = 0
    n_evals: int | None = None

    @property
    def estimates(self) -> dict:
        out = {"alpha": self.alpha, "mu": self.mu}
        if self.family != "poisson":
            out["phi"] = self.phi
        return out

    @property
    def k(self) -> int:
        return len(PARAM_NAMES[self.family])

    def in_domain(self) -> bool:
        return not _domain_warnings(self.family, self.alpha, self.mu, self.phi)

    def model(self, normalization: NormalizationMode = APPROX_NORMALIZER) -> Inar1Model:
        return model_from_params(self.family, self.alpha, self.mu, self.phi, normalization)


@dataclass(frozen=True)
class AsymptoticCov:
    matrix: np.ndarray
    labels: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def std_errors_per_root_t(self) -> np.ndarray:
        return np.sqrt(np.diag(self.matrix))


def _domain_warnings(family: str, alpha: float, mu: float, phi: float | None) -> list[str]:
    out = []
    if not 0.0 <= alpha < 1.0:
        out.append(f"alpha estimate {alpha:.6g} outside [0, 1)")
    if not mu > 0:
        out.append(f"mu estimate {mu:.6g} is not positive")
    if family == "dp" and not (phi is not None and phi > 0):
        out.append(f"phi estimate {phi!r} is not positive")
    if family == "gp" and not (phi is not None and abs(phi) < 1):
        out.append(f"phi estimate {phi!r} outside (-1, 1)")
    return out


def _lagged(series) -> tuple[np.ndarray, np.ndarray]:
    x = as_series(series).values.astype(float)
    return x[:-1], x[1:]


# ---------------------------------------------------------------------------
# Conditional least squares
# ---------------------------------------------------------------------------


def cls_alpha_mu(series) -> tuple[float, float]:
    """Closed-form CLS regression of ``X_t`` on ``X_{t-1}``."""
    series = as_series(series)
    require_length(series, 3)
    prev, curr = _lagged(series)
    n = prev.size
    denom = n * np.dot(prev, prev) - prev.sum() ** 2
    if denom == 0:
        raise DegenerateSeriesError("lagged values are constant; CLS is undefined")
    alpha = (n * np.dot(curr, prev) - curr.sum() * prev.sum()) / denom
    mu = (curr.sum() - alpha * prev.sum()) / n
    return float(alpha), float(mu)


def cls_objective(series, alpha: float, mu: float) -> float:
    """Sum of squared one-step prediction errors."""
    prev, curr = _lagged(series)
    r = curr - alpha * prev - mu
    return float(r @ r)


def cls_fit_poisson(series) -> FitResult:
    alpha, mu = cls_alpha_mu(series)
    return FitResult("cls", "poisson", alpha, mu, warnings=_domain_warnings("poisson", alpha, mu, None),
                     n_obs=len(series))


def cls_fit_dp(series) -> FitResult:
    """CLS for (alpha, mu) followed by the two-step estimator of phi."""
    series = as_series(series)
    alpha, mu = cls_alpha_mu(series)
    prev, curr = _lagged(series)
    resid = curr - alpha * prev - mu
    denom = float(np.sum(resid**2 - alpha * (1.0 - alpha) * prev))
    if not denom > 0:
        raise EstimationError("non-positive conditional variance proxy; phi is not estimable")
    phi = float((curr.sum() - alpha * prev.sum()) / denom)
    return FitResult("cls", "dp", alpha, mu, phi, warnings=_domain_warnings("dp", alpha, mu, phi),
                     n_obs=len(series))


def cls_fit_gp(series, mu_known: float | None = None) -> FitResult:
    """CLS for (alpha, phi) given the innovation parameter ``mu``.

    The conditional mean identifies only ``mu / (1 - phi)``, so ``mu`` must be
    supplied; by default the YW estimate is used.
    """
    series = as_series(series)
    alpha, _ = cls_alpha_mu(series)
    if mu_known is None:
        mu_known = yw_fit_gp(series).mu
    prev, curr = _lagged(series)
    denom = curr.sum() - alpha * prev.sum()
    if denom == 0:
        raise EstimationError("zero denominator in the CLS estimator of phi")
    phi = float(1.0 - mu_known * prev.size / denom)
    mu = float(mu_known)
    return FitResult("cls", "gp", alpha, mu, phi, warnings=_domain_warnings("gp", alpha, mu, phi),
                     n_obs=len(series))


# ---------------------------------------------------------------------------
# Yule-Walker
# ---------------------------------------------------------------------------


def _yw_core(series) -> tuple[float, float, float]:
    """(alpha_hat, mean, gamma0) with the divisor-T sample variance."""
    series = as_series(series)
    require_length(series, 3)
    x = series.values.astype(float)
    xbar = x.mean()
    d = x - xbar
    ss = float(d @ d)
    if ss == 0:
        raise DegenerateSeriesError("series has zero sample variance")
    alpha = float(d[:-1] @ d[1:]) / ss
    return alpha, float(xbar), ss / x.size


def yw_fit_poisson(series) -> FitResult:
    alpha, xbar, _ = _yw_core(series)
    mu = (1.0 - alpha) * xbar
    return FitResult("yw", "poisson", alpha, mu, warnings=_domain_warnings("poisson", alpha, mu, None),
                     n_obs=len(series))


def yw_fit_dp(series) -> FitResult:
    alpha, xbar, g0 = _yw_core(series)
    mu = (1.0 - alpha) * xbar
    denom = g0 * (1.0 + alpha) - xbar * alpha
    if not denom > 0:
        raise EstimationError("non-positive denominator in the YW estimator of phi")
    phi = xbar / denom
    return FitResult("yw", "dp", alpha, mu, phi, warnings=_domain_warnings("dp", alpha, mu, phi),
                     n_obs=len(series))


def yw_fit_gp(series) -> FitResult:
    alpha, xbar, g0 = _yw_core(series)
    if xbar == 0:
        raise DegenerateSeriesError("all-zero series")
    fi = g0 / xbar
    radicand = alpha * fi - alpha + fi
    if radicand < 0:
        raise EstimationError("negative radicand in the YW estimator of phi")
    if radicand == 0:
        raise EstimationError("zero denominator in the YW estimator of phi")
    phi = (radicand - math.sqrt(radicand)) / radicand
    mu = (1.0 - alpha) * (1.0 - phi) * xbar
    return FitResult("yw", "gp", alpha, mu, phi, warnings=_domain_warnings("gp", alpha, mu, phi),
                     n_obs=len(series))


_YW = {"poisson": yw_fit_poisson, "dp": yw_fit_dp, "gp": yw_fit_gp}
_CLS = {"poisson": cls_fit_poisson, "dp": cls_fit_dp, "gp": cls_fit_gp}


def yw_fit(series, family: str) -> FitResult:
    return _YW[family.lower()](series)


def cls_fit(series, family: str) -> FitResult:
    return _CLS[family.lower()](series)


# ---------------------------------------------------------------------------
# Conditional likelihood
# ---------------------------------------------------------------------------


class _TransitionLoglik:
    """Conditional log-likelihood of a fixed series, vectorized over the
    distinct (previous, current) pairs.

    The binomial-coefficient part of every convolution term is computed once;
    each evaluation only adds the parameter-dependent pieces.
    """

    def __init__(self, series):
        prev, curr = _lagged(series)
        pairs, counts = np.unique(np.stack([prev, curr], axis=1).astype(np.int64), axis=0, return_counts=True)
        self.prev = pairs[:, 0]
        self.curr = pairs[:, 1]
        self.weights = counts.astype(float)
        top = np.minimum(self.prev, self.curr)
        i = np.arange(int(top.max()) + 1 if top.size else 1)
        self.valid = i <= top[:, None]
        l = self.prev[:, None].astype(float)
        ii = np.where(self.valid, i, 0).astype(float)
        self.i = ii
        self.rest = np.where(self.valid, l - ii, 0.0)
        self.log_choose = np.where(self.valid, gammaln(l + 1) - gammaln(ii + 1) - gammaln(self.rest + 1), -np.inf)
        self.eps_index = np.where(self.valid, self.curr[:, None] - ii, 0).astype(np.int64)
        self.kmax = int(self.curr.max())

    def log_terms(self, model: Inar1Model) -> np.ndarray:
        log_eps = inn.log_pmf(model.innovations, np.arange(self.kmax + 1), model.normalization)
        a = model.alpha
        return self.log_choose + xlogy(self.i, a) + xlog1py(self.rest, -a) + log_eps[self.eps_index]

    def per_pair(self, model: Inar1Model) -> np.ndarray:
        terms = self.log_terms(model)
        top = terms.max(axis=1)
        finite = np.isfinite(top)
        safe = np.where(finite, top, 0.0)
        with np.errstate(divide="ignore"):
            out = safe + np.log(np.exp(terms - safe[:, None]).sum(axis=1))
        return np.where(finite, out, -np.inf)

    def __call__(self, model: Inar1Model) -> float:
        lp = self.per_pair(model)
        if np.any(lp == -np.inf):
            return -math.inf
        return float(lp @ self.weights)


def conditional_loglik(series, model: Inar1Model) -> float:
    """``sum_{t>=2} log Pr(X_t | X_{t-1})``, conditioning on the first value.

    Returns ``-inf`` when some transition is impossible under ``model``.
    """
    series = as_series(series)
    require_length(series, 2)
    return _TransitionLoglik(series)(model)


# ---------------------------------------------------------------------------
# CML
# ---------------------------------------------------------------------------


def _to_free(family: str, name: str, value: float) -> float:
    if name == "alpha":
        return float(logit(value))
    if name == "mu" or (name == "phi" and family == "dp"):
        return math.log(value)
    return math.atanh(value)


def _from_free(family: str, name: str, z: float) -> float:
    if name == "alpha":
        return float(expit(z))
    if name == "mu" or (name == "phi" and family == "dp"):
        return math.exp(z)
    return math.tanh(z)


def _starting_point(series: CountSeries, family: str, init: FitResult | None, start: str) -> dict:
    candidates = [init] if init is not None else []
    for method in ([start] + [m for m in ("yw", "cls") if m != start]):
        try:
            candidates.append((yw_fit if method == "yw" else cls_fit)(series, family))
        except InarError:
            continue
    xbar = max(float(np.mean(series.values)), 0.1)
    theta = {"alpha": 0.3, "mu": 0.7 * xbar, "phi": 1.0 if family == "dp" else 0.0}
    for c in candidates:
        if c is not None:
            theta = {"alpha": c.alpha, "mu": c.mu, "phi": c.phi if c.phi is not None else theta["phi"]}
            break
    theta["alpha"] = min(max(theta["alpha"], 0.01), 0.95)
    if not (theta["mu"] > 0 and math.isfinite(theta["mu"])):
        theta["mu"] = (1 - theta["alpha"]) * xbar
    if family == "dp" and not (theta["phi"] is not None and 0.01 <= theta["phi"] <= 100):
        theta["phi"] = 1.0 if not theta["phi"] or theta["phi"] <= 0 else min(max(theta["phi"], 0.01), 100)
    if family == "gp":
        theta["phi"] = min(max(theta["phi"], -0.9), 0.9)
    return {k: theta[k] for k in PARAM_NAMES[family]}


def _numeric_hessian(f, x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = rel_step * np.maximum(np.abs(x), 1e-2)
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def cml_fit(
    series,
    family: str,
    init: FitResult | None = None,
    *,
    fixed: dict | None = None,
    start: str = "yw",
    normalization: NormalizationMode = APPROX_NORMALIZER,
    max_evals: int = 10_000,
    ftol: float = 1e-10,
    initial_step: float = 0.1,
    hessian_step: float = 1e-4,
) -> FitResult:
    """Conditional maximum likelihood fit.

    Parameters are mapped to unconstrained coordinates (logit alpha, log mu,
    log phi for DP, atanh phi for GP) and searched with Nelder-Mead from the
    YW (or CLS, or ``init``) estimates. Standard errors come from the inverse
    of the negative numeric Hessian in the natural parameters. ``fixed`` pins
    parameters by name; pinned parameters are excluded from the search and
    from the parameter count used by AIC/BIC.
    """
    series = as_series(series)
    require_length(series, 3)
    family = family.lower()
    names = PARAM_NAMES[family]
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(names)
    if unknown:
        raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
    free = [n for n in names if n not in fixed]
    theta0 = _starting_point(series, family, init, start)
    theta0.update(fixed)
    loglik = _TransitionLoglik(series)

    def ll_natural(theta: dict) -> float:
        try:
            model = model_from_params(family, theta["alpha"], theta["mu"], theta.get("phi"), normalization)
        except (InarError, ValueError):
            return -math.inf
        return loglik(model)

    if family == "gp" and theta0["phi"] < 0 and "phi" not in fixed:
        # step phi towards zero until every observed transition is possible
        while ll_natural(theta0) == -math.inf and theta0["phi"] < -1e-3:
            theta0["phi"] *= 0.5
        if ll_natural(theta0) == -math.inf:
            theta0["phi"] = 0.0

    def unpack(z) -> dict:
        theta = dict(fixed)
        for name, zi in zip(free, z):
            theta[name] = _from_free(family, name, zi)
        return theta

    def objective(z) -> float:
        ll = ll_natural(unpack(z))
        return -ll if math.isfinite(ll) else math.inf

    warnings: list[str] = []
    ll_start = ll_natural(theta0)
    if free:
        z0 = np.array([_to_free(family, n, theta0[n]) for n in free])
        simplex = np.vstack([z0] + [z0 + initial_step * np.eye(len(free))[i] for i in range(len(free))])
        with np.errstate(all="ignore"):
            res = minimize(
                objective,
                z0,
                method="Nelder-Mead",
                options={
                    "initial_simplex": simplex,
                    "xatol": np.inf,
                    "fatol": ftol,
                    "maxfev": max_evals,
                    "maxiter": max_evals,
                },
            )
        theta = unpack(res.x)
        converged = bool(res.success) and math.isfinite(res.fun)
        n_evals = int(res.nfev)
        if not converged:
            warnings.append(f"simplex search did not converge: {res.message}")
    else:
        theta, converged, n_evals = dict(fixed), True, 0
    ll = ll_natural(theta)
    if math.isfinite(ll_start) and ll < ll_start:
        # never return a point worse than the start
        theta, ll = dict(theta0), ll_start

    std_errors = None
    if free and math.isfinite(ll):
        x = np.array([theta[n] for n in free])

        def ll_vec(v):
            t = dict(theta)
            t.update(zip(free, v))
            return ll_natural(t)

        with np.errstate(all="ignore"):
            H = _numeric_hessian(ll_vec, x, hessian_step)
        try:
            if not np.all(np.isfinite(H)):
                raise np.linalg.LinAlgError("non-finite Hessian")
            cov = np.linalg.inv(-H)
            diag = np.diag(cov)
            if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
                raise np.linalg.LinAlgError("negative Hessian is not positive definite")
            std_errors = {n: float(math.sqrt(d)) for n, d in zip(free, diag)}
        except np.linalg.LinAlgError as exc:
            warnings.append(f"standard errors unavailable: {exc}")
    k = max(len(free), 1)
    n_trans = len(series) - 1
    aic, bic = information_criteria(ll, k, n_trans) if math.isfinite(ll) else (None, None)
    warnings.extend(_domain_warnings(family, theta["alpha"], theta["mu"], theta.get("phi")))
    return FitResult(
        "cml",
        family,
        float(theta["alpha"]),
        float(theta["mu"]),
        None if family == "poisson" else float(theta["phi"]),
        std_errors=std_errors,
        loglik=float(ll),
        aic=aic,
        bic=bic,
        converged=converged,
        warnings=warnings,
        n_obs=len(series),
        n_evals=n_evals,
    )


def fit(series, family: str, method: str, **kwargs) -> FitResult:
    method = method.lower()
    if method == "yw":
        return yw_fit(series, family)
    if method == "cls":
        return cls_fit(series, family)
    if method == "cml":
        return cml_fit(series, family, **kwargs)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Asymptotic covariances of the CLS estimators
# ---------------------------------------------------------------------------


def _raw_moments_x(model: Inar1Model, e1: float, var_e: float, e3: float) -> tuple[float, float, float]:
    a = model.alpha
    e2 = var_e + e1 * e1
    m1 = e1 / (1 - a)
    m2 = (a * e1 + var_e) / (1 - a * a) + m1 * m1
    rest = (
        3 * a * a * (1 - a) * m2
        + a * (1 - a) * (1 - 2 * a) * m1
        + 3 * (a * (1 - a) * m1 + a * a * m2) * e1
        + 3 * a * m1 * e2
        + e3
    )
    return m1, m2, rest / (1 - a**3)


def asymptotic_cov_dp(alpha: float, mu: float, phi: float, *, literal: bool = False) -> AsymptoticCov:
    """Limiting covariance of ``sqrt(T) (alpha_cls - alpha, mu_cls - mu)``.

    ``gamma`` is the stationary third central moment of X, evaluated from the
    exactly normalized DP innovation law. The (mu, mu) entry carries
    ``mu**2 (1+alpha)/(1-alpha)``; ``literal=True`` uses ``mu (1+alpha)/(1-alpha)``
    instead, kept for comparison only.
    """
    model = model_from_params("dp", alpha, mu, phi)
    m1, m2, m3 = inn.innovation_moments(model.innovations)
    mx = m1 / (1 - alpha)
    var_x = (alpha * m1 + (m2 - m1 * m1)) / (1 - alpha * alpha)
    gamma = stationary_third_moment(model) - 3 * mx * var_x - mx**3
    a = alpha
    d = (1 + a * phi) ** 2
    s11 = gamma * a * (1 - a) ** 3 * (1 + a) ** 2 * phi**2 / (mu**2 * d) + 1 - a * a
    s12 = a * (1 - a) - mu * (1 + a) - gamma * a * (1 - a * a) ** 2 * phi**2 / (mu * d)
    mean_term = (mu if literal else mu * mu) * (1 + a) / (1 - a)
    s22 = gamma * a * (1 - a) * (1 + a) ** 2 * phi**2 / d + mean_term + mu / phi - a * mu
    return AsymptoticCov(np.array([[s11, s12], [s12, s22]]), ("alpha", "mu"))


def asymptotic_cov_gp(alpha: float, mu: float, phi: float, *, variant: str = "definition") -> AsymptoticCov:
    """Limiting covariance ``V^-1 W V^-1`` of ``sqrt(T) (alpha_cls - alpha, phi_cls - phi)``
    when the innovation ``mu`` is known.

    ``variant="definition"`` evaluates V and W from their defining
    expectations, ``V = E[g g']`` and ``W = E[g d g']`` with gradient
    ``g = (X_{t-1}, mu/(1-phi)^2)`` and conditional variance ``d``.
    ``variant="simplified"`` uses simplified closed-form entries,
    reading the undefined symbols lambda and theta as mu and phi.
    """
    model = model_from_params("gp", alpha, mu, phi)
    a = alpha
    e1, e_var, e3 = inn.gp_moments(model.innovations)
    m1, m2, _ = _raw_moments_x(model, e1, e_var, e3)
    m3 = stationary_third_moment(model)
    if variant == "definition":
        c = mu / (1 - phi) ** 2
        V = np.array([[m2, c * m1], [c * m1, c * c]])
        w12 = c * (a * (1 - a) * m2 + e_var * m1)
        W = np.array(
            [[a * (1 - a) * m3 + e_var * m2, w12], [w12, c * c * (a * (1 - a) * m1 + e_var)]]
        )
    elif variant == "simplified":
        off = (1 - a) * m1 * m1
        V = np.array([[m2, off], [off, e1 * e_var]])
        w12 = e1 * e_var * (a * e1 + e_var)
        W = np.array(
            [
                [a * (1 - a) * m3 + e_var * m2, w12],
                [w12, mu * (a * (1 - a) * m2 + m1 * e_var) / (1 - phi) ** 2],
            ]
        )
    else:
        raise ValueError(f"unknown variant {variant!r}")
    det = V[0, 0] * V[1, 1] - V[0, 1] ** 2
    if abs(det) <= 1e-12 * abs(V[0, 0] * V[1, 1]):
        raise SingularMatrixError("V is singular")
    Vi = np.array([[V[1, 1], -V[0, 1]], [-V[0, 1], V[0, 0]]]) / det
    S = Vi @ W @ Vi
    S = 0.5 * (S + S.T)
    return AsymptoticCov(S, ("alpha", "phi"))
