"""
Sample statistics, the equidispersion test, likelihood-ratio tests and
information criteria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import chdtrc, chdtri, ndtr, ndtri

from .errors import DegenerateSeriesError, DomainError, InarError


@dataclass(frozen=True)
class SampleStats:
    mean: float
    variance: float
    fisher_index: float | None
    acf: tuple


@dataclass(frozen=True)
class TestReport:
    """Outcome of a hypothesis test.

    ``threshold`` is the rejection boundary on the statistic's scale when the
    test has one, ``p_value`` the matching tail probability.
    """

    test_name: str
    statistic: float
    threshold: float | None
    p_value: float
    direction: str
    level: float | None
    reject: bool
    details: dict | None = None

    __test__ = False  # not a pytest class


def sample_acf(x, max_lag: int) -> np.ndarray:
    """Autocorrelations at lags ``1..max_lag`` (divisor-T autocovariances)."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    g0 = float(d @ d)
    if g0 == 0:
        return np.full(max_lag, np.nan)
    return np.array([float(d[:-h] @ d[h:]) / g0 if h < x.size else np.nan for h in range(1, max_lag + 1)])


def sample_stats(series, max_lag: int = 10) -> SampleStats:
    """Mean, divisor-T variance, sample Fisher index and ACF.

    The Fisher index is ``sum (X_t - Xbar)^2 / sum X_t``; an all-zero series
    has no Fisher index and raises.
    """
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if x.size < 2:
        raise DegenerateSeriesError("need at least two observations")
    mean = float(x.mean())
    d = x - mean
    var = float(d @ d) / x.size
    if mean == 0:
        raise DegenerateSeriesError("all-zero series has no Fisher index")
    acf = sample_acf(x, max_lag)
    return SampleStats(mean=mean, variance=var, fisher_index=var / mean, acf=tuple(float(v) for v in acf))


def normal_quantile(p: float) -> float:
    return float(ndtri(p))


def equidispersion_threshold(alpha_hat: float, T: int) -> float:
    """Asymptotic standard deviation of the sample Fisher index under a
    Poisson INAR(1) null."""
    return math.sqrt(2.0 * (1.0 + alpha_hat**2) / (T * (1.0 - alpha_hat**2)))


def dispersion_test_from_stats(
    fisher_index: float,
    alpha_hat: float,
    T: int,
    beta: float = 0.05,
    direction: str = "over",
    centered: bool = True,
) -> TestReport:
    """Equidispersion test from summary statistics.

    With ``centered=True`` the statistic is ``FI_hat - 1``. ``centered=False``
    compares ``FI_hat`` itself against the quantile-scaled standard deviation,
    which rejects almost surely for large T and is kept for fidelity checks.
    """
    if not 0.0 <= alpha_hat < 1.0:
        raise DomainError(f"alpha_hat must lie in [0, 1), got {alpha_hat}")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if direction not in ("over", "under"):
        raise DomainError(f"direction must be 'over' or 'under', got {direction!r}")
    sd = equidispersion_threshold(alpha_hat, T)
    stat = fisher_index - 1.0 if centered else fisher_index
    z = (fisher_index - 1.0) / sd
    if direction == "over":
        threshold = normal_quantile(1.0 - beta) * sd
        reject = stat > threshold
        p_value = float(ndtr(-z))
    else:
        threshold = normal_quantile(beta) * sd
        reject = stat < threshold
        p_value = float(ndtr(z))
    two_sided = float(2.0 * ndtr(-abs(z)))
    return TestReport(
        test_name="equidispersion",
        statistic=float(stat),
        threshold=float(threshold),
        p_value=p_value,
        direction=direction,
        level=beta,
        reject=bool(reject),
        details={
            "fisher_index": float(fisher_index),
            "alpha_hat": float(alpha_hat),
            "T": int(T),
            "z": float(z),
            "p_value_two_sided": two_sided,
            "centered": centered,
        },
    )


def equidispersion_test(
    series,
    alpha_hat: float | None = None,
    beta: float = 0.05,
    direction: str = "over",
    centered: bool = True,
) -> TestReport:
    """Test equidispersion against over- or underdispersion.

    ``alpha_hat`` defaults to the lag-1 sample autocorrelation (the YW
    estimate); negative values are clipped to zero.
    """
    stats = sample_stats(series, 1)
    x = np.asarray(getattr(series, "values", series))
    if alpha_hat is None:
        alpha_hat = stats.acf[0]
        if not math.isfinite(alpha_hat):
            raise DegenerateSeriesError("constant series")
        alpha_hat = min(max(alpha_hat, 0.0), 0.999)
    return dispersion_test_from_stats(stats.fisher_index, alpha_hat, x.size, beta, direction, centered)


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square law."""
    if x <= 0:
        return 1.0
    return float(chdtrc(df, x))


def lr_test(loglik_null: float, loglik_alt: float, df: int = 1, level: float = 0.05,
            tol: float = 1e-8) -> TestReport:
    """Likelihood-ratio test of nested models, ``2 (l_alt - l_null)`` vs chi2(df)."""
    if df < 1:
        raise DomainError("df must be a positive integer")
    if not (math.isfinite(loglik_null) and math.isfinite(loglik_alt)):
        raise InarError("log-likelihoods must be finite")
    if loglik_alt < loglik_null - tol:
        raise InarError("alternative log-likelihood below the null: models not nested or fit failed")
    stat = max(2.0 * (loglik_alt - loglik_null), 0.0)
    p = chi2_sf(stat, df)
    return TestReport(
        test_name="likelihood_ratio",
        statistic=stat,
        threshold=float(_chi2_quantile(1.0 - level, df)),
        p_value=p,
        direction="upper",
        level=level,
        reject=p < level,
        details={"df": df, "loglik_null": loglik_null, "loglik_alt": loglik_alt},
    )


def _chi2_quantile(q: float, df: int) -> float:
    return float(chdtri(df, 1.0 - q))


def information_criteria(loglik: float, k: int, n_transitions: int) -> tuple[float, float]:
    """AIC and BIC; BIC uses the number of transitions as sample size."""
    if k < 1 or n_transitions < 1:
        raise DomainError("k and n_transitions must be positive")
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + k * math.log(n_transitions)
