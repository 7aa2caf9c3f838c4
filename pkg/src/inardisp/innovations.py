"""
Innovation families for INAR(1) models.

Three count laws are supported: Poisson, Efron's double Poisson (DP) and
Consul's generalized Poisson (GP). All mass functions are evaluated in
log-space through ``lgamma`` and exponentiated last.

The DP normalizing constant has no closed form. Two modes are offered:

- ``APPROX_NORMALIZER`` uses the usual series approximation of ``Z(mu, phi)``;
  this is the default for likelihood work.
- ``exact_sum(tol)`` renormalizes the unnormalized mass numerically over a
  certified tail cutoff.

GP with ``phi < 0`` has a hard-truncated support (``Pr(Y=y) = 0`` once
``mu + y*phi <= 0``) and is *not* renormalized; the missing mass is exposed
through :func:`mass_deficiency`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConvergenceError, DegenerateParameterError, DomainError

__all__ = [
    "PoissonParams",
    "DoublePoissonParams",
    "GenPoissonParams",
    "InnovationSpec",
    "NormalizationMode",
    "APPROX_NORMALIZER",
    "exact_sum",
    "dp_normalizer",
    "dp_pmf",
    "dp_moments",
    "gp_pmf",
    "gp_moments",
    "gp_pgf",
    "gp_third_moment_bracket",
    "gp_truncation_index",
    "innovation_fisher_index",
    "innovation_moments",
    "log_pmf",
    "pmf",
    "mass_deficiency",
    "sample_innovation",
    "sample_innovations",
    "support_cutoff",
]


@dataclass(frozen=True)
class PoissonParams:
    mu: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise DomainError(f"Poisson mean must be positive, got {self.mu}")

    family = "poisson"


@dataclass(frozen=True)
class DoublePoissonParams:
    mu: float
    phi: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise DomainError(f"DP mu must be positive, got {self.mu}")
        if not (self.phi > 0 and math.isfinite(self.phi)):
            raise DomainError(f"DP phi must be positive, got {self.phi}")

    family = "dp"


@dataclass(frozen=True)
class GenPoissonParams:
    mu: float
    phi: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise DomainError(f"GP mu must be positive, got {self.mu}")
        if not abs(self.phi) < 1:
            raise DomainError(f"GP phi must lie in (-1, 1), got {self.phi}")

    family = "gp"


InnovationSpec = Union[PoissonParams, DoublePoissonParams, GenPoissonParams]


@dataclass(frozen=True)
class NormalizationMode:
    """How the DP normalizing constant is obtained.

    ``exact=False`` is the series approximation; ``exact=True`` sums the
    unnormalized mass until the certified tail bound drops below
    ``tail_tolerance``.
    """

    exact: bool = False
    tail_tolerance: float = 1e-12

    def __post_init__(self):
        if self.exact and not (0 < self.tail_tolerance <= 1e-6):
            raise ValueError("tail_tolerance must lie in (0, 1e-6]")


APPROX_NORMALIZER = NormalizationMode()


def exact_sum(tail_tolerance: float = 1e-12) -> NormalizationMode:
    return NormalizationMode(exact=True, tail_tolerance=tail_tolerance)


# ---------------------------------------------------------------------------
# Double Poisson
# ---------------------------------------------------------------------------


def _dp_inverse_normalizer(mu: float, phi: float) -> float:
    mp = mu * phi
    return 1.0 + (1.0 - phi) / (12.0 * mp) * (1.0 + 1.0 / mp)


def dp_normalizer(p: DoublePoissonParams) -> float:
    """Approximate normalizing constant ``Z(mu, phi)`` of the DP law."""
    inv = _dp_inverse_normalizer(p.mu, p.phi)
    if not inv > 0:
        raise DegenerateParameterError(
            f"approximate DP normalizer is non-positive at mu={p.mu}, phi={p.phi}"
        )
    return 1.0 / inv


def _dp_log_kernel(mu: float, phi: float, y: np.ndarray) -> np.ndarray:
    # log of sqrt(phi) e^{-phi mu} [e^{-y} y^y / y!] (e mu / y)^{phi y}, with 0^0 = 1
    y = np.asarray(y, dtype=float)
    ylogy = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)
    return (
        0.5 * math.log(phi)
        - phi * mu
        - y
        + ylogy
        - gammaln(y + 1.0)
        + phi * y * (1.0 + math.log(mu))
        - phi * ylogy
    )


@lru_cache(maxsize=4096)
def _dp_log_exact_normalizer(mu: float, phi: float, tol: float) -> float:
    cutoff = _tail_cutoff(lambda y: _dp_log_kernel(mu, phi, y), mu + 10.0 * math.sqrt(mu / phi), tol)
    return -float(logsumexp(_dp_log_kernel(mu, phi, np.arange(cutoff + 1))))


def _dp_log_norm(p: DoublePoissonParams, mode: NormalizationMode) -> float:
    if mode.exact:
        return _dp_log_exact_normalizer(float(p.mu), float(p.phi), mode.tail_tolerance)
    return math.log(dp_normalizer(p))


def dp_log_pmf(p: DoublePoissonParams, y, mode: NormalizationMode = APPROX_NORMALIZER):
    return _dp_log_norm(p, mode) + _dp_log_kernel(p.mu, p.phi, y)


def dp_pmf(p: DoublePoissonParams, y, mode: NormalizationMode = APPROX_NORMALIZER):
    out = np.exp(dp_log_pmf(p, y, mode))
    return float(out) if np.ndim(out) == 0 else out


def dp_moments(p: DoublePoissonParams, mode: NormalizationMode = APPROX_NORMALIZER):
    """(mean, variance) of the DP law.

    The approximate mode returns the textbook ``(mu, mu/phi)``; the exact mode
    sums the renormalized mass function.
    """
    if not mode.exact:
        return float(p.mu), float(p.mu / p.phi)
    m1, m2, _ = _numeric_raw_moments(p, mode)
    return m1, m2 - m1 * m1


# ---------------------------------------------------------------------------
# Generalized Poisson
# ---------------------------------------------------------------------------


def gp_truncation_index(p: GenPoissonParams) -> int | None:
    """First ``y`` with zero mass when ``phi < 0``; ``None`` for full support.

    A bound too large to represent (``phi`` a tiny negative) counts as full
    support.
    """
    if p.phi >= 0:
        return None
    bound = -p.mu / p.phi
    return math.ceil(bound) if math.isfinite(bound) else None


def gp_log_pmf(p: GenPoissonParams, y):
    y = np.asarray(y, dtype=float)
    rate = p.mu + y * p.phi
    m = gp_truncation_index(p)
    alive = rate > 0 if m is None else (y < m) & (rate > 0)
    safe_rate = np.where(alive, rate, 1.0)
    out = math.log(p.mu) + (y - 1.0) * np.log(safe_rate) - safe_rate - gammaln(y + 1.0)
    return np.where(alive, out, -np.inf)


def gp_pmf(p: GenPoissonParams, y):
    out = np.exp(gp_log_pmf(p, y))
    return float(out) if np.ndim(out) == 0 else out


def gp_moments(p: GenPoissonParams) -> tuple[float, float, float]:
    """Mean, variance and third raw moment of the GP law (closed forms).

    The third moment is assembled from the third cumulant
    ``mu (1 + 2 phi) / (1 - phi)^5``. For ``phi < 0`` these are the nominal
    moments of the untruncated formulas.
    """
    mu, q = p.mu, 1.0 - p.phi
    mean = mu / q
    var = mu / q**3
    kappa3 = mu * (1.0 + 2.0 * p.phi) / q**5
    third = kappa3 + 3.0 * mean * var + mean**3
    return mean, var, third


def gp_third_moment_bracket(p: GenPoissonParams) -> float:
    """``mu/(1-phi)^3 [mu^2 (1-phi)^2 + 3 mu (1-phi) - 2 (1-phi) + 3]``.

    This bracket expression is sometimes quoted as the third raw moment; it
    only agrees with the mass function at ``phi = 0`` and is kept for
    comparison.
    """
    mu, q = p.mu, 1.0 - p.phi
    return mu / q**3 * (mu * mu * q * q + 3.0 * mu * q - 2.0 * q + 3.0)


def gp_pgf(p: GenPoissonParams, s: float, tol: float = 1e-14, max_iter: int = 1_000_000) -> float:
    """Probability generating function for ``0 < phi < 1``.

    Solves ``u = s exp(phi (u - 1))`` by fixed-point iteration from ``u = 0``;
    the iterates increase monotonically to the smaller root.
    """
    if not 0 < p.phi < 1:
        raise DomainError("GP pgf is only defined here for 0 < phi < 1")
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s must lie in [0, 1], got {s}")
    u = 0.0
    for _ in range(max_iter):
        nxt = s * math.exp(p.phi * (u - 1.0))
        if abs(nxt - u) <= tol:
            u = nxt
            break
        u = nxt
    else:
        raise ConvergenceError("GP pgf fixed point did not converge")
    return math.exp(p.mu * (u - 1.0))


# ---------------------------------------------------------------------------
# Family dispatch
# ---------------------------------------------------------------------------


def log_pmf(spec: InnovationSpec, y, mode: NormalizationMode = APPROX_NORMALIZER):
    """Log mass of ``spec`` at ``y`` (scalar or array)."""
    if isinstance(spec, PoissonParams):
        y = np.asarray(y, dtype=float)
        return y * math.log(spec.mu) - spec.mu - gammaln(y + 1.0)
    if isinstance(spec, DoublePoissonParams):
        return dp_log_pmf(spec, y, mode)
    if isinstance(spec, GenPoissonParams):
        return gp_log_pmf(spec, y)
    raise TypeError(f"unknown innovation spec {spec!r}")


def pmf(spec: InnovationSpec, y, mode: NormalizationMode = APPROX_NORMALIZER):
    out = np.exp(log_pmf(spec, y, mode))
    return float(out) if np.ndim(out) == 0 else out


def _tail_cutoff(log_f, start: float, tol: float, limit: int = 5_000_000) -> int:
    """Smallest ``n`` such that the mass beyond ``n`` is certified below ``tol``.

    Past the mode the successive-term ratio ``r`` of these log-concave laws is
    decreasing, so the tail after ``y`` is at most ``f(y) r / (1 - r)``.
    """
    n = max(int(start), 16)
    while True:
        lf = np.asarray(log_f(np.arange(n + 2)), dtype=float)
        total = logsumexp(lf[:-1])
        last, nxt = lf[-2], lf[-1]
        if nxt == -np.inf:
            return n
        log_r = nxt - last
        if log_r < 0 and lf[-2] < lf.max():
            log_bound = nxt - math.log1p(-math.exp(log_r))
            if log_bound - total < math.log(tol):
                return n
        if n >= limit:
            raise ConvergenceError("tail cutoff search exceeded its limit")
        n *= 2


def support_cutoff(spec: InnovationSpec, tol: float = 1e-14) -> int:
    """Upper index beyond which the innovation mass is below ``tol``.

    For truncated GP this is the last point of the support.
    """
    if isinstance(spec, GenPoissonParams):
        m = gp_truncation_index(spec)
        if m is not None and m <= 10_000:
            return max(m - 1, 0)
    return _cutoff_cached(spec, tol)


@lru_cache(maxsize=4096)
def _cutoff_cached(spec: InnovationSpec, tol: float) -> int:
    mean, var = _nominal_mean_var(spec)
    return _tail_cutoff(lambda y: log_pmf(spec, y, exact_sum()), mean + 10.0 * math.sqrt(var), tol)


def _nominal_mean_var(spec: InnovationSpec) -> tuple[float, float]:
    if isinstance(spec, PoissonParams):
        return spec.mu, spec.mu
    if isinstance(spec, DoublePoissonParams):
        return dp_moments(spec)
    mean, var, _ = gp_moments(spec)
    return mean, var


def mass_deficiency(spec: InnovationSpec, mode: NormalizationMode = APPROX_NORMALIZER) -> float:
    """``1 - sum(pmf)`` over the certified support; nonzero for truncated GP."""
    n = support_cutoff(spec)
    return 1.0 - float(np.exp(logsumexp(log_pmf(spec, np.arange(n + 1), mode))))


def _numeric_raw_moments(spec: InnovationSpec, mode: NormalizationMode = None):
    mode = mode or exact_sum()
    y = np.arange(support_cutoff(spec, 1e-16) + 1, dtype=float)
    w = np.exp(log_pmf(spec, y, mode))
    return float(w @ y), float(w @ y**2), float(w @ y**3)


def innovation_moments(spec: InnovationSpec, numeric: bool = False) -> tuple[float, float, float]:
    """First three raw moments ``E(e), E(e^2), E(e^3)``.

    Poisson and GP use closed forms; DP (or ``numeric=True``) sums the
    exactly normalized mass function.
    """
    if numeric or isinstance(spec, DoublePoissonParams):
        return _numeric_raw_moments(spec)
    if isinstance(spec, PoissonParams):
        m = spec.mu
        return m, m + m * m, m**3 + 3 * m * m + m
    mean, var, third = gp_moments(spec)
    return mean, var + mean * mean, third


def innovation_fisher_index(spec: InnovationSpec) -> float:
    if isinstance(spec, PoissonParams):
        return 1.0
    if isinstance(spec, DoublePoissonParams):
        return 1.0 / spec.phi
    if isinstance(spec, GenPoissonParams):
        return 1.0 / (1.0 - spec.phi) ** 2
    raise TypeError(f"unknown innovation spec {spec!r}")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _cumulative_table(spec: InnovationSpec) -> np.ndarray:
    # DP uses the exact normalization; truncated GP is rescaled to its support.
    if isinstance(spec, PoissonParams):
        n = _cutoff_cached(spec, 1e-13)
    else:
        n = support_cutoff(spec, 1e-13)
    w = np.exp(log_pmf(spec, np.arange(n + 1), exact_sum()))
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    cdf.setflags(write=False)
    return cdf


def sample_innovations(spec: InnovationSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` i.i.d. draws by inverse-CDF lookup on a cached cumulative table."""
    if isinstance(spec, PoissonParams):
        return rng.poisson(spec.mu, size=size).astype(np.int64)
    cdf = _cumulative_table(spec)
    u = rng.random(size)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def sample_innovation(spec: InnovationSpec, rng: np.random.Generator) -> int:
    return int(sample_innovations(spec, 1, rng)[0])
