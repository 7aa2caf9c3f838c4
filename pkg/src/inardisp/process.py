"""
INAR(1) process: binomial thinning, path simulation, transition kernel and
stationary moments.

    X_t = alpha o X_{t-1} + e_t,    0 <= alpha < 1

where ``alpha o x`` is a Binomial(x, alpha) draw and the innovations ``e_t``
are i.i.d. Poisson, DP or GP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from . import innovations as inn
from .errors import DegenerateSeriesError, DomainError
from .innovations import (
    APPROX_NORMALIZER,
    DoublePoissonParams,
    GenPoissonParams,
    InnovationSpec,
    NormalizationMode,
    PoissonParams,
)

DEFAULT_BURN_IN = 500


@dataclass(frozen=True)
class Inar1Model:
    """Thinning probability plus innovation law.

    ``normalization`` only matters for DP innovations and selects how the
    kernel normalizes the DP mass function.
    """

    alpha: float
    innovations: InnovationSpec
    normalization: NormalizationMode = field(default=APPROX_NORMALIZER, compare=True)

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")

    @property
    def family(self) -> str:
        return self.innovations.family


@dataclass(frozen=True)
class StationaryMoments:
    mean: float
    variance: float
    fisher_index: float
    acf_lag1: float


class CountSeries(Sequence[int]):
    """Immutable sequence of nonnegative integer counts."""

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.asarray(values)
        if arr.ndim != 1:
            raise ValueError("a count series must be one-dimensional")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValueError("count series must contain integers")
        arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise ValueError("count series must be nonnegative")
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __len__(self):
        return self._values.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CountSeries(self._values[i])
        return int(self._values[i])

    def __eq__(self, other):
        if isinstance(other, CountSeries):
            return np.array_equal(self._values, other._values)
        return NotImplemented

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self):
        return f"CountSeries(T={len(self)}, head={self._values[:8].tolist()})"


def as_series(series) -> CountSeries:
    return series if isinstance(series, CountSeries) else CountSeries(series)


def binomial_thinning(alpha: float, x: int, rng: np.random.Generator) -> int:
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"thinning probability must lie in [0, 1], got {alpha}")
    if x < 0:
        raise DomainError("cannot thin a negative count")
    return int(rng.binomial(x, alpha)) if x else 0


def simulate(
    model: Inar1Model,
    length: int,
    burn_in: int = DEFAULT_BURN_IN,
    rng: np.random.Generator | int | None = None,
) -> CountSeries:
    """Simulate ``length`` observations after discarding ``burn_in`` steps.

    The first value is an innovation draw; all innovations are drawn up front
    and only the thinning runs step by step.
    """
    if length < 2:
        raise ValueError("length must be at least 2")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = burn_in + length
    eps = inn.sample_innovations(model.innovations, n, rng)
    out = np.empty(n, dtype=np.int64)
    alpha = model.alpha
    binom = rng.binomial
    x = int(eps[0])
    out[0] = x
    for t in range(1, n):
        x = (binom(x, alpha) if x else 0) + int(eps[t])
        out[t] = x
    return CountSeries(out[burn_in:])


# ---------------------------------------------------------------------------
# Transition kernel
# ---------------------------------------------------------------------------


def innovation_log_pmf(model: Inar1Model, y) -> np.ndarray:
    return inn.log_pmf(model.innovations, y, model.normalization)


def _log_binom_pmf(l, i, alpha):
    return (
        gammaln(l + 1.0)
        - gammaln(i + 1.0)
        - gammaln(l - i + 1.0)
        + xlogy(i, alpha)
        + xlog1py(l - i, -alpha)
    )


def log_transition_probs(model: Inar1Model, prev, curr) -> np.ndarray:
    """Vectorized ``log Pr(X_t = curr | X_{t-1} = prev)``.

    Sums Binomial(prev, alpha) survivors against the innovation mass in
    log-space over ``i = 0..min(prev, curr)``.
    """
    prev = np.atleast_1d(np.asarray(prev, dtype=np.int64))
    curr = np.atleast_1d(np.asarray(curr, dtype=np.int64))
    prev, curr = np.broadcast_arrays(prev, curr)
    if prev.size == 0:
        return np.empty(0)
    top = np.minimum(prev, curr)
    i = np.arange(int(top.max()) + 1)
    log_eps = innovation_log_pmf(model, np.arange(int(curr.max()) + 1))
    l = prev[..., None].astype(float)
    ii = i.astype(float)
    valid = i <= top[..., None]
    terms = _log_binom_pmf(l, np.minimum(ii, l), model.alpha)
    terms = terms + log_eps[np.clip(curr[..., None] - i, 0, None)]
    terms = np.where(valid, terms, -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(terms, axis=-1)


def transition_prob(model: Inar1Model, l: int, k: int) -> float:
    if l < 0 or k < 0:
        raise DomainError("states must be nonnegative")
    return float(np.exp(log_transition_probs(model, l, k)[0]))


def kernel_cutoff(model: Inar1Model, l: int, tol: float = 1e-14) -> int:
    """Largest ``k`` needed so the row mass beyond it is below ``tol``."""
    return int(l) + inn.support_cutoff(model.innovations, tol)


def transition_row(model: Inar1Model, l: int, tol: float = 1e-14) -> np.ndarray:
    """``Pr(X_t = k | X_{t-1} = l)`` for ``k = 0..kernel_cutoff``."""
    k = np.arange(kernel_cutoff(model, l, tol) + 1)
    return np.exp(log_transition_probs(model, np.full_like(k, l), k))


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


def _innovation_mean_var(spec: InnovationSpec) -> tuple[float, float]:
    if isinstance(spec, PoissonParams):
        return spec.mu, spec.mu
    if isinstance(spec, DoublePoissonParams):
        return spec.mu, spec.mu / spec.phi
    mean, var, _ = inn.gp_moments(spec)
    return mean, var


def conditional_moments(model: Inar1Model, x_prev: int, exact: bool = False) -> tuple[float, float]:
    """``E(X_t | X_{t-1})`` and ``Var(X_t | X_{t-1})``.

    DP uses the nominal ``(mu, mu/phi)`` innovation moments unless ``exact``
    is set, in which case the moments of the exactly normalized law are used.
    """
    a = model.alpha
    if exact and isinstance(model.innovations, DoublePoissonParams):
        mean_e, var_e = inn.dp_moments(model.innovations, inn.exact_sum())
    else:
        mean_e, var_e = _innovation_mean_var(model.innovations)
    return a * x_prev + mean_e, a * (1.0 - a) * x_prev + var_e


def stationary_moments(model: Inar1Model) -> StationaryMoments:
    a = model.alpha
    spec = model.innovations
    if isinstance(spec, PoissonParams):
        mean = spec.mu / (1 - a)
        var = mean
        fi = 1.0
    elif isinstance(spec, DoublePoissonParams):
        mu, phi = spec.mu, spec.phi
        mean = mu / (1 - a)
        var = mu * (1 + a * phi) / (phi * (1 - a * a))
        fi = (1 + a * phi) / (phi + a * phi)
    else:
        mu, q = spec.mu, 1.0 - spec.phi
        mean = mu / ((1 - a) * q)
        var = mu * (1 + a * q * q) / ((1 - a * a) * q**3)
        fi = (1 + a * q * q) / ((1 + a) * q * q)
    return StationaryMoments(mean=mean, variance=var, fisher_index=fi, acf_lag1=a)


def stationary_third_moment(model: Inar1Model, numeric: bool = False) -> float:
    """``E(X_t^3)`` under stationarity.

    Uses ``E[(a o X)^3 | X] = a^3 X^3 + 3a^2(1-a) X^2 + a(1-a)(1-2a) X`` and
    independence of the innovation, then solves the linear fixed point for the
    third moment. ``numeric=True`` takes innovation moments from the summed
    mass function for every family.
    """
    a = model.alpha
    e1, e2, e3 = inn.innovation_moments(model.innovations, numeric=numeric)
    var_e = e2 - e1 * e1
    m1 = e1 / (1 - a)
    m2 = (a * e1 + var_e) / (1 - a * a) + m1 * m1
    rest = (
        3 * a * a * (1 - a) * m2
        + a * (1 - a) * (1 - 2 * a) * m1
        + 3 * (a * (1 - a) * m1 + a * a * m2) * e1
        + 3 * a * m1 * e2
        + e3
    )
    return rest / (1 - a**3)


def dispersion_table(family: str, alphas, phis) -> np.ndarray:
    """Stationary Fisher indexes, rows indexed by ``phis`` and columns by
    ``alphas``."""
    family = family.lower()
    out = np.empty((len(phis), len(alphas)))
    for r, phi in enumerate(phis):
        for c, a in enumerate(alphas):
            if family == "dp":
                spec = DoublePoissonParams(1.0, phi)
            elif family == "gp":
                spec = GenPoissonParams(1.0, phi)
            else:
                raise DomainError(f"dispersion tables exist for dp and gp, not {family!r}")
            out[r, c] = stationary_moments(Inar1Model(a, spec)).fisher_index
    return out


def model_from_params(family: str, alpha: float, mu: float, phi: float | None = None,
                      normalization: NormalizationMode = APPROX_NORMALIZER) -> Inar1Model:
    family = family.lower()
    if family == "poisson":
        spec = PoissonParams(mu)
    elif family == "dp":
        spec = DoublePoissonParams(mu, phi)
    elif family == "gp":
        spec = GenPoissonParams(mu, phi)
    else:
        raise DomainError(f"unknown family {family!r}")
    return Inar1Model(alpha, spec, normalization)


def require_length(series: CountSeries, minimum: int) -> None:
    if len(series) < minimum:
        raise DegenerateSeriesError(f"series needs at least {minimum} observations, got {len(series)}")
