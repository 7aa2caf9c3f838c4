"""
Monte Carlo harness: bias/MSE studies of the YW, CLS and CML estimators and
sampling-distribution checks of the CLS asymptotic covariances.

Replicate ``r`` at sample size ``T`` always draws from the stream seeded by
``(master_seed, T, r)``, so results do not depend on the replicate count,
on the order of execution, or on the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InarError
from .estimation import (
    asymptotic_cov_dp,
    asymptotic_cov_gp,
    cls_alpha_mu,
    cls_fit_dp,
    cls_fit_gp,
    cml_fit,
    yw_fit_dp,
    yw_fit_gp,
)
from .innovations import APPROX_NORMALIZER, exact_sum
from .process import DEFAULT_BURN_IN, model_from_params, simulate

DEFAULT_SEED = 20180101

# parameters each method reports, per family (GP CLS borrows mu from YW)
METHOD_PARAMS = {
    "dp": {"cls": ("alpha", "mu", "phi"), "yw": ("alpha", "mu", "phi"), "cml": ("alpha", "mu", "phi")},
    "gp": {"cls": ("alpha", "phi"), "yw": ("alpha", "mu", "phi"), "cml": ("alpha", "mu", "phi")},
}


@dataclass(frozen=True)
class McConfig:
    family: str
    true_alpha: float
    true_mu: float
    true_phi: float
    sample_sizes: tuple = (100, 200, 400, 800)
    replicates: int = 1000
    methods: tuple = ("cls", "yw", "cml")
    master_seed: int = DEFAULT_SEED
    burn_in: int = DEFAULT_BURN_IN
    # fit DP CML with the exactly normalized pmf, the law the data come from
    exact_likelihood: bool = True

    def __post_init__(self):
        object.__setattr__(self, "family", self.family.lower())
        object.__setattr__(self, "sample_sizes", tuple(int(t) for t in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(m.lower() for m in self.methods))
        if self.family not in METHOD_PARAMS:
            raise ValueError(f"Monte Carlo studies cover dp and gp, not {self.family!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.sample_sizes or min(self.sample_sizes) < 3:
            raise ValueError("sample_sizes must be nonempty and each >= 3")
        unknown = set(self.methods) - {"cls", "yw", "cml"}
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        self.model()  # validates the parameters

    def model(self):
        return model_from_params(self.family, self.true_alpha, self.true_mu, self.true_phi)

    @property
    def truth(self) -> dict:
        return {"alpha": self.true_alpha, "mu": self.true_mu, "phi": self.true_phi}

    @classmethod
    def from_dict(cls, d: dict) -> "McConfig":
        return cls(**d)


@dataclass
class McCell:
    bias: float
    mse: float
    n_ok: int
    n_failed: int
    bias_se: float


@dataclass
class McResult:
    config: McConfig
    # cells[(method, param, T)]
    cells: dict = field(default_factory=dict)

    def cell(self, method: str, param: str, T: int) -> McCell:
        return self.cells[(method, param, T)]

    def rows(self):
        for (method, param, T), c in sorted(self.cells.items(), key=lambda kv: (kv[0][2], kv[0][1], kv[0][0])):
            yield {"T": T, "parameter": param, "method": method, **asdict(c)}


def replicate_rng(master_seed: int, T: int, r: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), int(T), int(r)])


def _fit_one(method: str, family: str, series, exact_likelihood: bool = True):
    if method == "yw":
        return yw_fit_dp(series) if family == "dp" else yw_fit_gp(series)
    if method == "cls":
        return cls_fit_dp(series) if family == "dp" else cls_fit_gp(series)
    norm = exact_sum() if exact_likelihood and family == "dp" else APPROX_NORMALIZER
    res = cml_fit(series, family, normalization=norm)
    if not res.converged:
        raise InarError("CML did not converge")
    return res


def _run_replicate(args) -> tuple:
    config, T, r = args
    series = simulate(config.model(), T, config.burn_in, replicate_rng(config.master_seed, T, r))
    out = {}
    for method in config.methods:
        try:
            fit = _fit_one(method, config.family, series, config.exact_likelihood)
        except (InarError, ArithmeticError, ValueError):
            out[method] = None
            continue
        vals = [getattr(fit, p) for p in METHOD_PARAMS[config.family][method]]
        out[method] = None if not all(v is not None and math.isfinite(v) for v in vals) else vals
    return T, r, out


def replicate_estimates(config: McConfig, workers: int = 1) -> dict:
    """Raw per-replicate estimates: ``{(method, T): array (replicates, n_params)}``
    with NaN rows for failed replicates."""
    jobs = [(config, T, r) for T in config.sample_sizes for r in range(config.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replicate, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_run_replicate(j) for j in jobs]
    results.sort(key=lambda x: (x[0], x[1]))
    est = {}
    for method in config.methods:
        k = len(METHOD_PARAMS[config.family][method])
        for T in config.sample_sizes:
            est[(method, T)] = np.full((config.replicates, k), np.nan)
    for T, r, out in results:
        for method, vals in out.items():
            if vals is not None:
                est[(method, T)][r] = vals
    return est


def summarize(config: McConfig, estimates: dict) -> McResult:
    result = McResult(config)
    truth = config.truth
    for (method, T), arr in estimates.items():
        ok = ~np.isnan(arr).any(axis=1)
        n_ok = int(ok.sum())
        for j, param in enumerate(METHOD_PARAMS[config.family][method]):
            err = arr[ok, j] - truth[param]
            if n_ok:
                bias = float(np.mean(err))
                mse = float(np.mean(err**2))
                se = float(np.std(err, ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else math.nan
            else:
                bias = mse = se = math.nan
            result.cells[(method, param, T)] = McCell(bias, mse, n_ok, config.replicates - n_ok, se)
    return result


def run_mc_study(config: McConfig, workers: int = 1) -> McResult:
    """Empirical bias and MSE of every configured estimator.

    Failed replicates (estimator error, non-convergence) are excluded from the
    moments and counted in ``n_failed``.
    """
    return summarize(config, replicate_estimates(config, workers))


# ---------------------------------------------------------------------------
# Covariance checks
# ---------------------------------------------------------------------------


@dataclass
class CovCheck:
    family: str
    params: dict
    T: int
    replicates: int
    labels: tuple
    empirical: np.ndarray
    analytic: np.ndarray
    rel_diff: np.ndarray
    n_failed: int = 0

    @property
    def max_rel_diff(self) -> float:
        return float(np.nanmax(self.rel_diff))


def _cov_replicate(args):
    family, params, T, seed, r, burn_in = args
    model = model_from_params(family, params["alpha"], params["mu"], params.get("phi"))
    series = simulate(model, T, burn_in, replicate_rng(seed, T, r))
    try:
        if family == "dp":
            return cls_alpha_mu(series)
        fit = cls_fit_gp(series, mu_known=params["mu"])
        return fit.alpha, fit.phi
    except (InarError, ArithmeticError):
        return None


def run_cov_check(
    family: str,
    params: dict,
    T: int = 5000,
    replicates: int = 2000,
    seed: int = DEFAULT_SEED,
    *,
    analytic=None,
    burn_in: int = DEFAULT_BURN_IN,
    workers: int = 1,
) -> CovCheck:
    """Empirical covariance of ``sqrt(T) (estimate - truth)`` for the CLS
    estimators next to the analytic limit.

    DP checks ``(alpha, mu)``; GP checks ``(alpha, phi)`` with the innovation
    ``mu`` treated as known, the setting of the GP limit theorem.
    """
    family = family.lower()
    if analytic is None:
        if family == "dp":
            analytic = asymptotic_cov_dp(params["alpha"], params["mu"], params["phi"])
        elif family == "gp":
            analytic = asymptotic_cov_gp(params["alpha"], params["mu"], params["phi"])
        else:
            raise ValueError("covariance checks cover dp and gp")
    labels = analytic.labels
    truth = np.array([params[n] for n in labels])
    jobs = [(family, dict(params), T, seed, r, burn_in) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_cov_replicate, jobs, chunksize=max(1, replicates // (8 * workers))))
    else:
        raw = [_cov_replicate(j) for j in jobs]
    good = np.array([x for x in raw if x is not None], dtype=float).reshape(-1, 2)
    scaled = math.sqrt(T) * (good - truth)
    emp = np.cov(scaled, rowvar=False) if len(scaled) > 1 else np.full((2, 2), np.nan)
    ana = np.asarray(analytic.matrix)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(emp - ana) / np.abs(ana)
    return CovCheck(family, dict(params), T, replicates, labels, emp, ana, rel, replicates - len(good))
