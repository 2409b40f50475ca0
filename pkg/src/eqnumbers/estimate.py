"""Sample moments, Poisson/NBD parameter estimation and the likelihood-ratio test.

Conventions
-----------
* sample variance uses the ``N - 1`` divisor;
* skewness and excess kurtosis are the plain moment ratios
  ``g1 = m3 / m2**1.5`` and ``g2 = m4 / m2**2 - 3`` with ``m_j`` the
  ``1/N`` central moments (no small-sample correction);
* log-likelihoods are natural-log totals over all intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .catalog import CountSeries
from .dist import NbdParams, PoissonParams, normal_sf
from .errors import (ConvergenceError, DegenerateSeriesError, DomainError,
                     UnderdispersedError)

MOMENT_ESTIMATORS = {
    "variance": "unbiased, N-1 divisor",
    "skewness": "g1 = m3/m2^1.5, 1/N central moments",
    "kurtosis": "g2 = m4/m2^2 - 3, 1/N central moments",
}

# profile-likelihood search over tau
TAU_MIN = 1e-6
TAU_MAX = 1e8
TAU_GRID_POINTS = 33
TAU_XTOL = 1e-10  # on log(tau), i.e. relative on tau
MAX_ITER = 500


def as_counts(series):
    if isinstance(series, CountSeries):
        return series.as_array()
    arr = np.asarray(series)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("count series must be a non-empty 1-d sequence")
    if np.any(arr < 0) or np.any(arr != np.floor(arr)):
        raise DomainError("counts must be non-negative integers")
    return arr.astype(np.int64)


@dataclass(frozen=True)
class MomentSummary:
    n_intervals: int
    mean: float
    variance: float | None
    skewness: float | None
    kurtosis: float | None
    estimators: dict = field(default_factory=lambda: dict(MOMENT_ESTIMATORS),
                             compare=False)

    @property
    def std(self):
        return None if self.variance is None else math.sqrt(self.variance)


def sample_moments(series) -> MomentSummary:
    k = as_counts(series).astype(float)
    n = k.size
    mean = k.mean()
    if n < 2:
        return MomentSummary(n, float(mean), None, None, None)
    dev = k - mean
    m2 = np.mean(dev ** 2)
    variance = m2 * n / (n - 1)
    skew = kurt = None
    if m2 > 0:
        if n >= 3:
            skew = float(np.mean(dev ** 3) / m2 ** 1.5)
        if n >= 4:
            kurt = float(np.mean(dev ** 4) / m2 ** 2 - 3.0)
    return MomentSummary(n, float(mean), float(variance), skew, kurt)


@dataclass(frozen=True)
class FitResult:
    params: PoissonParams | NbdParams
    log_likelihood: float
    method: str  # "moments" or "mle"
    diagnostics: dict = field(default_factory=dict, compare=False)


def poisson_log_likelihood(series, params: PoissonParams):
    k = as_counts(series)
    return float(np.sum(params.logpmf(k)))


def _exceedance_counts(k):
    """c[j] = #{i : k_i > j} for j = 0 .. max(k) - 1."""
    freq = np.bincount(k)
    return k.size - np.cumsum(freq)[:-1]


def nbd_log_likelihood(series, params: NbdParams):
    """Total NBD log-likelihood.

    ``sum_i log Gamma(tau + k_i) / Gamma(tau)`` is evaluated as
    ``sum_j c_j log(tau + j)`` which stays exact for very large tau.
    """
    k = as_counts(series)
    n_ev = float(k.sum())
    theta, tau = params.theta, params.tau
    c = _exceedance_counts(k)
    j = np.arange(c.size, dtype=float)
    rising = n_ev * math.log(tau) + float(np.dot(c, np.log1p(j / tau)))
    return (rising + k.size * tau * math.log(theta) + n_ev * math.log1p(-theta)
            - float(np.sum(special.gammaln(k + 1.0))))


def fit_poisson(series) -> FitResult:
    k = as_counts(series)
    lam = float(k.mean())
    if lam <= 0:
        raise DegenerateSeriesError("all counts are zero; Poisson rate would be 0")
    params = PoissonParams(lam)
    return FitResult(params, poisson_log_likelihood(k, params), "mle")


def fit_nbd_moments(mean, variance) -> NbdParams:
    """Moment estimates theta = mean/variance, tau = mean^2/(variance - mean)."""
    mean, variance = float(mean), float(variance)
    if not mean > 0:
        raise DegenerateSeriesError(f"mean must be positive, got {mean}")
    if not variance > mean:
        raise UnderdispersedError(mean, variance)
    return NbdParams(mean / variance, mean * mean / (variance - mean))


def fit_nbd_moments_series(series) -> FitResult:
    k = as_counts(series)
    summary = sample_moments(k)
    if summary.variance is None:
        raise DegenerateSeriesError("need at least two intervals")
    params = fit_nbd_moments(summary.mean, summary.variance)
    return FitResult(params, nbd_log_likelihood(k, params), "moments")


class _ProfileGain:
    """Profile log-likelihood gain of the NBD over the Poisson MLE.

    With theta profiled out as tau / (tau + mean) the gain is::

        sum_j c_j log1p(j/tau) - N (tau + mean) log1p(mean/tau) + N mean

    which tends to 0 as tau -> infinity (the Poisson limit) without
    catastrophic cancellation.
    """

    def __init__(self, k):
        self.n = k.size
        self.mean = float(k.mean())
        c = _exceedance_counts(k).astype(float)
        j = np.arange(c.size, dtype=float)
        keep = c > 0
        self.c, self.j = c[keep], j[keep]

    def __call__(self, tau):
        m = self.mean
        return (float(np.dot(self.c, np.log1p(self.j / tau)))
                - self.n * (tau + m) * math.log1p(m / tau) + self.n * m)


def _maximise_profile(k):
    gain = _ProfileGain(k)
    grid = np.linspace(math.log(TAU_MIN), math.log(TAU_MAX), TAU_GRID_POINTS)
    values = np.array([gain(math.exp(x)) for x in grid])
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda x: -gain(math.exp(x)), bounds=(lo, hi),
                                   method="bounded",
                                   options={"xatol": TAU_XTOL, "maxiter": MAX_ITER})
    diagnostics = {"grid_argmax_tau": float(math.exp(grid[i])),
                   "bracket_tau": (float(math.exp(lo)), float(math.exp(hi))),
                   "iterations": int(res.nfev), "converged": bool(res.success)}
    if not res.success:
        raise ConvergenceError(f"profile likelihood search failed: {res.message}",
                               diagnostics)
    x = float(res.x)
    # the bounded search never evaluates the bracket ends themselves
    if values[i] > -res.fun:
        x = float(grid[i])
    return math.exp(x), gain(math.exp(x)), gain.mean, diagnostics


def fit_nbd_mle(series) -> FitResult:
    """Maximum-likelihood NBD fit via the profile likelihood in tau.

    Raises :class:`UnderdispersedError` when the sample is not overdispersed
    or when no finite tau improves on the Poisson likelihood (the profile
    is maximised in the tau -> infinity limit).
    """
    k = as_counts(series)
    if k.size < 2:
        raise DegenerateSeriesError("need at least two intervals")
    summary = sample_moments(k)
    if not summary.mean > 0:
        raise DegenerateSeriesError("all counts are zero")
    if not summary.variance > summary.mean:
        raise UnderdispersedError(summary.mean, summary.variance)
    tau, gain, mean, diagnostics = _maximise_profile(k)
    # no finite tau beats the Poisson fit: the supremum is the tau -> inf limit
    if gain <= 0.0 or tau >= TAU_MAX * (1.0 - 1e-6):
        raise UnderdispersedError(summary.mean, summary.variance)
    if tau <= TAU_MIN * (1.0 + 1e-6):
        raise ConvergenceError("likelihood maximised at the lower tau bound",
                               diagnostics)
    params = NbdParams.from_mean(mean, tau)
    ell0 = poisson_log_likelihood(k, PoissonParams(mean))
    diagnostics["gain_over_poisson"] = gain
    return FitResult(params, ell0 + gain, "mle", diagnostics)


def chi2_pvalue(x):
    """Upper tail of chi-square with one degree of freedom: 2 (1 - Phi(sqrt x))."""
    x = float(x)
    if not x >= 0:
        raise DomainError(f"chi-square statistic must be >= 0, got {x}")
    return float(2.0 * normal_sf(math.sqrt(x)))


@dataclass(frozen=True)
class LrTestResult:
    ell_nbd: float
    ell_poisson: float
    statistic: float
    p_value: float
    level: float = 0.95
    nbd: NbdParams | None = None
    poisson: PoissonParams | None = None

    @property
    def reject(self):
        """True when the Poisson model is rejected in favour of the NBD."""
        return self.p_value < 1.0 - self.level


def likelihood_ratio(ell_nbd, ell_poisson, level=0.95) -> LrTestResult:
    """LR test from two already-computed log-likelihoods."""
    stat = 2.0 * (ell_nbd - ell_poisson)
    return LrTestResult(ell_nbd, ell_poisson, stat, chi2_pvalue(max(stat, 0.0)), level)


def lr_test(series, level=0.95) -> LrTestResult:
    """Test Poisson against NBD on a count series, both fitted by maximum likelihood."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    pois = fit_poisson(series)
    nbd = fit_nbd_mle(series)
    stat = 2.0 * nbd.diagnostics["gain_over_poisson"]
    return LrTestResult(nbd.log_likelihood, pois.log_likelihood, stat,
                        chi2_pvalue(max(stat, 0.0)), level, nbd.params, pois.params)
