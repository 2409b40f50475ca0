"""Poisson and negative binomial count laws.

The negative binomial (NBD) is parametrised by a success probability
``theta`` in (0, 1) and a real shape ``tau > 0``::

    f(k) = Gamma(tau + k) / (Gamma(tau) k!) * theta**tau * (1 - theta)**k

so that mean = tau (1 - theta) / theta and variance = mean / theta.  For
theta -> 1 with tau (1 - theta) -> lambda it tends to the Poisson law.

All probability functions work in log space; they accept scalars or
arrays of counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError


def normal_cdf(x):
    """Standard Gaussian CDF."""
    return special.ndtr(x)


def normal_sf(x):
    """Upper tail 1 - Phi(x), accurate far into the tail."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _as_counts(k):
    k = np.asarray(k)
    if np.any(k < 0):
        raise DomainError("counts must be non-negative")
    if k.dtype.kind == "f" and np.any(np.isfinite(k) & (k != np.floor(k))):
        raise DomainError("counts must be integers")
    return k


def _scalar(out, k):
    return float(out) if np.ndim(k) == 0 else out


@dataclass(frozen=True)
class TheoreticalMoments:
    mean: float
    variance: float
    skewness: float
    kurtosis: float  # excess kurtosis, 0 for a Gaussian


@dataclass(frozen=True)
class PoissonParams:
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"Poisson rate must be positive and finite, got {self.lam}")

    @property
    def mean(self):
        return self.lam

    @property
    def variance(self):
        return self.lam

    def logpmf(self, k):
        k = _as_counts(k)
        out = k * math.log(self.lam) - self.lam - special.gammaln(k + 1.0)
        return _scalar(out, k)

    def pmf(self, k):
        return _scalar(np.exp(self.logpmf(k)), k)

    def cdf(self, k):
        k = np.floor(np.asarray(k, dtype=float))
        out = np.where(k < 0, 0.0, special.pdtr(np.maximum(k, 0.0), self.lam))
        return _scalar(out, k)

    def sf(self, k):
        """P(X > k)."""
        k = np.floor(np.asarray(k, dtype=float))
        out = np.where(k < 0, 1.0, special.pdtrc(np.maximum(k, 0.0), self.lam))
        return _scalar(out, k)

    def quantile(self, q):
        return quantile(q, self)

    def moments(self):
        return TheoreticalMoments(self.lam, self.lam, 1.0 / math.sqrt(self.lam),
                                  1.0 / self.lam)


@dataclass(frozen=True)
class NbdParams:
    theta: float
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and 0.0 < self.theta < 1.0):
            raise DomainError(f"theta must lie in (0, 1), got {self.theta}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise DomainError(f"tau must be positive and finite, got {self.tau}")

    @classmethod
    def from_mean(cls, mean, tau):
        """NBD with the given mean and shape (theta = tau / (tau + mean))."""
        return cls(tau / (tau + mean), tau)

    @property
    def mean(self):
        return self.tau * (1.0 - self.theta) / self.theta

    @property
    def variance(self):
        return self.mean / self.theta

    def logpmf(self, k):
        k = _as_counts(k)
        tau, theta = self.tau, self.theta
        # log C(tau+k-1, k) = -log(tau+k) - log B(tau, k+1); betaln stays
        # accurate where gammaln(tau+k) - gammaln(tau) would cancel
        log_coef = -np.log(tau + k) - special.betaln(tau, k + 1.0)
        out = log_coef + tau * math.log(theta) + k * math.log1p(-theta)
        return _scalar(out, k)

    def pmf(self, k):
        return _scalar(np.exp(self.logpmf(k)), k)

    def cdf(self, k):
        k = np.floor(np.asarray(k, dtype=float))
        out = np.where(k < 0, 0.0,
                       special.betainc(self.tau, np.maximum(k, 0.0) + 1.0, self.theta))
        return _scalar(out, k)

    def sf(self, k):
        """P(X > k)."""
        k = np.floor(np.asarray(k, dtype=float))
        out = np.where(k < 0, 1.0,
                       special.betainc(np.maximum(k, 0.0) + 1.0, self.tau, 1.0 - self.theta))
        return _scalar(out, k)

    def quantile(self, q):
        return quantile(q, self)

    def moments(self):
        theta, tau = self.theta, self.tau
        spread = tau * (1.0 - theta)
        return TheoreticalMoments(
            mean=self.mean,
            variance=self.variance,
            skewness=(2.0 - theta) / math.sqrt(spread),
            kurtosis=6.0 / tau + theta ** 2 / spread,
        )


def poisson_pmf(k, p: PoissonParams):
    return p.pmf(k)


def nbd_pmf(k, p: NbdParams):
    return p.pmf(k)


def pmf(k, params):
    return params.pmf(k)


def cdf(k, params):
    """P(X <= k) under ``params``; ``k = inf`` gives 1."""
    if np.ndim(k) == 0 and math.isinf(k):
        return 1.0 if k > 0 else 0.0
    return params.cdf(k)


def theoretical_moments(params) -> TheoreticalMoments:
    """Mean, variance, skewness and excess kurtosis of a Poisson or NBD law."""
    return params.moments()


def quantile(q, params):
    """Smallest integer k with cdf(k) >= q, for 0 < q < 1.

    Works with any object exposing ``cdf`` and ``mean``/``variance``.
    """
    q = float(q)
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    if params.cdf(0) >= q:
        return 0
    # exponential search for an upper bracket, then integer bisection
    sd = math.sqrt(params.variance)
    hi = max(1, int(params.mean + 10.0 * sd))
    while params.cdf(hi) < q:
        hi *= 2
    lo = 0  # invariant: cdf(lo) < q <= cdf(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if params.cdf(mid) >= q:
            hi = mid
        else:
            lo = mid
    return hi
