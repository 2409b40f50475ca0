"""Number-test support: empirical count distributions, smoothing, bands, verdicts."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .dist import NbdParams, PoissonParams, quantile
from .errors import DomainError
from .estimate import as_counts

# kernel support is cut at this many bandwidths; exp(-50) ~ 2e-22
KERNEL_CUTOFF = 10.0
MIN_BANDWIDTH = 0.5


@dataclass(frozen=True)
class EmpiricalDist:
    support: tuple
    probabilities: tuple
    n_samples: int
    bandwidth: float | None = None

    def __post_init__(self):
        support = tuple(int(k) for k in self.support)
        probs = tuple(float(p) for p in self.probabilities)
        if len(support) != len(probs) or not support:
            raise ValueError("support and probabilities must be non-empty and aligned")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValueError("support must be strictly increasing")
        if support[0] < 0:
            raise ValueError("support must be non-negative")
        if any(p < 0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probabilities", probs)

    @property
    def smoothed(self):
        return self.bandwidth is not None

    @property
    def mean(self):
        return math.fsum(k * p for k, p in zip(self.support, self.probabilities))

    @property
    def variance(self):
        m = self.mean
        return math.fsum((k - m) ** 2 * p for k, p in zip(self.support, self.probabilities))

    def pmf(self, k):
        lookup = dict(zip(self.support, self.probabilities))
        if np.ndim(k) == 0:
            return lookup.get(int(k), 0.0)
        return np.array([lookup.get(int(x), 0.0) for x in np.ravel(k)]).reshape(np.shape(k))

    def cdf(self, k):
        cum = np.cumsum(self.probabilities)
        cum[-1] = 1.0
        idx = np.searchsorted(self.support, np.floor(np.asarray(k, dtype=float)),
                              side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(k) == 0 else out

    def sf(self, k):
        return 1.0 - self.cdf(k)

    def quantile(self, q):
        q = float(q)
        if not 0.0 < q < 1.0:
            raise DomainError(f"quantile level must lie in (0, 1), got {q}")
        cum = np.cumsum(self.probabilities)
        cum[-1] = 1.0
        return self.support[int(np.searchsorted(cum, q, side="left"))]

    def to_rows(self):
        return list(zip(self.support, self.probabilities))

    def to_dict(self):
        return {"support": list(self.support), "probabilities": list(self.probabilities),
                "n_samples": self.n_samples, "smoothed": self.smoothed,
                "bandwidth": self.bandwidth}


def empirical_distribution(series) -> EmpiricalDist:
    k = as_counts(series)
    freq = Counter(k.tolist())
    support = sorted(freq)
    return EmpiricalDist(tuple(support), tuple(freq[s] / k.size for s in support), int(k.size))


def auto_bandwidth(dist: EmpiricalDist):
    """Silverman's rule, 1.06 s N^(-1/5), with s the sample standard deviation."""
    n = dist.n_samples
    s = math.sqrt(dist.variance * n / (n - 1)) if n > 1 else 0.0
    return 1.06 * s * n ** -0.2


def smooth(dist: EmpiricalDist, bandwidth="auto", min_bandwidth=MIN_BANDWIDTH) -> EmpiricalDist:
    """Discrete Gaussian kernel smoothing over the non-negative integers.

    Mass that the kernel would put below zero is dropped and the result
    renormalised.  The bandwidth actually used (after the ``min_bandwidth``
    floor) is recorded on the returned distribution.
    """
    if dist.smoothed:
        raise ValueError("distribution is already smoothed")
    if bandwidth == "auto":
        h = auto_bandwidth(dist)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    h = max(h, min_bandwidth)
    if not h > 0:
        raise DomainError("bandwidth collapsed to zero; set a positive floor")

    reach = int(math.ceil(KERNEL_CUTOFF * h))
    src_k = np.asarray(dist.support, dtype=float)
    src_p = np.asarray(dist.probabilities)
    grid = np.arange(max(0, dist.support[0] - reach), dist.support[-1] + reach + 1)
    weights = np.exp(-0.5 * ((grid[:, None] - src_k[None, :]) / h) ** 2)
    mass = weights @ src_p
    keep = mass > 0
    grid, mass = grid[keep], mass[keep]
    mass = mass / mass.sum()
    return EmpiricalDist(tuple(grid.tolist()), tuple(mass.tolist()), dist.n_samples, h)


def reference_name(reference):
    if isinstance(reference, PoissonParams):
        return "poisson"
    if isinstance(reference, NbdParams):
        return "nbd"
    if isinstance(reference, EmpiricalDist):
        return "empirical"
    raise TypeError(f"unsupported reference {type(reference).__name__}")


@dataclass(frozen=True)
class Band:
    lower: int
    upper: int
    level: float
    reference: str

    def __contains__(self, k):
        return self.lower <= k <= self.upper


def _check_level(level):
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")


def confidence_band(reference, level=0.95) -> Band:
    """Equal-tail band [quantile((1-L)/2), quantile(1-(1-L)/2)]."""
    _check_level(level)
    alpha = (1.0 - level) / 2.0
    name = reference_name(reference)
    return Band(int(quantile(alpha, reference)), int(quantile(1.0 - alpha, reference)),
                level, name)


@dataclass(frozen=True)
class NumberTestResult:
    observed: int
    verdict: str  # "consistent", "too-few" or "too-many"
    tail_probability: float
    band: Band


def number_test(observed, reference, level=0.95) -> NumberTestResult:
    """Compare one observed count with the reference band (endpoints inclusive)."""
    observed = int(observed)
    if observed < 0:
        raise DomainError("observed count must be non-negative")
    band = confidence_band(reference, level)
    if observed < band.lower:
        verdict = "too-few"
    elif observed > band.upper:
        verdict = "too-many"
    else:
        verdict = "consistent"
    tail = min(float(reference.cdf(observed)), float(reference.sf(observed - 1)))
    return NumberTestResult(observed, verdict, tail, band)
