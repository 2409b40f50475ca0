"""NBD count simulation and parameter-recovery replication studies.

Geometric variates are drawn by inversion,
``G = ceil(log R / log(1 - theta)) - 1`` with R uniform on (0, 1), and an
NBD variate with integer shape tau is the sum of tau geometric variates
(the Pascal construction).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dist import NbdParams, PoissonParams, normal_sf
from .errors import DegenerateSeriesError, DomainError, UnderdispersedError
from .estimate import fit_nbd_mle, fit_nbd_moments, sample_moments


def open_uniform(rng: np.random.Generator, size=None):
    """Uniform variates strictly inside (0, 1)."""
    u = rng.random(size)
    if np.ndim(u) == 0:
        while u == 0.0:
            u = rng.random()
        return u
    zero = u == 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    return u


def _check_theta(theta):
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")


def _check_tau(tau):
    if int(tau) != tau or tau < 1:
        raise DomainError(f"simulation needs an integer tau >= 1, got {tau}")
    return int(tau)


def draw_geometric(theta, rng: np.random.Generator, size=None):
    """Number of failures before the first success, P(0) = theta."""
    _check_theta(theta)
    u = open_uniform(rng, size)
    g = np.ceil(np.log(u) / math.log1p(-theta)) - 1.0
    g = np.maximum(g, 0.0).astype(np.int64)
    return int(g) if size is None else g


def draw_nbd(theta, tau, rng: np.random.Generator, size=None):
    """Sum of ``tau`` independent geometric variates."""
    tau = _check_tau(tau)
    shape = (tau,) if size is None else (*np.atleast_1d(size), tau)
    g = draw_geometric(theta, rng, size=shape)
    out = g.sum(axis=-1)
    return int(out) if size is None else out


@dataclass(frozen=True)
class SimConfig:
    theta: float
    tau: int
    n_intervals: int
    replications: int = 100
    seed: int = 0
    method: str = "moments"  # NBD estimator: "moments" or "mle"

    def __post_init__(self):
        _check_theta(self.theta)
        _check_tau(self.tau)
        if self.n_intervals < 1:
            raise DomainError("n_intervals must be >= 1")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.method not in ("moments", "mle"):
            raise DomainError(f"unknown estimation method {self.method!r}")


FIELDS = ("theta", "tau", "lam", "eta_s", "psi_s", "eta_n", "psi_n",
          "eta_p", "psi_p")


@dataclass
class ReplicationReport:
    config: SimConfig
    estimates: dict  # field name -> list of length R, None where unavailable
    summary: dict  # field name -> {"mean", "std", "n"}
    rho: float | None  # Pearson correlation of eta_s and psi_s
    n_underdispersed: int
    counts: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"config": asdict(self.config), "summary": self.summary,
                "rho": self.rho, "n_underdispersed": self.n_underdispersed,
                "estimates": self.estimates}

    def scatter(self):
        """(eta_s, psi_s) pairs for replications where both exist."""
        return [(e, p) for e, p in zip(self.estimates["eta_s"], self.estimates["psi_s"])
                if e is not None and p is not None]


def _one_replication(cfg: SimConfig, seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    counts = draw_nbd(cfg.theta, cfg.tau, rng, size=cfg.n_intervals)
    est = dict.fromkeys(FIELDS)
    summary = sample_moments(counts)
    est["lam"] = summary.mean
    est["eta_s"] = summary.skewness
    est["psi_s"] = summary.kurtosis
    if summary.mean > 0:
        pm = PoissonParams(summary.mean).moments()
        est["eta_p"], est["psi_p"] = pm.skewness, pm.kurtosis
    underdispersed = False
    try:
        if cfg.method == "mle":
            params = fit_nbd_mle(counts).params
        else:
            if summary.variance is None:
                raise UnderdispersedError(summary.mean, 0.0)
            params = fit_nbd_moments(summary.mean, summary.variance)
    except (UnderdispersedError, DegenerateSeriesError):
        underdispersed = True
    else:
        nm = params.moments()
        est.update(theta=params.theta, tau=params.tau,
                   eta_n=nm.skewness, psi_n=nm.kurtosis)
    return est, underdispersed, counts


def _summarise(values):
    x = np.array([v for v in values if v is not None], dtype=float)
    if x.size == 0:
        return {"mean": None, "std": None, "n": 0}
    std = float(x.std(ddof=1)) if x.size > 1 else None
    return {"mean": float(x.mean()), "std": std, "n": int(x.size)}


def run_replication_study(cfg: SimConfig, workers: int = 1,
                          keep_counts: bool = False) -> ReplicationReport:
    """Simulate ``R`` NBD series of length ``N`` and re-estimate everything.

    Replication ``r`` draws from its own substream ``SeedSequence(seed)
    .spawn(R)[r]``, so the report does not depend on ``workers``.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _one_replication(cfg, s), children))
    else:
        results = [_one_replication(cfg, s) for s in children]

    estimates = {name: [r[0][name] for r in results] for name in FIELDS}
    summary = {name: _summarise(vals) for name, vals in estimates.items()}
    pairs = [(e, p) for e, p in zip(estimates["eta_s"], estimates["psi_s"])
             if e is not None and p is not None]
    rho = None
    if len(pairs) > 2:
        a = np.array(pairs)
        if a[:, 0].std() > 0 and a[:, 1].std() > 0:
            rho = float(np.corrcoef(a[:, 0], a[:, 1])[0, 1])
    n_under = sum(1 for r in results if r[1])
    counts = [r[2].tolist() for r in results] if keep_counts else []
    return ReplicationReport(cfg, estimates, summary, rho, n_under, counts)


@dataclass(frozen=True)
class ZTest:
    z: float
    p_value: float  # two-sided, standard Gaussian


def z_statistic(value_sim, value_obs, sigma) -> ZTest:
    """(simulated - observed) / sigma with its two-sided Gaussian p-value."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    z = (value_sim - value_obs) / sigma
    return ZTest(z, float(2.0 * normal_sf(abs(z))))


def simulate_counts(params: NbdParams, n_intervals, seed=0):
    """One seeded NBD count series (integer tau only)."""
    rng = np.random.default_rng(seed)
    return draw_nbd(params.theta, params.tau, rng, size=n_intervals)
