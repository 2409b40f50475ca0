"""Acceptance criteria, one pass/fail line each.

Run under pytest (the lines are echoed in the terminal summary) or directly
with ``python3 tests/test_acceptance.py``.  Seeds were fixed before any
result was seen and are not tuned.
"""
import itertools
import json
import math
import tempfile
from datetime import date
from pathlib import Path

import numpy as np
import pytest
from scipy import special, stats

from eqnumbers.cli import main as cli_main
from eqnumbers.dist import NbdParams, PoissonParams, nbd_pmf, poisson_pmf
from eqnumbers.errors import DegenerateSeriesError, UnderdispersedError
from eqnumbers.estimate import chi2_pvalue, fit_nbd_moments, lr_test
from eqnumbers.ntest import confidence_band
from eqnumbers.simulate import SimConfig, run_replication_study

RESULTS = {}  # criterion id -> (passed, headline, detail lines)

SIM_SEED = 2016
NULL_SEED = 500
COVERAGE_SEED = 12345
LR_SIGN_SEED = 77

# ---------------------------------------------------------------------------
# reference table values, transcribed as printed (strings keep the precision)

# Table 1: label, mean, variance ("sigma" column), theta, tau, 2*dl, chi2
TABLE1 = [
    ("NW 77-15", "36.62", "151.47", "0.242", "11.67", "43.95", "3.37e-11"),
    ("NW 77-10", "35.53", "80.779", "0.440", "27.90", "8.594", "0.0034"),
    ("SW 77-15", "60.54", "106.15", "0.570", "80.36", "2.694", "0.1007"),
    ("GL 77-15", "177.18", "737.33", "0.240", "56.04", "16.36", "5.23e-05"),
    ("PDE 69-14", "1280.6", "88191", "0.0145", "18.87", "485.5", "0"),
    ("PDE 69-03", "1147.0", "16208", "0.0708", "87.35", "29.50", "5.59e-08"),
]

# Tables 2 and 3: row, lambda, variance, theta, tau, eta_n, psi_n, eta_p, psi_p
# (Table 2 row 1 has no NBD parameters and is left out)
TABLE2 = """
2 34.36 54.33 0.632 59.1 0.293 0.120 0.171 0.029
3 111.8 348.0 0.321 52.9 0.280 0.116 0.095 0.009
4 177.2 742.5 0.239 55.5 0.271 0.109 0.075 0.006
5 1382 17096 0.081 121 0.182 0.049 0.027 0.001
6 691.0 6857 0.101 77.4 0.228 0.078 0.038 0.002
7 345.5 2106 0.164 67.8 0.244 0.089 0.054 0.003
8 177.2 742.5 0.239 55.5 0.271 0.109 0.075 0.006
9 138.2 567.0 0.244 44.5 0.303 0.137 0.085 0.007
10 69.10 229.3 0.301 29.8 0.372 0.206 0.120 0.015
11 34.55 91.33 0.378 21.0 0.449 0.296 0.170 0.029
12 13.82 30.26 0.457 11.6 0.614 0.550 0.269 0.072
13 6.910 13.29 0.520 7.48 0.781 0.877 0.380 0.145
14 0.970 1.34 0.723 2.53 1.524 3.113 1.015 1.031
15 0.485 0.62 0.788 1.80 1.961 4.956 1.436 2.061
"""
TABLE3 = """
1 12.17 14.10 0.863 76.9 0.351 0.149 0.287 0.0821
2 35.54 58.12 0.612 56.0 0.298 0.124 0.168 0.0281
3 104.9 526.6 0.199 26.1 0.394 0.232 0.098 0.0095
4 362.0 6369 0.057 21.8 0.428 0.275 0.053 0.0028
5 1281 88191 0.015 18.9 0.460 0.318 0.028 0.0008
6 11781 387e4 0.003 35.9 0.334 0.167 0.009 0.0001
7 5891 121e4 0.005 28.6 0.374 0.210 0.013 0.0002
8 2945 400e3 0.007 21.8 0.428 0.275 0.018 0.0003
9 1281 88191 0.015 18.9 0.460 0.318 0.028 0.0008
10 1178 88856 0.013 15.8 0.503 0.379 0.029 0.0009
11 589.1 27994 0.021 12.7 0.562 0.474 0.041 0.0017
12 294.5 8559 0.034 10.5 0.617 0.572 0.058 0.0034
13 117.8 2339 0.050 6.25 0.800 0.960 0.092 0.0085
14 58.91 942.4 0.063 3.92 1.010 1.529 0.130 0.0170
15 7.013 48.92 0.143 1.17 1.852 5.133 0.378 0.1426
16 3.506 17.94 0.196 0.85 2.180 7.100 0.534 0.2852
"""


def _rows(block, table):
    return [(f"T{table}#{f[0]}", *f[1:]) for f in (ln.split() for ln in block.strip().splitlines())]


TABLE_ROWS = _rows(TABLE2, 2) + _rows(TABLE3, 3)


def last_digit_unit(text):
    """Value of one unit in the last printed digit of ``text``."""
    mant, _, exp = text.lower().partition("e")
    decimals = len(mant.split(".")[1]) if "." in mant else 0
    return 10.0 ** (int(exp or 0) - decimals)


def units_off(value, printed):
    return abs(value - float(printed)) / last_digit_unit(printed)


def rounding_range(func, printed_inputs):
    """Range of ``func`` over the box of inputs that round to the printed ones.

    Every function used here is monotone in each argument, so the corners
    of the box bound it.
    """
    boxes = [(float(s) - last_digit_unit(s) / 2, float(s) + last_digit_unit(s) / 2)
             for s in printed_inputs]
    values = [func(*corner) for corner in itertools.product(*boxes)]
    return min(values), max(values)


def consistent_with_rounding(func, printed_inputs, printed_output):
    lo, hi = rounding_range(func, printed_inputs)
    half = last_digit_unit(printed_output) / 2
    return lo - half <= float(printed_output) <= hi + half, (lo, hi)


def record(cid, passed, headline, details=()):
    RESULTS[cid] = (passed, headline, list(details))
    return passed


def criterion_lines(cid):
    passed, headline, details = RESULTS[cid]
    return ([f"[{'PASS' if passed else 'FAIL'}] {cid}: {headline}"]
            + [f"       {d}" for d in details])


def summary_lines():
    out = []
    for cid in sorted(RESULTS, key=lambda c: int(c[1:])):
        out.extend(criterion_lines(cid))
    return out


# ---------------------------------------------------------------------------
# C1: chi-square p-values from the 2*dl column

def check_c1():
    details, ok = [], True
    for label, *_, stat, printed in TABLE1:
        p = chi2_pvalue(float(stat))
        u = units_off(p, printed)
        good = u <= 2
        ok &= good
        details.append(f"{label}: x={stat} -> p={p:.4e} vs {printed} ({u:.2f} units)")
    return record("C1", ok, "chi2_pvalue reproduces the chi2 column within 2 last-digit units",
                  details)


# ---------------------------------------------------------------------------
# C2: moment estimates of theta and tau from (mean, variance)

def _moment_inputs():
    for label, mean, var, theta, tau, *_ in TABLE1:
        yield f"T1 {label}", mean, var, theta, tau
    for label, mean, var, theta, tau, *_ in TABLE_ROWS:
        yield label, mean, var, theta, tau


def check_c2():
    details, failures, n = [], 0, 0
    named = {"T1 SW 77-15", "T3#14", "T1 PDE 69-14"}
    named_ok = True
    for label, mean, var, theta, tau in _moment_inputs():
        n += 1
        p = fit_nbd_moments(float(mean), float(var))
        u_theta, u_tau = units_off(p.theta, theta), units_off(p.tau, tau)
        good = max(u_theta, u_tau) <= 1
        if label in named:
            named_ok &= good
            details.append(f"{label}: ({mean}, {var}) -> theta {p.theta:.5g}, tau {p.tau:.5g} "
                           f"vs ({theta}, {tau})  {'ok' if good else 'MISS'}")
        if not good:
            failures += 1
            c_theta, _ = consistent_with_rounding(lambda m, v: m / v, (mean, var), theta)
            c_tau, (lo, hi) = consistent_with_rounding(
                lambda m, v: m * m / (v - m), (mean, var), tau)
            details.append(
                f"{label}: ({mean}, {var}) -> theta {p.theta:.5g} ({u_theta:.2f}u), "
                f"tau {p.tau:.5g} ({u_tau:.2f}u) vs ({theta}, {tau}); printed tau "
                f"{'inside' if c_tau else 'OUTSIDE'} the input-rounding range "
                f"[{lo:.4g}, {hi:.4g}], theta {'inside' if c_theta else 'OUTSIDE'}")
    ok = failures == 0
    head = (f"moment fits reproduce theta, tau within 1 last-digit unit: "
            f"{n - failures}/{n} rows (named examples {'all pass' if named_ok else 'MISS'})")
    return record("C2", ok, head, details)


# ---------------------------------------------------------------------------
# C3: closed-form NBD / Poisson skewness and excess kurtosis

def _eta_n(theta, tau):
    return (2 - theta) / math.sqrt(tau * (1 - theta))


def _psi_n(theta, tau):
    return 6 / tau + theta ** 2 / (tau * (1 - theta))


def check_c3():
    details, passed_rows, tables = [], [], set()
    required = {"T3#14", "T2#15"}
    for label, lam, var, theta, tau, eta_n, psi_n, eta_p, psi_p in TABLE_ROWS:
        nm = NbdParams(float(theta), float(tau)).moments()
        pm = PoissonParams(float(lam)).moments()
        units = [units_off(nm.skewness, eta_n), units_off(nm.kurtosis, psi_n),
                 units_off(pm.skewness, eta_p), units_off(pm.kurtosis, psi_p)]
        good = max(units) <= 2
        if good:
            passed_rows.append(label)
            tables.add(label[:2])
        if label in required or not good:
            c_eta, _ = consistent_with_rounding(_eta_n, (theta, tau), eta_n)
            c_psi, (lo, hi) = consistent_with_rounding(_psi_n, (theta, tau), psi_n)
            # the same row from the unrounded (lambda, variance) route
            alt = fit_nbd_moments(float(lam), float(var)).moments()
            details.append(
                f"{label}: (theta={theta}, tau={tau}, lam={lam}) -> eta_n {nm.skewness:.4f}, "
                f"psi_n {nm.kurtosis:.4f}, eta_p {pm.skewness:.4f}, psi_p {pm.kurtosis:.4f} "
                f"vs ({eta_n}, {psi_n}, {eta_p}, {psi_p}); units "
                + ", ".join(f"{u:.2f}" for u in units)
                + f"; printed psi_n {'inside' if c_psi else 'OUTSIDE'} the theta/tau rounding "
                f"range [{lo:.4f}, {hi:.4f}], eta_n {'inside' if c_eta else 'OUTSIDE'}; "
                f"via (lam, variance): eta_n {alt.skewness:.4f}, psi_n {alt.kurtosis:.4f}")
    ok = (len(passed_rows) >= 10 and tables == {"T2", "T3"}
          and required <= set(passed_rows))
    head = (f"moment formulas within 2 last-digit units: {len(passed_rows)}/{len(TABLE_ROWS)} "
            f"rows; required rows T3#14, T2#15: "
            + ", ".join(f"{r} {'ok' if r in passed_rows else 'MISS'}" for r in sorted(required)))
    return record("C3", ok, head, details)


# ---------------------------------------------------------------------------
# C4 / C5: simulation studies

def _study_check(cid, cfg, targets, rho_range, name):
    rep = run_replication_study(cfg)
    details, ok = [], True
    for field, (mean, sd) in targets.items():
        got = rep.summary[field]["mean"]
        good = abs(got - mean) <= 3 * sd
        ok &= good
        details.append(f"{field}: {got:.4g} +- {rep.summary[field]['std']:.3g} vs "
                       f"{mean} +- {sd} ({abs(got - mean) / sd:.2f} sd) {'ok' if good else 'MISS'}")
    rho_ok = rho_range[0] <= rep.rho <= rho_range[1]
    ok &= rho_ok
    details.append(f"rho(eta_s, psi_s) = {rep.rho:.4f} in [{rho_range[0]}, {rho_range[1]}] "
                   f"{'ok' if rho_ok else 'MISS'}; underdispersed replications: "
                   f"{rep.n_underdispersed}")
    return record(cid, ok, f"{name} (seed {cfg.seed}, R={cfg.replications})", details)


def check_c4():
    cfg = SimConfig(0.063, 4, 1000, replications=100, seed=SIM_SEED)
    targets = {"theta": (0.064, 0.003), "tau": (4.06, 0.21),
               "eta_s": (1.012, 0.126), "psi_s": (1.48, 0.627)}
    return _study_check("C4", cfg, targets, (0.85, 0.96),
                        "study A theta=0.063 tau=4 N=1000 within 3 quoted sd")


def check_c5():
    cfg = SimConfig(0.015, 19, 46, replications=100, seed=SIM_SEED)
    targets = {"lam": (1252.9, 46.7), "tau": (20.18, 4.50),
               "eta_s": (0.45, 0.43), "psi_s": (0.24, 1.32)}
    return _study_check("C5", cfg, targets, (0.65, 0.90),
                        "study B theta=0.015 tau=19 N=46 within 3 quoted sd")


# ---------------------------------------------------------------------------
# C6: property suites

GRID = [PoissonParams(lam) for lam in (0.5, 10.0, 200.0)] + [
    NbdParams(theta, tau) for theta in (0.05, 0.3, 0.7) for tau in (0.5, 2.0, 20.0)]


def _c6_normalisation():
    bad, lines = [], []
    for p in GRID:
        kmax = int(p.mean + 20 * math.sqrt(p.variance))
        total = math.fsum(p.pmf(np.arange(kmax + 1)))
        if total < 1 - 1e-10:
            # exact remaining tail, independent of the pmf code
            tail = special.betainc(kmax + 1.0, p.tau, 1 - p.theta)
            bad.append(p)
            lines.append(f"  {p!r}: sum to mean+20sd = {total:.12f}; exact tail beyond "
                         f"= {tail:.3e}; sum + tail - 1 = {total + tail - 1:.1e}")
    return not bad, f"normalisation >= 1-1e-10 on {len(GRID) - len(bad)}/{len(GRID)} grid points", lines


def _tv(theta, lam=5.0):
    k = np.arange(0, 200)
    return 0.5 * np.abs(nbd_pmf(k, NbdParams(theta, lam / (1 - theta)))
                        - poisson_pmf(k, PoissonParams(lam))).sum()


def _c6_tv():
    tv = [_tv(t) for t in (0.9, 0.99, 0.999)]
    return tv[0] > tv[1] > tv[2], "TV(NBD, Poisson) " + " > ".join(f"{t:.2e}" for t in tv), []


def _c6_moments():
    worst = 0.0
    for p in GRID:
        kmax = int(p.mean + 10 * math.sqrt(p.variance)) + 10
        while p.sf(kmax) > 1e-14:
            kmax *= 2
        k = np.arange(kmax + 1, dtype=float)
        w = p.pmf(k)
        mean = np.dot(k, w)
        m2, m3, m4 = (np.dot((k - mean) ** j, w) for j in (2, 3, 4))
        th = p.moments()
        for got, want in ((mean, th.mean), (m2, th.variance), (m3 / m2 ** 1.5, th.skewness),
                          (m4 / m2 ** 2 - 3, th.kurtosis)):
            worst = max(worst, abs(got - want) / abs(want))
    return worst <= 1e-6, f"summed vs closed-form moments, worst rel err {worst:.1e}", []


def _c6_lr_sign():
    rng = np.random.default_rng(LR_SIGN_SEED)
    low, tried = math.inf, 0
    for _ in range(300):
        n = int(rng.integers(2, 80))
        k = rng.negative_binomial(float(rng.uniform(0.2, 50)), float(rng.uniform(0.05, 0.95)),
                                  size=n) if rng.random() < 0.5 else rng.poisson(
            float(rng.uniform(0.5, 100)), size=n)
        try:
            low = min(low, lr_test(k).statistic)
            tried += 1
        except (UnderdispersedError, DegenerateSeriesError):
            pass
    return low >= -1e-9, f"LR statistic min {low:.2e} over {tried} fitted series", []


def _c6_null():
    rejected = 0
    for s in np.random.SeedSequence(NULL_SEED).spawn(500):
        k = np.random.default_rng(s).poisson(10.0, size=500)
        try:
            rejected += lr_test(k).reject
        except UnderdispersedError:
            pass
    rate = rejected / 500
    return 0.02 <= rate <= 0.08, f"null rejection rate at 5%: {rate:.3f} (band 0.02-0.08)", []


def _c6_coverage():
    rng = np.random.default_rng(COVERAGE_SEED)
    lines, ok = [], True
    refs = [(PoissonParams(60.54), lambda n: rng.poisson(60.54, n)),
            (NbdParams(0.570, 80.36), lambda n: rng.negative_binomial(80.36, 0.570, n))]
    for ref, draw in refs:
        band = confidence_band(ref, 0.95)
        x = draw(10_000)
        frac = float(np.mean((x >= band.lower) & (x <= band.upper)))
        edge = 2 * max(ref.pmf(band.lower), ref.pmf(band.upper))
        good = 0.95 <= frac <= 0.95 + edge
        ok &= good
        lines.append(f"  {ref!r}: band [{band.lower}, {band.upper}], inside {frac:.4f}, "
                     f"allowed [0.95, {0.95 + edge:.4f}] {'ok' if good else 'MISS'}")
    return ok, "band coverage over 1e4 draws", lines


def check_c6():
    parts = [_c6_normalisation(), _c6_tv(), _c6_moments(), _c6_lr_sign(), _c6_null(),
             _c6_coverage()]
    details = []
    for ok, text, lines in parts:
        details.append(f"{'ok  ' if ok else 'MISS'} {text}")
        details.extend(lines)
    n_ok = sum(p[0] for p in parts)
    return record("C6", n_ok == len(parts), f"property suites: {n_ok}/{len(parts)} hold", details)


# ---------------------------------------------------------------------------
# C7: synthetic end-to-end substitute for the raw-catalog columns

DATA = Path(__file__).parent / "data"


def check_c7():
    counts = np.loadtxt(DATA / "synthetic_counts.csv", delimiter=",", skiprows=1,
                        dtype=int)[:, 1]
    with tempfile.TemporaryDirectory() as out:
        code = cli_main(["report", "--input", str(DATA / "synthetic_catalog.csv.gz"),
                         "--mt", "5.8", "--start", "1977-01-01", "--end", "2016-01-01",
                         "--intervals", str(counts.size), "--format", "json", "--out", out])
        row = json.loads((Path(out) / "report.json").read_text())["rows"][0] if code == 0 else {}
    lam, var = counts.mean(), counts.var(ddof=1)
    theta, tau = lam / var, lam * lam / (var - lam)
    expected = {"n": counts.sum(), "N": counts.size, "lam": lam, "variance": var,
                "theta": theta, "tau": tau, "eta_o": stats.skew(counts),
                "psi_o": stats.kurtosis(counts), "eta_n": _eta_n(theta, tau),
                "psi_n": _psi_n(theta, tau), "eta_p": lam ** -0.5, "psi_p": 1 / lam,
                "dT": (date(2016, 1, 1) - date(1977, 1, 1)).days / counts.size}
    bad = [k for k, v in expected.items()
           if k not in row or not math.isclose(row[k], v, rel_tol=1e-5)]
    details = ["raw-catalog columns (n, lam, variance, eta_o, psi_o) of the reference "
               "tables and the four out-of-band annual counts need the real catalogs; "
               "not reproduced here",
               f"synthetic catalog: {counts.sum()} events >= m5.8 in {counts.size} intervals, "
               f"exit code {code}, fields off: {bad or 'none'}"]
    return record("C7", code == 0 and not bad,
                  "golden end-to-end report on the bundled synthetic catalog", details)


CHECKS = [check_c1, check_c2, check_c3, check_c4, check_c5, check_c6, check_c7]


@pytest.mark.parametrize("check", CHECKS, ids=[f"C{i}" for i in range(1, 8)])
def test_acceptance(check):
    passed = check()
    text = "\n".join(criterion_lines(check.__name__[-2:].upper()))
    print(text)
    assert passed, text


if __name__ == "__main__":
    for check in CHECKS:
        check()
    print("\n".join(summary_lines()))
