"""Command-line interface: catalog -> counts -> fits -> tests -> report files.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import gzip
import itertools
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .catalog import (CatalogFilter, Region, catalog_counts,
                      parse_time, read_catalog)
from .dist import NbdParams, PoissonParams
from .errors import (CatalogFormatError, CatalogRowError, ConvergenceError,
                     DegenerateSeriesError, DomainError, UnderdispersedError)
from .estimate import (fit_nbd_mle, fit_nbd_moments_series, fit_poisson,
                       lr_test, sample_moments)
from .ntest import confidence_band, empirical_distribution, number_test, smooth
from .report import (TABLE_COLUMNS, make_table_row, metadata_block,
                     read_counts_file, render_json, render_table, write_text)
from .simulate import SimConfig, run_replication_study

log = logging.getLogger("eqnumbers")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
EXTENSIONS = {"tsv": "tsv", "csv": "csv", "json": "json"}


class ConfigError(ValueError):
    pass


# --- argument parsing ----------------------------------------------------------

def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eqnumbers",
        description="Poisson / negative-binomial analysis of earthquake count series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    io_opts = argparse.ArgumentParser(add_help=False)
    io_opts.add_argument("--out", default=".", help="output directory")
    io_opts.add_argument("--format", choices=sorted(EXTENSIONS), default="tsv")
    io_opts.add_argument("-v", "--verbose", action="store_true")

    inp = argparse.ArgumentParser(add_help=False)
    inp.add_argument("--input", required=True,
                     help="canonical catalog CSV (.gz ok) or counts CSV")
    inp.add_argument("--strict", action="store_true",
                     help="abort on the first malformed catalog row")

    cat = argparse.ArgumentParser(add_help=False)
    cat.add_argument("--mt", type=_float_list, default=None,
                     help="magnitude threshold(s), comma separated")
    cat.add_argument("--start", help="window start (ISO-8601, inclusive)")
    cat.add_argument("--end", help="window end (ISO-8601, exclusive)")
    cat.add_argument("--region", help="lat_min,lat_max,lon_min,lon_max")
    cat.add_argument("--intervals", type=_int_list, default=None,
                     help="number of equal time intervals N (comma list for report)")

    level = argparse.ArgumentParser(add_help=False)
    level.add_argument("--level", type=float, default=0.95)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("counts", parents=[io_opts, inp, cat],
                   help="bin a catalog into interval counts")
    sub.add_parser("moments", parents=[io_opts, inp, cat],
                   help="sample mean, variance, skewness, kurtosis")
    sub.add_parser("fit", parents=[io_opts, inp, cat],
                   help="Poisson and NBD fits (moments and maximum likelihood)")
    sub.add_parser("lrtest", parents=[io_opts, inp, cat, level],
                   help="likelihood-ratio test of Poisson against NBD")
    sub.add_parser("report", parents=[io_opts, inp, cat],
                   help="summary table rows for (m_t, N) subdivisions")
    bands = sub.add_parser("bands", parents=[io_opts, inp, cat, level],
                           help="confidence bands and per-interval verdicts")
    bands.add_argument("--dist", default="poisson,nbd,empirical",
                       help="reference laws, comma separated")
    bands.add_argument("--smooth", default=None,
                       help="smooth the empirical reference: 'auto' or a bandwidth")
    sim = sub.add_parser("simulate", parents=[io_opts],
                         help="NBD simulation and parameter-recovery study")
    sim.add_argument("--theta", type=float, required=True)
    sim.add_argument("--tau", type=float, required=True)
    sim.add_argument("--intervals", type=int, required=True)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--method", choices=["moments", "mle"], default="moments")
    sim.add_argument("--workers", type=int, default=1)
    return parser


def validate(args):
    """Check option combinations before touching any input."""
    if getattr(args, "intervals", None) is not None and args.command != "simulate":
        if not args.intervals:
            raise ConfigError("--intervals is empty")
        if any(n < 1 for n in args.intervals):
            raise ConfigError("--intervals must be >= 1")
        if len(args.intervals) > 1 and args.command != "report":
            raise ConfigError("several --intervals values are only allowed for 'report'")
    if getattr(args, "mt", None) is not None:
        if not args.mt:
            raise ConfigError("--mt is empty")
        if len(args.mt) > 1 and args.command != "report":
            raise ConfigError("several --mt values are only allowed for 'report'")
    if hasattr(args, "start"):
        window = [args.start, args.end, args.intervals]
        if any(v is not None for v in window[:2]) and not all(v is not None for v in window):
            raise ConfigError("--start, --end and --intervals must be given together")
        if args.command == "counts" and not all(v is not None for v in window):
            raise ConfigError("counts needs --start, --end and --intervals")
        if args.start is not None:
            try:
                args.start_time, args.end_time = parse_time(args.start), parse_time(args.end)
            except ValueError as exc:
                raise ConfigError(f"bad time: {exc}")
            if not args.start_time < args.end_time:
                raise ConfigError("--start must precede --end")
        if args.region is not None:
            try:
                args.region_box = Region.from_string(args.region)
            except ValueError as exc:
                raise ConfigError(f"bad --region: {exc}")
        else:
            args.region_box = None
    if hasattr(args, "level") and not 0.0 < args.level < 1.0:
        raise ConfigError("--level must lie in (0, 1)")
    if args.command == "bands":
        refs = [d.strip() for d in args.dist.split(",") if d.strip()]
        bad = set(refs) - {"poisson", "nbd", "empirical"}
        if not refs or bad:
            raise ConfigError(f"unknown --dist entries: {sorted(bad) or args.dist!r}")
        args.refs = refs
        if args.smooth not in (None, "auto"):
            try:
                h = float(args.smooth)
            except ValueError:
                raise ConfigError("--smooth must be 'auto' or a positive number")
            if not h > 0:
                raise ConfigError("--smooth bandwidth must be positive")
    if args.command == "simulate":
        if not 0.0 < args.theta < 1.0:
            raise ConfigError("--theta must lie in (0, 1)")
        if args.tau != int(args.tau) or args.tau < 1:
            raise ConfigError("--tau must be an integer >= 1 for simulation")
        if args.intervals < 1 or args.reps < 1 or args.workers < 1:
            raise ConfigError("--intervals, --reps and --workers must be >= 1")


def run_config(args):
    """The reproducibility record embedded in every output file."""
    skip = {"out", "verbose", "start_time", "end_time", "region_box", "refs"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if cfg.get("input"):
        cfg["input"] = Path(cfg["input"]).name
    return cfg


# --- input ---------------------------------------------------------------------

def _is_counts_file(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            return line.strip().startswith("interval_index")
    return False


def load_catalog(args):
    parsed = read_catalog(args.input, strict=args.strict)
    for err in parsed.errors:
        log.warning("%s: skipped %s", args.input, err)
    return parsed


def load_series(args):
    """Count series from a counts file, or from a catalog with the window options."""
    if _is_counts_file(args.input):
        return [(None, read_counts_file(args.input))]
    if args.start is None:
        raise ConfigError("catalog input needs --start, --end and --intervals")
    events = load_catalog(args).events
    thresholds = args.mt if args.mt is not None else [-math.inf]
    out = []
    for mt, n in itertools.product(thresholds, args.intervals):
        f = CatalogFilter(mt, args.start_time, args.end_time, args.region_box)
        series = catalog_counts(events, f, n, catalog_id=Path(args.input).name)
        out.append((None if math.isinf(mt) else mt, series))
    return out


def single_series(args):
    return load_series(args)[0][1]


# --- commands ------------------------------------------------------------------

def _out(args, stem, ext=None):
    return Path(args.out) / f"{stem}.{ext or EXTENSIONS[args.format]}"


def cmd_counts(args, meta):
    series = single_series(args)
    meta = dict(meta, series={"n_events": series.n_events,
                              "n_intervals": series.n_intervals,
                              "interval_days": series.interval_days,
                              **series.metadata})
    rows = [{"interval_index": i, "count": c} for i, c in enumerate(series.counts)]
    p1 = write_text(_out(args, "counts", "csv"),
                    render_table(rows, ("interval_index", "count"), "csv", meta))
    p2 = write_text(_out(args, "counts.meta", "json"), json.dumps(meta, indent=2) + "\n")
    return [p1, p2]


def cmd_moments(args, meta):
    series = single_series(args)
    m = sample_moments(series)
    row = {"N": m.n_intervals, "n": series.n_events, "mean": m.mean,
           "variance": m.variance, "std": m.std, "skewness": m.skewness,
           "kurtosis": m.kurtosis}
    meta = dict(meta, estimators=m.estimators)
    return [write_text(_out(args, "moments"), render_table([row], list(row), args.format, meta))]


def cmd_fit(args, meta):
    series = single_series(args)
    mom = sample_moments(series)
    rows = []
    pois = fit_poisson(series)
    rows.append({"model": "poisson", "method": "mle", "lam": pois.params.lam,
                 "log_likelihood": pois.log_likelihood, "status": "ok"})
    for name, fitter in (("moments", fit_nbd_moments_series), ("mle", fit_nbd_mle)):
        row = {"model": "nbd", "method": name}
        try:
            res = fitter(series)
        except UnderdispersedError:
            row["status"] = "poisson-consistent"
        else:
            p = res.params
            row.update(theta=p.theta, tau=p.tau, lam=p.mean,
                       log_likelihood=res.log_likelihood, status="ok")
        rows.append(row)
    columns = ("model", "method", "lam", "theta", "tau", "log_likelihood", "status")
    meta = dict(meta, sample={"mean": mom.mean, "variance": mom.variance,
                              "N": mom.n_intervals})
    return [write_text(_out(args, "fit"), render_table(rows, columns, args.format, meta))]


def cmd_lrtest(args, meta):
    series = single_series(args)
    try:
        res = lr_test(series, level=args.level)
    except UnderdispersedError:
        # no NBD improves on the Poisson fit: report the fallback explicitly
        pois = fit_poisson(series)
        row = {"ell_nbd": None, "ell_poisson": pois.log_likelihood, "statistic": 0.0,
               "p_value": 1.0, "level": args.level, "reject": False,
               "lam": pois.params.lam, "theta": None, "tau": None,
               "poisson_consistent": True}
    else:
        row = {"ell_nbd": res.ell_nbd, "ell_poisson": res.ell_poisson,
               "statistic": res.statistic, "p_value": res.p_value, "level": res.level,
               "reject": res.reject, "lam": res.poisson.lam, "theta": res.nbd.theta,
               "tau": res.nbd.tau, "poisson_consistent": False}
    return [write_text(_out(args, "lrtest"), render_table([row], list(row), args.format, meta))]


def cmd_report(args, meta):
    rows = [make_table_row(series, mt).to_dict() for mt, series in load_series(args)]
    return [write_text(_out(args, "report"),
                       render_table(rows, TABLE_COLUMNS, args.format, meta))]


def _references(series, args):
    refs = {}
    mom = sample_moments(series)
    if "poisson" in args.refs:
        refs["poisson"] = PoissonParams(mom.mean)
    if "nbd" in args.refs:
        try:
            refs["nbd"] = fit_nbd_moments_series(series).params
        except UnderdispersedError:
            log.warning("series is not overdispersed; no NBD band")
    if "empirical" in args.refs:
        emp = empirical_distribution(series)
        if args.smooth is not None:
            emp = smooth(emp, args.smooth if args.smooth == "auto" else float(args.smooth))
        refs["empirical"] = emp
    return refs


def cmd_bands(args, meta):
    series = single_series(args)
    if series.n_events == 0:
        raise DegenerateSeriesError("series has no events")
    refs = _references(series, args)
    band_rows = []
    for name, ref in refs.items():
        band = confidence_band(ref, args.level)
        row = {"reference": name, "level": args.level, "lower": band.lower,
               "upper": band.upper, "mean": ref.mean}
        if isinstance(ref, NbdParams):
            row.update(theta=ref.theta, tau=ref.tau)
        elif isinstance(ref, PoissonParams):
            row.update(lam=ref.lam)
        else:
            row.update(bandwidth=ref.bandwidth)
        band_rows.append(row)
    verdict_rows = []
    for i, c in enumerate(series.counts):
        row = {"interval_index": i, "count": c}
        for name, ref in refs.items():
            t = number_test(c, ref, args.level)
            row[f"{name}_verdict"] = t.verdict
            row[f"{name}_tail"] = t.tail_probability
        verdict_rows.append(row)
    band_cols = ("reference", "level", "lower", "upper", "mean", "lam", "theta", "tau",
                 "bandwidth")
    verdict_cols = ["interval_index", "count"]
    for name in refs:
        verdict_cols += [f"{name}_verdict", f"{name}_tail"]
    return [
        write_text(_out(args, "bands"), render_table(band_rows, band_cols, args.format, meta)),
        write_text(_out(args, "verdicts"),
                   render_table(verdict_rows, verdict_cols, args.format, meta)),
    ]


def cmd_simulate(args, meta):
    cfg = SimConfig(args.theta, int(args.tau), args.intervals, args.reps, args.seed,
                    args.method)
    report = run_replication_study(cfg, workers=args.workers)
    p1 = write_text(_out(args, "simulate", "json"), render_json(report.to_dict(), meta))
    scatter = [{"eta_s": e, "psi_s": p} for e, p in report.scatter()]
    p2 = write_text(_out(args, "scatter", "csv"),
                    render_table(scatter, ("eta_s", "psi_s"), "csv", meta))
    return [p1, p2]


COMMANDS = {"counts": cmd_counts, "moments": cmd_moments, "fit": cmd_fit,
            "lrtest": cmd_lrtest, "report": cmd_report, "bands": cmd_bands,
            "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        validate(args)
        meta = metadata_block(run_config(args))
        paths = COMMANDS[args.command](args, meta)
    except ConfigError as exc:
        print(f"eqnumbers: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"eqnumbers: numerical failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, CatalogFormatError, CatalogRowError, DegenerateSeriesError,
            DomainError, UnderdispersedError, ValueError) as exc:
        print(f"eqnumbers: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
