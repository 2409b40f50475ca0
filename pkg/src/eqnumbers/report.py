"""Table rows summarising a count series, and the on-disk output formats."""
from __future__ import annotations

import csv
import gzip
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .catalog import CountSeries
from .dist import PoissonParams
from .errors import UnderdispersedError
from .estimate import fit_nbd_moments, sample_moments

TOOL = "eqnumbers"
MISSING = "-"
SIG_DIGITS = 6

TABLE_COLUMNS = ("m_t", "n", "N", "lam", "variance", "theta", "tau", "eta_o",
                 "psi_o", "eta_n", "psi_n", "eta_p", "psi_p", "dT")


@dataclass(frozen=True)
class TableRow:
    """One line of the per-subdivision summary table.

    ``None`` marks a quantity that does not exist for the series (e.g. the
    NBD columns of an under-dispersed series).
    """
    m_t: float | None
    n: int
    N: int
    lam: float
    variance: float | None
    theta: float | None
    tau: float | None
    eta_o: float | None
    psi_o: float | None
    eta_n: float | None
    psi_n: float | None
    eta_p: float | None
    psi_p: float | None
    dT: float

    def to_dict(self):
        return asdict(self)


def make_table_row(series: CountSeries, m_t=None) -> TableRow:
    """Moment-based Poisson/NBD summary of a count series."""
    mom = sample_moments(series)
    theta = tau = eta_n = psi_n = eta_p = psi_p = None
    if mom.mean > 0:
        pm = PoissonParams(mom.mean).moments()
        eta_p, psi_p = pm.skewness, pm.kurtosis
        if mom.variance is not None:
            try:
                nbd = fit_nbd_moments(mom.mean, mom.variance)
            except UnderdispersedError:
                pass
            else:
                nm = nbd.moments()
                theta, tau, eta_n, psi_n = nbd.theta, nbd.tau, nm.skewness, nm.kurtosis
    return TableRow(m_t, series.n_events, series.n_intervals, mom.mean, mom.variance,
                    theta, tau, mom.skewness, mom.kurtosis, eta_n, psi_n, eta_p, psi_p,
                    series.interval_days)


# --- formatting --------------------------------------------------------------

def fmt_number(x):
    """Six significant digits; integers verbatim; None as '-'."""
    if x is None:
        return MISSING
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            return MISSING
        return f"{x:.{SIG_DIGITS}g}"
    return str(x)


def round_sig(x):
    """Recursively round floats in a JSON-able structure to six digits."""
    if isinstance(x, float):
        return float(f"{x:.{SIG_DIGITS}g}") if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: round_sig(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round_sig(v) for v in x]
    return x


def config_hash(config: dict):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def metadata_block(config: dict):
    return {"tool": TOOL, "version": __version__, "config_hash": config_hash(config),
            "config": config}


def render_table(rows, columns, fmt, metadata):
    """Render dict rows as tsv/csv (with '# metadata:' header line) or json."""
    if fmt == "json":
        payload = {"metadata": metadata,
                   "rows": [{c: round_sig(r.get(c)) for c in columns} for r in rows]}
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write("# metadata: " + json.dumps(metadata, sort_keys=True, default=str) + "\n")
    writer = csv.writer(buf, delimiter="\t" if fmt == "tsv" else ",", lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt_number(r.get(c)) for c in columns])
    return buf.getvalue()


def render_json(payload: dict, metadata):
    return json.dumps({"metadata": metadata, **round_sig(payload)}, indent=2) + "\n"


def write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def strip_metadata(text: str):
    """Drop metadata so that golden comparisons see only the data."""
    if text.lstrip().startswith("{"):
        obj = json.loads(text)
        obj.pop("metadata", None)
        return json.dumps(obj, indent=2)
    return "".join(line for line in text.splitlines(keepends=True)
                   if not line.startswith("#"))


def read_counts_file(path):
    """Read a counts CSV written by ``eqnumbers counts``."""
    path = Path(path)
    meta = {}
    counts = []
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        rows = []
        for line in fh:
            if line.startswith("# metadata:"):
                meta = json.loads(line.split(":", 1)[1])
            elif not line.startswith("#") and line.strip():
                rows.append(line)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["interval_index", "count"]:
        raise ValueError(f"{path}: expected header 'interval_index,count'")
    for row in reader:
        counts.append(int(row[1]))
    interval_days = (meta.get("series") or {}).get("interval_days", 1.0)
    series_meta = {"source": str(path)}
    if meta.get("config"):
        series_meta["counts_config"] = meta["config"]
    return CountSeries.from_counts(counts, interval_days, series_meta)
