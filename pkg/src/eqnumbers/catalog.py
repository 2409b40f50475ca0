"""Earthquake catalog ingestion, filtering and binning into count series.

The on-disk format is a plain CSV with the header::

    time,latitude,longitude,depth_km,magnitude,moment_nm

Times are ISO-8601 (a trailing ``Z`` or an explicit offset is accepted;
naive times are taken as UTC).  Either ``magnitude`` or ``moment_nm`` may be
empty, but not both.  Files ending in ``.gz`` are decompressed on the fly.
"""
from __future__ import annotations

import csv
import gzip
import io
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import CatalogFormatError, CatalogRowError, DomainError

CSV_COLUMNS = ("time", "latitude", "longitude", "depth_km", "magnitude",
               "moment_nm")

SECONDS_PER_DAY = 86400.0
# threshold comparisons absorb float round-off in moment -> magnitude conversion
MAGNITUDE_EPS = 1e-9

_FRACTION = re.compile(r"(\d{2}:\d{2}:\d{2})\.(\d+)")


def moment_to_magnitude(moment):
    """Moment magnitude from scalar seismic moment in N m."""
    moment = float(moment)
    if not moment > 0 or not math.isfinite(moment):
        raise DomainError(f"seismic moment must be positive, got {moment}")
    return (2.0 / 3.0) * math.log10(moment) - 6.0


def magnitude_to_moment(magnitude):
    """Inverse of :func:`moment_to_magnitude`."""
    return 10.0 ** (1.5 * (float(magnitude) + 6.0))


@dataclass(frozen=True)
class Event:
    time: datetime
    latitude: float
    longitude: float
    depth: float | None = None
    magnitude: float | None = None
    moment: float | None = None

    def __post_init__(self):
        if self.magnitude is None and self.moment is None:
            raise ValueError("event needs a magnitude or a seismic moment")
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")
        if self.depth is not None and self.depth < 0:
            raise ValueError(f"negative depth {self.depth}")
        if self.moment is not None and not self.moment > 0:
            raise ValueError(f"seismic moment must be positive, got {self.moment}")
        if self.time.tzinfo is None:
            raise ValueError("event time must be timezone-aware")

    @property
    def mw(self):
        """Magnitude, derived from the moment when not given directly."""
        if self.magnitude is not None:
            return self.magnitude
        return moment_to_magnitude(self.moment)


@dataclass(frozen=True)
class Region:
    """Latitude/longitude rectangle, bounds inclusive.

    ``lon_min > lon_max`` denotes a box crossing the antimeridian.
    """
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not self.lat_min < self.lat_max:
            raise ValueError("lat_min must be below lat_max")
        for lon in (self.lon_min, self.lon_max):
            if not -180.0 <= lon <= 180.0:
                raise ValueError(f"longitude bound {lon} outside [-180, 180]")

    @classmethod
    def from_string(cls, text):
        """Parse ``"lat1,lat2,lon1,lon2"``."""
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("region must be lat_min,lat_max,lon_min,lon_max")
        return cls(*parts)

    def contains(self, lat, lon):
        if not self.lat_min <= lat <= self.lat_max:
            return False
        if self.lon_min <= self.lon_max:
            return self.lon_min <= lon <= self.lon_max
        return lon >= self.lon_min or lon <= self.lon_max


@dataclass(frozen=True)
class CatalogFilter:
    magnitude_threshold: float
    start: datetime
    end: datetime
    region: Region | None = None

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("time window start must precede its end")

    def to_dict(self):
        return {
            "magnitude_threshold": self.magnitude_threshold,
            "start": format_time(self.start),
            "end": format_time(self.end),
            "region": None if self.region is None else [
                self.region.lat_min, self.region.lat_max,
                self.region.lon_min, self.region.lon_max],
        }


@dataclass(frozen=True)
class CountSeries:
    """Event counts in ``N`` equal-length consecutive intervals."""
    counts: tuple
    interval_days: float
    n_events: int
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 1:
            raise ValueError("a count series needs at least one interval")
        if any(c < 0 for c in counts):
            raise ValueError("counts must be non-negative")
        if sum(counts) != self.n_events:
            raise ValueError("n_events does not match the sum of counts")
        if not self.interval_days > 0:
            raise ValueError("interval length must be positive")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, counts, interval_days=1.0, metadata=None):
        counts = tuple(int(c) for c in counts)
        return cls(counts, float(interval_days), sum(counts), dict(metadata or {}))

    @property
    def n_intervals(self):
        return len(self.counts)

    def as_array(self):
        return np.asarray(self.counts, dtype=np.int64)


@dataclass
class ParsedCatalog:
    events: list
    errors: list  # CatalogRowError instances, in file order

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)


def parse_time(text):
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    # fromisoformat on 3.10 only takes 3 or 6 fractional digits
    text = _FRACTION.sub(lambda m: f"{m.group(1)}.{m.group(2)[:6].ljust(6, '0')}", text)
    t = datetime.fromisoformat(text)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    t = t.astimezone(timezone.utc)
    # millisecond resolution
    return t.replace(microsecond=(t.microsecond // 1000) * 1000)


def format_time(t):
    t = t.astimezone(timezone.utc)
    if t.microsecond:
        return t.strftime("%Y-%m-%dT%H:%M:%S.") + f"{t.microsecond // 1000:03d}Z"
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def _optional_float(text):
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _parse_row(row):
    if len(row) != len(CSV_COLUMNS):
        raise ValueError(f"expected {len(CSV_COLUMNS)} fields, got {len(row)}")
    time_s, lat_s, lon_s, depth_s, mag_s, moment_s = row
    lat = _optional_float(lat_s)
    lon = _optional_float(lon_s)
    if lat is None or lon is None:
        raise ValueError("latitude and longitude are required")
    return Event(time=parse_time(time_s), latitude=lat, longitude=lon,
                 depth=_optional_float(depth_s),
                 magnitude=_optional_float(mag_s),
                 moment=_optional_float(moment_s))


def parse_catalog(source: BinaryIO | Iterable[str], strict: bool = False,
                  format: str = "canonical-csv") -> ParsedCatalog:
    """Read events from a canonical-CSV byte stream.

    Rows that fail validation are collected in ``errors`` (with 1-based line
    numbers) and skipped, unless ``strict`` is set, in which case the first
    bad row raises :class:`CatalogRowError`.
    """
    if format != "canonical-csv":
        raise CatalogFormatError(f"unsupported catalog format {format!r}")
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or hasattr(source, "readinto"):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise CatalogFormatError("empty catalog file") from None
    except UnicodeDecodeError as exc:
        raise CatalogFormatError(f"catalog is not UTF-8 text: {exc}") from None
    header = [h.strip().lstrip("﻿") for h in header]
    if tuple(header) != CSV_COLUMNS:
        raise CatalogFormatError(
            f"bad header {','.join(header)!r}, expected {','.join(CSV_COLUMNS)!r}")

    events, errors = [], []
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except UnicodeDecodeError as exc:
            raise CatalogFormatError(
                f"catalog is not UTF-8 text near line {reader.line_num}: {exc}") from None
        except csv.Error as exc:
            err = CatalogRowError(reader.line_num, str(exc))
            if strict:
                raise err from None
            errors.append(err)
            continue
        if not row or all(not f.strip() for f in row):
            continue
        try:
            events.append(_parse_row(row))
        except ValueError as exc:
            err = CatalogRowError(reader.line_num, str(exc))
            if strict:
                raise err from None
            errors.append(err)
    return ParsedCatalog(events, errors)


def read_catalog(path, strict=False):
    """Open ``path`` (optionally ``.gz``) and parse it."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return parse_catalog(fh, strict=strict)


def write_catalog(events: Iterable[Event], path):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for ev in events:
            writer.writerow([
                format_time(ev.time), repr(ev.latitude), repr(ev.longitude),
                "" if ev.depth is None else repr(ev.depth),
                "" if ev.magnitude is None else repr(ev.magnitude),
                "" if ev.moment is None else repr(ev.moment),
            ])


def filter_events(events: Iterable[Event], f: CatalogFilter) -> list[Event]:
    """Keep events with magnitude >= threshold, inside [start, end) and region."""
    kept = []
    for ev in events:
        if not f.start <= ev.time < f.end:
            continue
        if ev.mw < f.magnitude_threshold - MAGNITUDE_EPS:
            continue
        if f.region is not None and not f.region.contains(ev.latitude, ev.longitude):
            continue
        kept.append(ev)
    return kept


def _microseconds(delta: timedelta):
    return (delta.days * 86400 + delta.seconds) * 1_000_000 + delta.microseconds


def bin_counts(events: Sequence[Event], start: datetime, end: datetime,
               n_intervals: int, metadata=None) -> CountSeries:
    """Count events in ``n_intervals`` equal half-open intervals of [start, end).

    Interval membership is decided with integer microsecond arithmetic, so
    each event lands in exactly one interval and refining N to 2N splits
    every interval cleanly in two.
    """
    if n_intervals < 1:
        raise ValueError("number of intervals must be >= 1")
    if not start < end:
        raise ValueError("time window start must precede its end")
    total = _microseconds(end - start)
    counts = np.zeros(n_intervals, dtype=np.int64)
    for ev in events:
        if not start <= ev.time < end:
            raise ValueError(f"event at {format_time(ev.time)} outside window; "
                             "filter events before binning")
        offset = _microseconds(ev.time - start)
        counts[offset * n_intervals // total] += 1
    interval_days = total / 1e6 / SECONDS_PER_DAY / n_intervals
    meta = {"start": format_time(start), "end": format_time(end),
            "n_intervals": n_intervals}
    meta.update(metadata or {})
    return CountSeries(tuple(counts.tolist()), interval_days, int(counts.sum()), meta)


def catalog_counts(events, f: CatalogFilter, n_intervals, catalog_id=None):
    """Filter then bin; convenience wrapper used by the CLI."""
    kept = filter_events(events, f)
    meta = {"filter": f.to_dict()}
    if catalog_id is not None:
        meta["catalog_id"] = catalog_id
    return bin_counts(kept, f.start, f.end, n_intervals, metadata=meta)
