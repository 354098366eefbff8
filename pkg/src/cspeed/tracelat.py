"""Latency-inflation decomposition and congestion statistics over collected measurements.

Nothing here performs network I/O; inputs are flat CSV files of measurements
gathered elsewhere.
"""

from __future__ import annotations

import csv
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np

from .geo import DEFAULT_MODEL, GeoPoint, PropagationModel, c_latency_rtt_ms, centroid, great_circle_km

MV_LINK_KM = 50.0
COMPONENTS = ("dns", "handshake", "request_response", "transfer", "total", "min_ping", "median_ping")
_CSV_TIMES = {"dns": "t_dns_ms", "handshake": "t_handshake_ms", "request_response": "t_reqresp_ms",
              "transfer": "t_transfer_ms", "total": "t_total_ms", "min_ping": "min_ping_ms",
              "median_ping": "median_ping_ms"}


@dataclass
class TraceRecord:
    client: GeoPoint
    server_sources: list[GeoPoint | None]
    times: dict[str, float]  # ms, keyed by COMPONENTS; missing components are absent
    page_bytes: int | None = None
    hops: list[GeoPoint] = field(default_factory=list)
    timestamp: float | None = None
    server_ip: str = ""
    server: GeoPoint | None = None  # resolved location, majority vote by default

    def __post_init__(self):
        for k, v in self.times.items():
            if k not in COMPONENTS:
                raise ValueError(f"unknown timing component {k!r}")
            if v < 0:
                raise ValueError(f"negative {k} time")
        if self.server is None:
            located = [p for p in self.server_sources if p is not None]
            if located:
                self.server = majority_vote_location(self.server_sources)

    def c_latency_ms(self, model: PropagationModel = DEFAULT_MODEL) -> float | None:
        if self.server is None:
            return None
        return c_latency_rtt_ms(self.client, self.server, model)


def majority_vote_location(candidates: list[GeoPoint | None], link_km: float = MV_LINK_KM) -> GeoPoint:
    """Consensus of several geolocation answers.

    Answers within ``link_km`` of each other are single-linked into clusters;
    the centroid of the largest cluster wins. Equal-sized clusters go to the
    one holding the lowest-indexed source. ``None`` entries are sources with
    no answer.
    """
    idx = [i for i, p in enumerate(candidates) if p is not None]
    if not idx:
        raise ValueError("majority vote needs at least one location")
    parent = {i: i for i in idx}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for a_pos, a in enumerate(idx):
        for b in idx[a_pos + 1:]:
            if great_circle_km(candidates[a], candidates[b]) <= link_km:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    clusters: dict[int, list[int]] = defaultdict(list)
    for i in idx:
        clusters[find(i)].append(i)
    best = min(clusters.values(), key=lambda m: (-len(m), min(m)))
    if all(candidates[i] == candidates[best[0]] for i in best):
        return candidates[best[0]]
    return centroid([candidates[i] for i in best])


@dataclass
class CullReport:
    kept: int
    dropped: int
    reasons: dict[str, int]


def cull_anomalies(records: list[TraceRecord], model: PropagationModel = DEFAULT_MODEL):
    """Drop records whose minimum ping beats the speed of light (geolocation errors).

    Records with no server location or zero c-latency are dropped as well,
    since no inflation can be computed for them. Returns ``(kept, report)``.
    """
    kept, reasons = [], defaultdict(int)
    for r in records:
        c = r.c_latency_ms(model)
        if c is None:
            reasons["unlocated_server"] += 1
        elif c <= 0:
            reasons["zero_c_latency"] += 1
        elif "min_ping" in r.times and r.times["min_ping"] < c:
            reasons["min_ping_below_c_latency"] += 1
        else:
            kept.append(r)
    return kept, CullReport(len(kept), len(records) - len(kept), dict(reasons))


@dataclass
class ComponentInflation:
    ratios: dict[str, float]
    server_processing_ms: float | None = None
    server_processing_clamped: bool = False


def inflation_components(record: TraceRecord, model: PropagationModel = DEFAULT_MODEL) -> ComponentInflation:
    """Each measured component divided by the record's c-latency.

    Server processing time is estimated as request-response minus one minimum
    RTT, clamped at zero (flagged) when jitter makes it negative.
    """
    c = record.c_latency_ms(model)
    if c is None or c <= 0:
        raise ValueError("record has no usable c-latency")
    ratios = {k: v / c for k, v in record.times.items()}
    out = ComponentInflation(ratios)
    if "request_response" in record.times and "min_ping" in record.times:
        est = record.times["request_response"] - record.times["min_ping"]
        out.server_processing_ms = max(est, 0.0)
        out.server_processing_clamped = est < 0
    return out


def normalize_by_ping(medians: dict[str, float], ping_inflation: float) -> dict[str, float]:
    """Re-express component inflations relative to the lower-layer (ping) inflation."""
    if not ping_inflation > 0:
        raise ValueError("ping inflation must be positive")
    return {k: v / ping_inflation for k, v in medians.items()}


def router_path_latency(record: TraceRecord, model: PropagationModel = DEFAULT_MODEL) -> float | None:
    """RTT at fiber speed along client -> responding hops -> server; None if under two points."""
    pts = [record.client, *record.hops]
    if record.server is not None:
        pts.append(record.server)
    if len(pts) < 2:
        return None
    path = sum(great_circle_km(a, b, model) for a, b in zip(pts, pts[1:]))
    return 2000.0 * path / (model.fiber_factor * model.c_vacuum)


def metric_values(record: TraceRecord, model: PropagationModel = DEFAULT_MODEL) -> dict[str, float]:
    """All inflation metrics of a record, including ``router_path`` when defined."""
    comp = inflation_components(record, model)
    vals = dict(comp.ratios)
    rp = router_path_latency(record, model)
    if rp is not None:
        vals["router_path"] = rp / record.c_latency_ms(model)
    return vals


def bin_key(record: TraceRecord, key: str, model: PropagationModel = DEFAULT_MODEL):
    if key == "page_size_1KB":
        return None if record.page_bytes is None else record.page_bytes // 1024
    if key == "c_latency_1ms":
        return int(math.floor(record.c_latency_ms(model)))
    raise ValueError(f"unknown bin key {key!r}")


@dataclass(frozen=True)
class BinRow:
    bin: int
    count: int
    medians: dict[str, float]


def binned_medians(records: list[TraceRecord], key: str, metrics: list[str],
                   model: PropagationModel = DEFAULT_MODEL) -> list[BinRow]:
    """Per-bin medians of inflation metrics; empty bins are omitted."""
    groups: dict[int, list[dict[str, float]]] = defaultdict(list)
    for r in records:
        b = bin_key(r, key, model)
        if b is not None:
            groups[b].append(metric_values(r, model))
    rows = []
    for b in sorted(groups):
        meds = {}
        for m in metrics:
            vals = [v[m] for v in groups[b] if m in v]
            if vals:
                meds[m] = float(np.median(vals))
        rows.append(BinRow(b, len(groups[b]), meds))
    return rows


def global_medians(records: list[TraceRecord], metrics: list[str],
                   model: PropagationModel = DEFAULT_MODEL) -> dict[str, float]:
    allv = [metric_values(r, model) for r in records]
    out = {}
    for m in metrics:
        vals = [v[m] for v in allv if m in v]
        if vals:
            out[m] = float(np.median(vals))
    return out


def median_size_band(records: list[TraceRecord], fraction: float = 0.10) -> list[TraceRecord]:
    """Records whose page size is within ``fraction`` of the median page size."""
    sizes = [r.page_bytes for r in records if r.page_bytes is not None]
    if not sizes:
        return []
    med = float(np.median(sizes))
    return [r for r in records if r.page_bytes is not None and abs(r.page_bytes - med) <= fraction * med]


# ---- CDN RTT samples ------------------------------------------------------

@dataclass(frozen=True)
class CdnRttSample:
    server_id: str
    client_id: str
    rtt_ms: float
    timestamp: float  # epoch seconds
    country: str = ""
    tz: str = "UTC"

    def __post_init__(self):
        if not self.rtt_ms > 0:
            raise ValueError(f"rtt must be positive, got {self.rtt_ms}")


_ABBREV_HOURS = {"UTC": 0, "GMT": 0, "WET": 0, "BST": 1, "CET": 1, "EET": 2, "IST": 5.5, "JST": 9,
                 "AEST": 10, "EST": -5, "CST": -6, "MST": -7, "PST": -8, "AKST": -9, "HST": -10}
_OFFSET = re.compile(r"^(?:UTC|GMT)?([+-])(\d{1,2})(?::?(\d{2}))?$")


def local_hour(timestamp: float, tz: str) -> float:
    """Hour of day (0-24) in the sample's local zone.

    ``tz`` may be an IANA name, a fixed offset like ``UTC-5`` or ``+05:30``,
    or a common abbreviation (EST, CST, GMT, ...), read as standard time.
    """
    utc = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    tag = tz.strip()
    if "/" in tag:
        try:
            t = utc.astimezone(ZoneInfo(tag))
            return t.hour + t.minute / 60 + t.second / 3600
        except ZoneInfoNotFoundError:
            raise ValueError(f"unknown time zone {tz!r}") from None
    m = _OFFSET.match(tag.upper())
    if m:
        hours = int(m.group(2)) + int(m.group(3) or 0) / 60
        offset = hours if m.group(1) == "+" else -hours
    elif tag.upper() in _ABBREV_HOURS:
        offset = _ABBREV_HOURS[tag.upper()]
    else:
        raise ValueError(f"unknown time zone {tz!r}")
    t = utc + timedelta(hours=offset)
    return t.hour + t.minute / 60 + t.second / 3600


def time_bin(timestamp: float, tz: str, nbins: int = 12) -> int:
    return min(int(local_hour(timestamp, tz) * nbins / 24.0), nbins - 1)


@dataclass
class TimeOfDayStats:
    group: tuple
    median_ms: list[float | None]
    p90_ms: list[float | None]
    tracked_pairs: int
    delta_max_median_ms: list[float | None]
    delta_pairs: list[int]
    diagnostics: list[str] = field(default_factory=list)


def timeofday_stats(samples: list[CdnRttSample], nbins: int = 12, min_rtt_ms: float = 3.0,
                    group_by: str = "country_tz") -> dict[tuple, TimeOfDayStats]:
    """Time-of-day RTT medians/p90 and within-bin RTT swings (max - min), per group.

    Pairs whose minimum RTT is under ``min_rtt_ms`` are discarded first (they
    tend to be proxies in data centers). The median/p90 tracks use only pairs
    present in every bin, each represented by its per-bin median RTT. The swing
    track uses, per bin, every pair with at least two samples in that bin.
    """
    key_fn = {"country_tz": lambda s: (s.country, s.tz), "country": lambda s: (s.country,),
              "tz": lambda s: (s.tz,)}[group_by]
    by_pair: dict[tuple, list[CdnRttSample]] = defaultdict(list)
    for s in samples:
        by_pair[(s.server_id, s.client_id)].append(s)
    groups: dict[tuple, dict[tuple, list[CdnRttSample]]] = defaultdict(dict)
    for pair, ss in by_pair.items():
        if min(x.rtt_ms for x in ss) < min_rtt_ms:
            continue
        groups[key_fn(ss[0])][pair] = ss

    out = {}
    for g in sorted(groups):
        pairs = groups[g]
        binned = {p: defaultdict(list) for p in pairs}
        for p, ss in pairs.items():
            for s in ss:
                binned[p][time_bin(s.timestamp, s.tz, nbins)].append(s.rtt_ms)
        diag = []
        full = sorted(p for p in pairs if len(binned[p]) == nbins)
        med, p90 = [None] * nbins, [None] * nbins
        if full:
            for b in range(nbins):
                reps = [float(np.median(binned[p][b])) for p in full]
                med[b] = float(np.median(reps))
                p90[b] = float(np.percentile(reps, 90))
        else:
            diag.append("no pair has samples in every bin")
        dmed, dcount = [None] * nbins, [0] * nbins
        for b in range(nbins):
            deltas = [max(binned[p][b]) - min(binned[p][b]) for p in sorted(pairs) if len(binned[p][b]) >= 2]
            dcount[b] = len(deltas)
            if deltas:
                dmed[b] = float(np.median(deltas))
        if not any(dcount):
            diag.append("no pair has repeat samples within a bin")
        out[g] = TimeOfDayStats(g, med, p90, len(full), dmed, dcount, diag)
    return out


# ---- CSV ingest ------------------------------------------------------------

def _opt_float(v):
    v = (v or "").strip()
    return float(v) if v else None


def _parse_hops(text: str) -> list[GeoPoint]:
    hops = []
    for tok in (text or "").split(";"):
        tok = tok.strip()
        if not tok:
            continue
        lat, lon = tok.split(":")
        hops.append(GeoPoint(float(lat), float(lon)))
    return hops


def load_traces(path) -> list[TraceRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(r for r in fh if not r.startswith("#"))
        for lineno, rec in enumerate(reader, start=2):
            try:
                client = GeoPoint(float(rec["client_lat"]), float(rec["client_lon"]))
                sources = []
                for k in range(1, 6):
                    lat, lon = _opt_float(rec.get(f"src{k}_lat")), _opt_float(rec.get(f"src{k}_lon"))
                    sources.append(GeoPoint(lat, lon) if lat is not None and lon is not None else None)
                times = {}
                for comp, col in _CSV_TIMES.items():
                    v = _opt_float(rec.get(col))
                    if v is not None:
                        times[comp] = v
                page = _opt_float(rec.get("page_bytes"))
                ts = _opt_float(rec.get("timestamp_epoch_s"))
                records.append(TraceRecord(client, sources, times, int(page) if page is not None else None,
                                           _parse_hops(rec.get("hops", "")), ts, (rec.get("server_ip") or "").strip()))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return records


TRACE_COLUMNS = (["client_lat", "client_lon", "server_ip"]
                 + [f"src{k}_{c}" for k in range(1, 6) for c in ("lat", "lon")]
                 + list(_CSV_TIMES.values()) + ["page_bytes", "hops", "timestamp_epoch_s"])


def trace_row(r: TraceRecord) -> dict:
    """Inverse of ``load_traces`` for one record."""
    row = {"client_lat": r.client.lat, "client_lon": r.client.lon, "server_ip": r.server_ip,
           "page_bytes": "" if r.page_bytes is None else r.page_bytes,
           "hops": ";".join(f"{h.lat}:{h.lon}" for h in r.hops),
           "timestamp_epoch_s": "" if r.timestamp is None else r.timestamp}
    for k in range(5):
        p = r.server_sources[k] if k < len(r.server_sources) else None
        row[f"src{k + 1}_lat"] = "" if p is None else p.lat
        row[f"src{k + 1}_lon"] = "" if p is None else p.lon
    for comp, col in _CSV_TIMES.items():
        row[col] = r.times.get(comp, "")
    return row


def load_cdn_samples(path) -> list[CdnRttSample]:
    out = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.DictReader(r for r in fh if not r.startswith("#")), start=2):
            try:
                out.append(CdnRttSample(rec["server_id"].strip(), rec["client_id"].strip(), float(rec["rtt_ms"]),
                                        float(rec["timestamp_epoch_s"]), (rec.get("country") or "").strip(),
                                        (rec.get("tz") or "UTC").strip()))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
