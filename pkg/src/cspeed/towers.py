"""Tower registry, range-limited tower graph, and shortest tower chains between cities."""

from __future__ import annotations

import csv
import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geo import DEFAULT_MODEL, GeoPoint, PropagationModel, central_angle, great_circle_km, great_circle_km_many

_EPS_DEG = 1e-9
# relative slack on the inclusive range boundary; absorbs haversine round-off only
RANGE_RTOL = 1e-9


def in_range(dist_km, range_km):
    return dist_km <= range_km * (1.0 + RANGE_RTOL)


class TowerParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class NoChain(Exception):
    """No tower chain connects two cities within the radio range."""


@dataclass(frozen=True)
class Tower:
    id: str
    location: GeoPoint
    status: str = "Constructed"


@dataclass
class TowerRegistry:
    towers: list[Tower]
    dropped: int = 0

    @property
    def kept(self) -> int:
        return len(self.towers)


def load_towers(path, keep_status: str = "Constructed") -> TowerRegistry:
    """Read a ``tower_id,lat,lon,status`` CSV, keeping only towers with ``keep_status``."""
    path = Path(path)
    towers: list[Tower] = []
    seen: set[str] = set()
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = {"tower_id", "lat", "lon", "status"} - set(reader.fieldnames or [])
        if missing:
            raise TowerParseError(path, 1, f"missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            tid = (rec["tower_id"] or "").strip()
            if not tid:
                raise TowerParseError(path, lineno, "empty tower_id")
            if tid in seen:
                raise TowerParseError(path, lineno, f"duplicate tower_id {tid!r}")
            seen.add(tid)
            try:
                loc = GeoPoint(float(rec["lat"]), float(rec["lon"]))
            except (TypeError, ValueError) as exc:
                raise TowerParseError(path, lineno, f"bad coordinates: {exc}") from None
            status = (rec["status"] or "").strip()
            if status.lower() != keep_status.lower():
                dropped += 1
                continue
            towers.append(Tower(tid, loc, status))
    return TowerRegistry(towers, dropped)


class BucketIndex:
    """Fixed lat/lon bucket grid for radius queries on the sphere.

    Bucket height is at least ``range_km`` of latitude; the number of
    longitude buckets searched is derived from the exact longitudinal extent
    of the query cap, so no in-range point is ever missed.
    """

    def __init__(self, lats: np.ndarray, lons: np.ndarray, range_km: float,
                 model: PropagationModel = DEFAULT_MODEL):
        self.lats = np.asarray(lats, dtype=float)
        self.lons = np.asarray(lons, dtype=float)
        self.range_km = range_km
        self.model = model
        self.theta = range_km / model.earth_radius
        self.dlat = max(math.degrees(self.theta), 1e-6)
        self.nrows = max(1, math.ceil(180.0 / self.dlat))
        self.ncols = max(1, math.floor(360.0 / self.dlat))
        self.dlon = 360.0 / self.ncols
        self.buckets: dict[tuple[int, int], np.ndarray] = {}
        rows, cols = self._cell(self.lats, self.lons)
        tmp: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, key in enumerate(zip(rows.tolist(), cols.tolist())):
            tmp[key].append(i)
        self.buckets = {k: np.array(v, dtype=np.int64) for k, v in tmp.items()}

    def _cell(self, lat, lon):
        r = np.minimum(np.floor((np.asarray(lat) + 90.0) / self.dlat).astype(np.int64), self.nrows - 1)
        c = np.floor((np.asarray(lon) + 180.0) / self.dlon).astype(np.int64) % self.ncols
        return r, c

    def _lon_span(self, abs_lat: float):
        phi = math.radians(abs_lat)
        if phi + self.theta >= math.pi / 2 - 1e-12:
            return None
        ext = math.degrees(math.asin(min(1.0, math.sin(self.theta) / math.cos(phi)))) + _EPS_DEG
        span = math.ceil(ext / self.dlon)
        return None if 2 * span + 1 >= self.ncols else span

    def _cells(self, r_lo: int, r_hi: int, c: int, span):
        cols = range(self.ncols) if span is None else [(c + k) % self.ncols for k in range(-span, span + 1)]
        for rr in range(max(0, r_lo), min(self.nrows - 1, r_hi) + 1):
            for cc in cols:
                yield (rr, cc)

    def _neighbor_cells(self, lat: float, lon: float):
        _, c = (int(x) for x in self._cell(lat, lon))
        r_lo = int(math.floor((lat - self.dlat - _EPS_DEG + 90.0) / self.dlat))
        r_hi = int(math.floor((lat + self.dlat + _EPS_DEG + 90.0) / self.dlat))
        return self._cells(r_lo, r_hi, c, self._lon_span(abs(lat)))

    def bucket_candidates(self, key: tuple[int, int]) -> np.ndarray:
        """Points that can be in range of any point inside bucket ``key``."""
        r, c = key
        edge = max(abs(-90.0 + r * self.dlat), abs(min(90.0, -90.0 + (r + 1) * self.dlat)))
        parts = [self.buckets[k] for k in self._cells(r - 1, r + 1, c, self._lon_span(edge))
                 if k in self.buckets]
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

    def candidates(self, lat: float, lon: float) -> np.ndarray:
        parts = [self.buckets[k] for k in self._neighbor_cells(lat, lon) if k in self.buckets]
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)

    def query(self, p: GeoPoint, radius_km: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Indices and distances of points within ``radius_km`` (inclusive)."""
        radius_km = self.range_km if radius_km is None else radius_km
        if radius_km > self.range_km:
            raise ValueError("query radius exceeds the index range")
        idx = self.candidates(p.lat, p.lon)
        if len(idx) == 0:
            return idx, np.empty(0)
        d = great_circle_km_many(p, self.lats[idx], self.lons[idx], self.model)
        keep = in_range(d, radius_km)
        return idx[keep], d[keep]


@dataclass
class TowerGraph:
    towers: list[Tower]
    range_km: float
    # CSR adjacency: neighbors of i are indices[indptr[i]:indptr[i+1]]
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    index: BucketIndex
    model: PropagationModel = DEFAULT_MODEL
    _ids: list[str] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._ids = [t.id for t in self.towers]

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.indptr[i], self.indptr[i + 1]
        return self.indices[a:b], self.weights[a:b]

    def edge_set(self) -> set[tuple[int, int]]:
        out = set()
        for i in range(len(self.towers)):
            for j in self.neighbors(i)[0]:
                if i < j:
                    out.add((i, int(j)))
        return out

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2


def build_tower_graph(registry: TowerRegistry | list[Tower], range_km: float,
                      model: PropagationModel = DEFAULT_MODEL) -> TowerGraph:
    if range_km <= 0:
        raise ValueError(f"range_km must be positive, got {range_km}")
    towers = registry.towers if isinstance(registry, TowerRegistry) else list(registry)
    n = len(towers)
    lats = np.array([t.location.lat for t in towers], dtype=float)
    lons = np.array([t.location.lon for t in towers], dtype=float)
    index = BucketIndex(lats, lons, range_km, model)
    src, dst, wts = [], [], []
    for key, members in index.buckets.items():
        cand = index.bucket_candidates(key)
        for i in members:
            # each unordered pair is decided once, from its lower index
            js = cand[cand > i]
            d = model.earth_radius * central_angle(lats[i], lons[i], lats[js], lons[js])
            ok = in_range(d, range_km)
            src.append(np.full(int(ok.sum()), i, dtype=np.int64))
            dst.append(js[ok])
            wts.append(d[ok])
    if src:
        a, b, w = np.concatenate(src), np.concatenate(dst), np.concatenate(wts)
    else:
        a = b = np.empty(0, dtype=np.int64)
        w = np.empty(0)
    src_a, dst_a, w_a = np.concatenate([a, b]), np.concatenate([b, a]), np.concatenate([w, w])
    order = np.lexsort((dst_a, src_a))
    src_a, dst_a, w_a = src_a[order], dst_a[order], w_a[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src_a + 1, 1)
    indptr = np.cumsum(indptr)
    return TowerGraph(towers, range_km, indptr, dst_a, w_a, index, model)


@dataclass(frozen=True)
class TowerChain:
    city_a: GeoPoint
    city_b: GeoPoint
    tower_ids: tuple[str, ...]
    tower_points: tuple[GeoPoint, ...]
    total_length_km: float
    tower_count: int

    def points(self) -> list[GeoPoint]:
        return [self.city_a, *self.tower_points, self.city_b]

    def hops_km(self, model: PropagationModel = DEFAULT_MODEL) -> list[float]:
        pts = self.points()
        return [great_circle_km(p, q, model) for p, q in zip(pts, pts[1:])]

    def reversed(self) -> "TowerChain":
        return TowerChain(self.city_b, self.city_a, self.tower_ids[::-1], self.tower_points[::-1],
                          self.total_length_km, self.tower_count)

    def to_geojson(self, properties: dict | None = None) -> dict:
        """GeoJSON LineString feature; coordinates are [lon, lat]."""
        props = {"tower_ids": list(self.tower_ids), "towers": self.tower_count,
                 "length_km": self.total_length_km}
        props.update(properties or {})
        return {
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [[p.lon, p.lat] for p in self.points()]},
            "properties": props,
        }


def _path(pred: np.ndarray, v: int) -> list[int]:
    out = []
    while v >= 0:
        out.append(v)
        v = int(pred[v])
    return out[::-1]


def chains_from(graph: TowerGraph, source: GeoPoint, targets: list[GeoPoint]) -> list[TowerChain | None]:
    """Shortest chains from ``source`` to every target with a single tower search.

    Cities are sinks: a city attaches to every tower within range and may also
    link directly to another city within range. Ties on length are broken by
    fewer towers, then by the lexicographic sequence of tower ids.
    """
    n = len(graph.towers)
    ids = graph._ids
    dist = np.full(n, np.inf)
    hops = np.zeros(n, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)

    def better(v, nd, nh, u):
        if nd != dist[v]:
            return nd < dist[v]
        if nh != hops[v]:
            return nh < hops[v]
        cand = [ids[k] for k in (_path(pred, u) if u >= 0 else [])] + [ids[v]]
        return cand < [ids[k] for k in _path(pred, v)]

    heap = []
    start_idx, start_d = graph.index.query(source)
    for v, d in zip(start_idx.tolist(), start_d.tolist()):
        if better(v, d, 1, -1):
            dist[v], hops[v], pred[v] = d, 1, -1
            heapq.heappush(heap, (d, 1, v))
    while heap:
        d, h, u = heapq.heappop(heap)
        if done[u] or d != dist[u] or h != hops[u]:
            continue
        done[u] = True
        nbrs, w = graph.neighbors(u)
        for v, wv in zip(nbrs.tolist(), w.tolist()):
            if done[v]:
                continue
            nd = d + wv
            if better(v, nd, h + 1, u):
                dist[v], hops[v], pred[v] = nd, h + 1, u
                heapq.heappush(heap, (nd, h + 1, v))

    out: list[TowerChain | None] = []
    for target in targets:
        best = None
        direct = great_circle_km(source, target, graph.model)
        if in_range(direct, graph.range_km):
            best = (direct, 0, [])
        idx, dd = graph.index.query(target)
        for v, d in zip(idx.tolist(), dd.tolist()):
            if not np.isfinite(dist[v]):
                continue
            cand = (dist[v] + d, int(hops[v]))
            if best is not None and cand > best[:2]:
                continue
            path = _path(pred, v)
            if best is None or cand < best[:2] or [ids[k] for k in path] < [ids[k] for k in best[2]]:
                best = (cand[0], cand[1], path)
        if best is None:
            out.append(None)
            continue
        length, _, path = best
        out.append(TowerChain(source, target, tuple(ids[k] for k in path),
                              tuple(graph.towers[k].location for k in path), float(length), len(path)))
    return out


def tower_chain(graph: TowerGraph, city_a: GeoPoint, city_b: GeoPoint) -> TowerChain:
    chain = chains_from(graph, city_a, [city_b])[0]
    if chain is None:
        raise NoChain(f"no tower chain within {graph.range_km:g} km between {city_a} and {city_b}")
    return chain


def count_towers(chains_with_replicas, unique: bool = False) -> int:
    """Total towers over ``(chain, replicas)`` pairs.

    Per-edge counting charges every chain its own towers times its replicas.
    Unique counting charges each tower id once, at the largest replica count of
    any chain through it.
    """
    if not unique:
        return sum(c.tower_count * r for c, r in chains_with_replicas)
    most: dict[str, int] = {}
    for c, r in chains_with_replicas:
        for t in c.tower_ids:
            most[t] = max(most.get(t, 0), r)
    return sum(most.values())
