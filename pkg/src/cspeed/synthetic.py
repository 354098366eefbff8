"""Deterministic synthetic worlds for tests and desk-scale experiments."""

from __future__ import annotations

import itertools

import numpy as np

from .geo import GeoPoint, c_latency_rtt_ms, destination, great_circle_km, interpolate
from .popgrid import City, PopulationGrid
from .towers import Tower
from .tracelat import TraceRecord


def random_cities(n: int, seed: int = 0, lat=(33.0, 45.0), lon=(-105.0, -80.0),
                  min_sep_km: float = 150.0) -> list[City]:
    """``n`` cities with pairwise separation of at least ``min_sep_km``.

    Populations follow a rank-size (Zipf) law so the gravity matrix is skewed
    the way real city sizes are.
    """
    rng = np.random.default_rng(seed)
    pts: list[GeoPoint] = []
    while len(pts) < n:
        p = GeoPoint(rng.uniform(*lat), rng.uniform(*lon))
        if all(great_circle_km(p, q) >= min_sep_km for q in pts):
            pts.append(p)
    return [City(f"city{k:02d}", p, round(8e6 / (k + 1))) for k, p in enumerate(pts)]


def nearest_neighbor_pairs(cities: list[City], k: int = 3) -> list[tuple[int, int]]:
    pairs = set()
    for i, c in enumerate(cities):
        d = sorted((great_circle_km(c.location, o.location), j) for j, o in enumerate(cities) if j != i)
        for _, j in d[:k]:
            pairs.add((min(i, j), max(i, j)))
    return sorted(pairs)


def corridor_towers(cities: list[City], pairs: list[tuple[int, int]], seed: int = 0,
                    spacing_km=(20.0, 38.0), jitter_km: float = 3.0, prefix: str = "T") -> list[Tower]:
    """Towers strung along the geodesic of each city pair.

    Spacing along the corridor is uniform in ``spacing_km`` and each tower is
    pushed sideways by up to ``jitter_km``.
    """
    rng = np.random.default_rng(seed)
    towers: list[Tower] = []
    for i, j in pairs:
        a, b = cities[i].location, cities[j].location
        total = great_circle_km(a, b)
        pos = rng.uniform(*spacing_km)
        while pos < total - spacing_km[0] / 2:
            p = interpolate(a, b, pos / total)
            p = destination(p, rng.uniform(0, 360), rng.uniform(0, jitter_km))
            towers.append(Tower(f"{prefix}{len(towers):05d}", p))
            pos += rng.uniform(*spacing_km)
    return towers


def geodesic_towers(a: GeoPoint, b: GeoPoint, spacing_km: float, prefix: str = "g",
                    offset_km: float | None = None) -> list[Tower]:
    """Towers exactly on the a-b geodesic, ``offset_km`` from a then every ``spacing_km``."""
    total = great_circle_km(a, b)
    pos = spacing_km if offset_km is None else offset_km
    out = []
    while pos < total - 1e-9:
        out.append(Tower(f"{prefix}{len(out):04d}", interpolate(a, b, pos / total)))
        pos += spacing_km
    return out


def ubiquitous_towers(cities: list[City], spacing_km: float = 60.0) -> list[Tower]:
    """Geodesic towers between every city pair (the towers-everywhere scenario)."""
    towers = []
    for i, j in itertools.combinations(range(len(cities)), 2):
        towers += geodesic_towers(cities[i].location, cities[j].location, spacing_km, prefix=f"u{i}_{j}_")
    return towers


def design_fixture(seed: int = 7, n_cities: int = 10, n_towers: int = 500):
    """The desk-scale design world: ``n_cities`` cities, about ``n_towers`` corridor towers.

    Corridors join each city to its three nearest neighbours; spacing is
    drawn so that every gap is under 40 km but many exceed 30 km.
    """
    cities = random_cities(n_cities, seed=seed, lat=(35.0, 43.0), lon=(-98.0, -84.0))
    pairs = nearest_neighbor_pairs(cities, 3)
    towers = corridor_towers(cities, pairs, seed=seed + 1, spacing_km=(18.0, 38.0), jitter_km=2.0)
    if len(towers) > n_towers:
        raise ValueError(f"fixture produced {len(towers)} towers, more than {n_towers}")
    rng = np.random.default_rng(seed + 2)
    # pad with scattered towers away from the corridors
    while len(towers) < n_towers:
        towers.append(Tower(f"S{len(towers):05d}", GeoPoint(rng.uniform(35.0, 43.0), rng.uniform(-98.0, -84.0))))
    return cities, towers


def uniform_grid(lat=(-10.0, 10.0), lon=(-10.0, 10.0), cellsize: float = 0.25,
                 density: float = 1.0) -> PopulationGrid:
    """Regular lattice where each cell holds ``density`` times its spherical area fraction."""
    lats = np.arange(lat[0] + cellsize / 2, lat[1], cellsize)
    lons = np.arange(lon[0] + cellsize / 2, lon[1], cellsize)
    la, lo = np.meshgrid(lats, lons, indexing="ij")
    pop = density * np.cos(np.radians(la))
    return PopulationGrid(la.ravel(), lo.ravel(), pop.ravel(), cellsize=cellsize)


def cluster_grid(centers: list[GeoPoint], half_width_deg: float = 1.0, cellsize: float = 0.25,
                 per_cell: float = 1000.0) -> PopulationGrid:
    lats, lons, pops = [], [], []
    offs = np.arange(-half_width_deg + cellsize / 2, half_width_deg, cellsize)
    for c in centers:
        for dl in offs:
            for dn in offs:
                lats.append(c.lat + dl)
                lons.append(c.lon + dn)
                pops.append(per_cell)
    return PopulationGrid(lats, lons, pops, cellsize=cellsize)


def synthetic_traces(n=1000, seed=0):
    """Measurement rows; roughly 10% carry a minimum ping below the c-latency."""
    rng = np.random.default_rng(seed)
    records = []
    for k in range(n):
        client = GeoPoint(rng.uniform(-50, 60), rng.uniform(-170, 170))
        server = GeoPoint(rng.uniform(-50, 60), rng.uniform(-170, 170))
        c = c_latency_rtt_ms(client, server)
        sources = [server] * 3 + [GeoPoint(rng.uniform(-50, 60), rng.uniform(-170, 170)) for _ in range(2)]
        min_ping = c * (rng.uniform(0.5, 0.95) if rng.random() < 0.1 else rng.uniform(1.2, 6.0))
        times = {"min_ping": min_ping, "median_ping": min_ping * rng.uniform(1.0, 1.1),
                 "dns": c * rng.uniform(0.5, 20), "handshake": min_ping * rng.uniform(1.0, 1.2),
                 "request_response": min_ping * rng.uniform(1.0, 3.0), "transfer": c * rng.uniform(0.2, 30)}
        times["total"] = sum(times[x] for x in ("dns", "handshake", "request_response", "transfer")) * rng.uniform(1.0, 1.1)
        hops = [_synthetic_hop(client, server, rng) for _ in range(int(rng.integers(0, 5)))]
        records.append(TraceRecord(client, sources, times, int(rng.lognormal(10.7, 1.0)), hops,
                                   1.4e9 + k * 60.0, f"10.0.{k // 256}.{k % 256}"))
    return records


def _synthetic_hop(a, b, rng):
    return destination(interpolate(a, b, rng.uniform(0, 1)), rng.uniform(0, 360), rng.uniform(0, 300))
