"""Fiber-length inflation over fiber-annotated topologies, with optional road distances."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .geo import DEFAULT_MODEL, GeoPoint, PropagationModel, great_circle_km

log = logging.getLogger(__name__)


@dataclass
class FiberNetwork:
    nodes: dict[str, GeoPoint]
    edges: list[tuple[str, str, float]]

    def __post_init__(self):
        for a, b, km in self.edges:
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge {a}-{b} references an unknown node")
            if not km > 0:
                raise ValueError(f"edge {a}-{b} has non-positive fiber length {km}")
            g = great_circle_km(self.nodes[a], self.nodes[b])
            if km < g:
                # usually endpoint geocoding error; kept
                log.warning("edge %s-%s: fiber %.1f km shorter than geodesic %.1f km", a, b, km, g)


def load_fiber_network(nodes_path, edges_path) -> FiberNetwork:
    nodes: dict[str, GeoPoint] = {}
    with open(nodes_path, newline="") as fh:
        for lineno, rec in enumerate(csv.DictReader(r for r in fh if not r.startswith("#")), start=2):
            try:
                nodes[rec["node_id"].strip()] = GeoPoint(float(rec["lat"]), float(rec["lon"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{nodes_path}:{lineno}: {exc}") from None
    edges = []
    with open(edges_path, newline="") as fh:
        for lineno, rec in enumerate(csv.DictReader(r for r in fh if not r.startswith("#")), start=2):
            try:
                edges.append((rec["node_a"].strip(), rec["node_b"].strip(), float(rec["fiber_km"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{edges_path}:{lineno}: {exc}") from None
    return FiberNetwork(nodes, edges)


class DistanceProvider:
    """Symmetric lookup of pre-computed road distances."""

    def __init__(self, mapping: dict[tuple[str, str], float] | None = None):
        self._km: dict[frozenset, float] = {}
        for (a, b), km in (mapping or {}).items():
            self.add(a, b, km)

    def add(self, a: str, b: str, km: float) -> None:
        if not km > 0:
            raise ValueError(f"road distance {a}-{b} must be positive")
        key = frozenset((a, b))
        if key in self._km and self._km[key] != km:
            raise ValueError(f"conflicting road distances for {a}-{b}")
        self._km[key] = km

    def get(self, a: str, b: str) -> float | None:
        return self._km.get(frozenset((a, b)))

    def __len__(self):
        return len(self._km)

    @classmethod
    def from_file(cls, path) -> "DistanceProvider":
        prov = cls()
        with open(path, newline="") as fh:
            for lineno, rec in enumerate(csv.DictReader(r for r in fh if not r.startswith("#")), start=2):
                try:
                    prov.add(rec["node_a"].strip(), rec["node_b"].strip(), float(rec["road_km"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        return prov


def all_pairs_fiber_km(net: FiberNetwork) -> dict[tuple[str, str], float]:
    """Shortest fiber distance for every connected unordered node pair (a < b by id)."""
    ids = sorted(net.nodes)
    pos = {k: i for i, k in enumerate(ids)}
    n = len(ids)
    w = np.full((n, n), np.inf)
    for a, b, km in net.edges:
        i, j = pos[a], pos[b]
        w[i, j] = w[j, i] = min(w[i, j], km)
    w[~np.isfinite(w)] = 0  # csgraph treats explicit zeros as missing edges
    dist = dijkstra(csr_matrix(w), directed=False)
    out = {}
    for i in range(n):
        for j in range(i + 1, n):
            if np.isfinite(dist[i, j]):
                out[(ids[i], ids[j])] = float(dist[i, j])
            else:
                log.info("fiber: %s-%s disconnected, excluded", ids[i], ids[j])
    return out


@dataclass(frozen=True)
class InflationRow:
    node_a: str
    node_b: str
    geodesic_km: float
    fiber_km: float
    fiber_inflation: float
    road_km: float | None
    road_inflation: float | None
    latency_adjusted_inflation: float


def inflation_table(net: FiberNetwork, provider: DistanceProvider | None = None,
                    model: PropagationModel = DEFAULT_MODEL) -> list[InflationRow]:
    """Per-pair fiber (and road) inflation over the geodesic.

    The latency-adjusted column divides by the fiber speed factor, i.e. it
    compares fiber latency against c-latency.
    """
    rows = []
    for (a, b), fkm in all_pairs_fiber_km(net).items():
        g = great_circle_km(net.nodes[a], net.nodes[b], model)
        if g <= 0:
            log.info("fiber: %s-%s share a location, excluded", a, b)
            continue
        fi = fkm / g
        road = provider.get(a, b) if provider is not None else None
        rows.append(InflationRow(a, b, g, fkm, fi, road, road / g if road is not None else None,
                                 fi * (1.0 / model.fiber_factor)))
    return rows


def median_inflation(rows: list[InflationRow], column: str = "fiber_inflation") -> float:
    vals = [getattr(r, column) for r in rows if getattr(r, column) is not None]
    if not vals:
        raise ValueError(f"no values in column {column}")
    return float(np.median(vals))
