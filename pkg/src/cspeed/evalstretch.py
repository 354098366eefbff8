"""Byte-weighted stretch and population coverage of a designed network."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .geo import GeoPoint, central_angle
from .popgrid import PopulationGrid

if TYPE_CHECKING:  # pragma: no cover
    from .design import DesignedNetwork, PopulationCenter, TrafficMatrix

log = logging.getLogger(__name__)

# stretch on chains can only dip below 1 through float round-off
STRETCH_EPS = 1e-9


def weighted_percentiles(values, weights=None, qs=(0.5,)) -> list[float]:
    """Nearest-rank percentiles: the smallest value whose cumulative weight reaches q."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("percentile of an empty distribution")
    weights = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape != values.shape:
        raise ValueError("values and weights differ in shape")
    if np.any(weights < 0) or not weights.sum() > 0:
        raise ValueError("weights must be non-negative and not all zero")
    keep = weights > 0
    values, weights = values[keep], weights[keep]
    order = np.argsort(values, kind="stable")
    v = values[order]
    cum = np.cumsum(weights[order]) / weights.sum()
    out = []
    for q in qs:
        if not 0 <= q <= 1:
            raise ValueError(f"quantile {q} outside [0, 1]")
        k = int(np.searchsorted(cum, q - 1e-12, side="left"))
        out.append(float(v[min(k, len(v) - 1)]))
    return out


def geodesic_matrix(points: list[GeoPoint], earth_radius: float = 6371.0) -> np.ndarray:
    lat = np.array([p.lat for p in points])
    lon = np.array([p.lon for p in points])
    g = earth_radius * central_angle(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    return np.minimum(g, g.T)


def all_pairs_lengths(n: int, edges: dict[tuple[int, int], float]) -> np.ndarray:
    """Floyd-Warshall over an undirected edge-length map."""
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for (i, j), w in edges.items():
        if w < d[i, j]:
            d[i, j] = d[j, i] = w
    for k in range(n):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    return d


def add_edge_lengths(d: np.ndarray, u: int, v: int, w: float) -> np.ndarray:
    """Exact all-pairs lengths after adding one undirected edge u-v of length w."""
    via_uv = d[:, u, None] + w + d[None, v, :]
    via_vu = d[:, v, None] + w + d[None, u, :]
    return np.minimum(d, np.minimum(via_uv, via_vu))


@dataclass
class StretchDistribution:
    pairs: list[tuple[str, str]]
    stretch: np.ndarray
    weights: np.ndarray  # normalized to sum to 1
    excluded: list[tuple[str, str, str]] = field(default_factory=list)

    def percentiles(self, qs) -> list[float]:
        return weighted_percentiles(self.stretch, self.weights, qs)

    @property
    def median(self) -> float:
        return self.percentiles([0.5])[0]

    @property
    def p90(self) -> float:
        return self.percentiles([0.9])[0]

    @property
    def p95(self) -> float:
        return self.percentiles([0.95])[0]

    def cdf(self) -> list[tuple[float, float]]:
        """(stretch, cumulative weight) at each distinct stretch value."""
        order = np.argsort(self.stretch, kind="stable")
        s, w = self.stretch[order], np.cumsum(self.weights[order])
        out: list[tuple[float, float]] = []
        for x, c in zip(s.tolist(), w.tolist()):
            if out and out[-1][0] == x:
                out[-1] = (x, c)
            else:
                out.append((x, c))
        if out:
            out[-1] = (out[-1][0], 1.0)
        return out


def stretch_matrix(lengths: np.ndarray, geodesic: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        s = lengths / geodesic
    np.fill_diagonal(s, np.nan)
    s[geodesic <= 0] = np.nan
    return s


def distribution_from_matrix(names: list[str], stretch: np.ndarray, weights: np.ndarray,
                             geodesic: np.ndarray | None = None) -> StretchDistribution:
    """Collect ordered pairs i != j with positive weight into a distribution."""
    pairs, vals, wts, excluded = [], [], [], []
    n = len(names)
    for i in range(n):
        for j in range(n):
            if i == j or weights[i, j] <= 0:
                continue
            if geodesic is not None and geodesic[i, j] <= 0:
                excluded.append((names[i], names[j], "coincident centers"))
                continue
            s = stretch[i, j]
            if not np.isfinite(s):
                excluded.append((names[i], names[j], "unreachable"))
                continue
            pairs.append((names[i], names[j]))
            vals.append(s)
            wts.append(weights[i, j])
    for a, b, why in excluded:
        log.warning("stretch: excluded %s-%s (%s)", a, b, why)
    if not vals:
        raise ValueError("no evaluable center pairs")
    w = np.asarray(wts, dtype=float)
    return StretchDistribution(pairs, np.asarray(vals, dtype=float), w / w.sum(), excluded)


def pair_weights(traffic: TrafficMatrix, byte_weighted: bool = True) -> np.ndarray:
    n = len(traffic.names)
    if byte_weighted:
        return np.asarray(traffic.demand, dtype=float)
    w = np.ones((n, n))
    np.fill_diagonal(w, 0.0)
    return w


def pair_stretch(network: DesignedNetwork, a, b) -> float:
    """Routed length over great-circle distance for centers ``a`` and ``b`` (names or indices)."""
    i, j = network.index_of(a), network.index_of(b)
    g = network.geodesic()[i, j]
    if g <= 0:
        raise ValueError(f"centers {a!r} and {b!r} coincide; stretch undefined")
    return float(network.lengths()[i, j] / g)


def evaluate(network: DesignedNetwork, traffic: TrafficMatrix, byte_weighted: bool = True) -> StretchDistribution:
    g = network.geodesic()
    s = stretch_matrix(network.lengths(), g)
    return distribution_from_matrix(network.names, s, pair_weights(traffic, byte_weighted), g)


def summary(dist: StretchDistribution, network: DesignedNetwork | None = None, cost=None) -> dict:
    med, p90, p95 = dist.percentiles([0.5, 0.9, 0.95])
    out = {"pairs": len(dist.pairs), "excluded_pairs": len(dist.excluded),
           "median_stretch": med, "p90_stretch": p90, "p95_stretch": p95,
           "max_stretch": float(dist.stretch.max())}
    if network is not None:
        out.update(centers=len(network.centers), edges=len(network.edges),
                   towers=network.total_towers())
    if cost is not None:
        out.update(install_usd=cost.install_usd, annual_opex_usd=cost.annual_opex_usd,
                   amortized_annual_usd=cost.amortized_annual_usd)
    return out


def coverage_within(centers: list[PopulationCenter] | list[GeoPoint], grid: PopulationGrid,
                    radius_km: float = 100.0) -> tuple[float, float]:
    """Population (and fraction of the grid) within ``radius_km`` of any center, counted once."""
    mask = np.zeros(len(grid), dtype=bool)
    for c in centers:
        p = c if isinstance(c, GeoPoint) else c.location
        mask[grid.indices_within(p, radius_km)] = True
    covered = float(grid.population[mask].sum())
    total = grid.total
    return covered, (covered / total if total > 0 else 0.0)
