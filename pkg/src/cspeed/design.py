"""Backbone design: coalesce cities, gravity traffic, MST seed, stretch-driven
augmentation, routing, replication, and tower cost.
"""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import evalstretch
from .geo import GeoPoint, great_circle_km
from .popgrid import City
from .towers import TowerChain, TowerGraph, TowerRegistry, build_tower_graph, chains_from, count_towers

log = logging.getLogger(__name__)


class DisconnectedCenters(Exception):
    def __init__(self, centers: list[str], range_km: float | None = None):
        self.centers = centers
        self.range_km = range_km
        where = f" at range_km={range_km:g}" if range_km is not None else ""
        super().__init__(f"centers unreachable over towers{where}: {', '.join(centers)}")


@dataclass(frozen=True)
class PopulationCenter:
    name: str
    location: GeoPoint
    population: float
    members: tuple[str, ...] = ()


def coalesce(cities: list[City], radius_km: float = 50.0) -> list[PopulationCenter]:
    """Merge cities into population centers.

    Cities are visited by descending population (name breaks ties). A city
    joins the first existing center within ``radius_km`` of that center's
    location; otherwise it founds a new center at its own coordinates.
    """
    if not cities:
        raise ValueError("coalesce needs at least one city")
    founders: list[City] = []
    members: list[list[City]] = []
    for city in sorted(cities, key=lambda c: (-c.population, c.name)):
        for k, f in enumerate(founders):
            if great_circle_km(f.location, city.location) <= radius_km:
                members[k].append(city)
                break
        else:
            founders.append(city)
            members.append([city])
    return [PopulationCenter(f.name, f.location, float(sum(c.population for c in m)),
                             tuple(c.name for c in m))
            for f, m in zip(founders, members)]


@dataclass
class TrafficMatrix:
    names: list[str]
    demand: np.ndarray  # Gbps, demand[i, j] from i to j
    total_gbps: float

    def between(self, a: str, b: str) -> float:
        return float(self.demand[self.names.index(a), self.names.index(b)])


def gravity_matrix(centers: list[PopulationCenter], total_gbps: float = 80.0) -> TrafficMatrix:
    """Demand proportional to the product of populations, scaled to ``total_gbps``."""
    if len(centers) < 2:
        raise ValueError("gravity matrix needs at least two centers")
    p = np.array([c.population for c in centers], dtype=float)
    if np.count_nonzero(p > 0) < 2:
        raise ValueError("gravity matrix needs at least two centers with positive population")
    # normalize before multiplying so huge populations cannot overflow
    p = p / p.max()
    raw = np.outer(p, p)
    np.fill_diagonal(raw, 0.0)
    demand = raw * (total_gbps / raw.sum())
    return TrafficMatrix([c.name for c in centers], demand, total_gbps)


def center_chains(centers: list[PopulationCenter], graph: TowerGraph,
                  threads: int = 1) -> dict[tuple[int, int], TowerChain]:
    """Shortest tower chain for every connectable center pair, keyed ``(i, j)`` with i < j."""
    def run(i):
        targets = [c.location for c in centers[i + 1:]]
        return i, chains_from(graph, centers[i].location, targets)

    out: dict[tuple[int, int], TowerChain] = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for i, chains in pool.map(run, range(len(centers))):
            for k, ch in enumerate(chains):
                if ch is not None:
                    out[(i, i + 1 + k)] = ch
    return out


@dataclass
class DesignedEdge:
    a: int
    b: int
    chain: TowerChain
    replicas: int = 1
    load_gbps: float = 0.0

    @property
    def length_km(self) -> float:
        return self.chain.total_length_km

    @property
    def towers(self) -> int:
        return self.chain.tower_count * self.replicas


@dataclass
class DesignedNetwork:
    centers: list[PopulationCenter]
    edges: dict[tuple[int, int], DesignedEdge] = field(default_factory=dict)
    capacity_gbps: float = 0.4
    utilization: float = 0.5
    p95_history: list[float] = field(default_factory=list)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.centers]

    def index_of(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            return int(key)
        if isinstance(key, PopulationCenter):
            key = key.name
        return self.names.index(key)

    def add(self, i: int, j: int, chain: TowerChain) -> None:
        i, j = min(i, j), max(i, j)
        self.edges[(i, j)] = DesignedEdge(i, j, chain)

    def edge_lengths(self) -> dict[tuple[int, int], float]:
        return {k: e.length_km for k, e in self.edges.items()}

    def lengths(self) -> np.ndarray:
        return evalstretch.all_pairs_lengths(len(self.centers), self.edge_lengths())

    def geodesic(self) -> np.ndarray:
        return evalstretch.geodesic_matrix([c.location for c in self.centers])

    def is_connected(self) -> bool:
        return bool(np.all(np.isfinite(self.lengths())))

    def total_towers(self, unique: bool = False) -> int:
        return count_towers(((e.chain, e.replicas) for e in self.edges.values()), unique=unique)

    def copy(self) -> "DesignedNetwork":
        return replace(self, edges={k: replace(e) for k, e in self.edges.items()},
                       p95_history=list(self.p95_history))

    def sorted_edges(self) -> list[DesignedEdge]:
        names = self.names
        return sorted(self.edges.values(), key=lambda e: (names[e.a], names[e.b]))


def _pair_key(centers, i, j):
    a, b = sorted((centers[i].name, centers[j].name))
    return a, b


def mst_seed(centers: list[PopulationCenter], chains: dict[tuple[int, int], TowerChain],
             range_km: float | None = None) -> list[tuple[int, int]]:
    """Kruskal spanning tree minimizing total tower count.

    Ties go to the shorter chain, then to the lexicographically smaller pair
    of center names.
    """
    n = len(centers)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    order = sorted(chains, key=lambda k: (chains[k].tower_count, chains[k].total_length_km,
                                          _pair_key(centers, *k)))
    tree = []
    for i, j in order:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
    if len(tree) != n - 1:
        # report everything outside the component of the most populous center
        anchor = max(range(n), key=lambda k: (centers[k].population, -k))
        root = find(anchor)
        lost = sorted(centers[k].name for k in range(n) if find(k) != root)
        raise DisconnectedCenters(lost, range_km)
    return tree


def seed_network(centers: list[PopulationCenter], chains: dict[tuple[int, int], TowerChain],
                 range_km: float | None = None, capacity_gbps: float = 0.4,
                 utilization: float = 0.5) -> DesignedNetwork:
    net = DesignedNetwork(list(centers), capacity_gbps=capacity_gbps, utilization=utilization)
    for i, j in mst_seed(centers, chains, range_km):
        net.add(i, j, chains[(i, j)])
    return net


def _score(lengths, geodesic, weights):
    """(p95, weighted mean) stretch over the pairs carrying weight."""
    mask = weights > 0
    s = lengths[mask] / geodesic[mask]
    w = weights[mask]
    p95 = evalstretch.weighted_percentiles(s, w, [0.95])[0]
    return p95, float(np.dot(s, w) / w.sum())


def candidate_pairs(network: DesignedNetwork, chains: dict[tuple[int, int], TowerChain],
                    traffic: TrafficMatrix | None = None, top_k: int | None = None) -> list[tuple[int, int]]:
    cands = [k for k in chains if k not in network.edges]
    names = network.names
    if top_k and traffic is not None:
        d = traffic.demand
        cands.sort(key=lambda k: (-(d[k] + d[k[::-1]]), names[k[0]], names[k[1]]))
        cands = cands[:top_k]
    return cands


def augment_step(network: DesignedNetwork, chains: dict[tuple[int, int], TowerChain],
                 weights: np.ndarray, lengths: np.ndarray | None = None,
                 candidates: list[tuple[int, int]] | None = None):
    """Evaluate every candidate edge; return ``(best_key, p95, mean, new_lengths)`` or None.

    Candidates are ranked by p95 stretch, then weighted mean stretch, then
    center names, so the choice is independent of evaluation order.
    """
    g = network.geodesic()
    weights = np.where(g > 0, weights, 0.0)
    if lengths is None:
        lengths = network.lengths()
    if candidates is None:
        candidates = [k for k in chains if k not in network.edges]
    best = None
    for key in candidates:
        new = evalstretch.add_edge_lengths(lengths, key[0], key[1], chains[key].total_length_km)
        p95, mean = _score(new, g, weights)
        rank = (p95, mean, _pair_key(network.centers, *key))
        if best is None or rank < best[0]:
            best = (rank, key, new)
    if best is None:
        return None
    (p95, mean, _), key, new = best
    return key, p95, mean, new


def augment(network: DesignedNetwork, traffic: TrafficMatrix, chains: dict[tuple[int, int], TowerChain],
            max_edges: int = 300, min_p95_gain: float = 1e-3, top_k: int | None = None,
            byte_weighted: bool = True) -> DesignedNetwork:
    """Greedily add the edge that most reduces byte-weighted p95 stretch.

    Stops once the network has ``max_edges`` edges, no candidate remains, or
    the best relative p95 improvement falls below ``min_p95_gain``.
    """
    net = network.copy()
    if not net.is_connected():
        raise ValueError("augment needs a connected seed network")
    weights = evalstretch.pair_weights(traffic, byte_weighted)
    g = net.geodesic()
    lengths = net.lengths()
    current = _score(lengths, g, np.where(g > 0, weights, 0.0))[0]
    net.p95_history = [current]
    while len(net.edges) < max_edges:
        cands = candidate_pairs(net, chains, traffic, top_k)
        step = augment_step(net, chains, weights, lengths, cands)
        if step is None:
            break
        key, p95, _, new = step
        if (current - p95) / current < min_p95_gain:
            break
        net.add(key[0], key[1], chains[key])
        lengths, current = new, p95
        net.p95_history.append(current)
        log.debug("augment: +%s-%s p95=%.5f", net.names[key[0]], net.names[key[1]], p95)
    return net


@dataclass
class Routing:
    routes: dict[tuple[int, int], list[int]]
    loads: dict[tuple[int, int], float]


def route_and_load(network: DesignedNetwork, traffic: TrafficMatrix) -> Routing:
    """Route each demand on its shortest path and accumulate edge loads (both directions).

    Equal-length paths are split by hop count, then by the sequence of center names.
    Edge ``load_gbps`` values on ``network`` are updated in place.
    """
    n = len(network.centers)
    names = network.names
    adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for (i, j), e in network.edges.items():
        adj[i].append((j, e.length_km))
        adj[j].append((i, e.length_km))
    routes: dict[tuple[int, int], list[int]] = {}
    loads = {k: 0.0 for k in network.edges}
    for s in range(n):
        best: dict[int, tuple] = {s: (0.0, 0, (names[s],), [s])}
        heap = [(0.0, 0, (names[s],), [s])]
        done = set()
        while heap:
            d, h, tag, path = heapq.heappop(heap)
            u = path[-1]
            if u in done:
                continue
            done.add(u)
            for v, w in adj[u]:
                if v in done:
                    continue
                cand = (d + w, h + 1, tag + (names[v],), path + [v])
                if v not in best or cand[:3] < best[v][:3]:
                    best[v] = cand
                    heapq.heappush(heap, cand)
        for t in range(n):
            if t == s or traffic.demand[s, t] <= 0:
                continue
            if t not in best:
                raise DisconnectedCenters([names[t]])
            path = best[t][3]
            routes[(s, t)] = path
            for u, v in zip(path, path[1:]):
                loads[(min(u, v), max(u, v))] += float(traffic.demand[s, t])
    for k, e in network.edges.items():
        e.load_gbps = loads[k]
    return Routing(routes, loads)


def replica_count(load_gbps: float, capacity_gbps: float = 0.4, utilization: float = 0.5) -> int:
    """Parallel chains needed to carry ``load_gbps`` at the target utilization."""
    if capacity_gbps <= 0 or not 0 < utilization <= 1:
        raise ValueError("capacity must be positive and utilization in (0, 1]")
    # read floats by their shortest decimal form so 0.6 / 0.2 is exactly 3
    usable = _decimal(capacity_gbps) * _decimal(utilization)
    return max(1, math.ceil(_decimal(load_gbps) / usable))


def _decimal(x) -> Fraction:
    return Fraction(repr(float(x)))


def replicate(network: DesignedNetwork) -> DesignedNetwork:
    net = network.copy()
    for e in net.edges.values():
        e.replicas = replica_count(e.load_gbps, net.capacity_gbps, net.utilization)
    return net


@dataclass(frozen=True)
class CostReport:
    tower_count: int
    install_usd: float
    annual_opex_usd: float
    amortized_annual_usd: float
    amortization_years: float


def cost_report(tower_count: int, install_per_tower: float = 100_000, opex_per_tower_yr: float = 38_000,
                amortization_years: float = 5) -> CostReport:
    if tower_count < 0 or install_per_tower < 0 or opex_per_tower_yr < 0 or amortization_years <= 0:
        raise ValueError("cost inputs must be non-negative and amortization_years positive")
    install = tower_count * install_per_tower
    opex = tower_count * opex_per_tower_yr
    return CostReport(tower_count, install, opex, install / amortization_years + opex, amortization_years)


def cost(network: DesignedNetwork, install_per_tower: float = 100_000, opex_per_tower_yr: float = 38_000,
         amortization_years: float = 5, unique_towers: bool = False) -> CostReport:
    return cost_report(network.total_towers(unique=unique_towers), install_per_tower,
                       opex_per_tower_yr, amortization_years)


@dataclass
class DesignConfig:
    range_km: float = 70.0
    capacity_gbps: float = 0.4
    utilization: float = 0.5
    total_gbps: float = 80.0
    coalesce_km: float = 50.0
    install_usd: float = 100_000.0
    opex_usd: float = 38_000.0
    amortize_years: float = 5.0
    max_edges: int = 300
    min_p95_gain: float = 0.001
    candidate_top_k: int = 0
    byte_weighted: bool = True
    unique_towers: bool = False


@dataclass
class DesignResult:
    centers: list[PopulationCenter]
    traffic: TrafficMatrix
    seed: DesignedNetwork
    network: DesignedNetwork
    routing: Routing
    cost: CostReport
    stretch: evalstretch.StretchDistribution


def run_design(cities: list[City], towers: TowerRegistry | TowerGraph, config: DesignConfig | None = None,
               threads: int = 1) -> DesignResult:
    """Coalesce, seed, augment, route, replicate, cost, evaluate."""
    cfg = config or DesignConfig()
    graph = towers if isinstance(towers, TowerGraph) else build_tower_graph(towers, cfg.range_km)
    centers = coalesce(cities, cfg.coalesce_km)
    traffic = gravity_matrix(centers, cfg.total_gbps)
    chains = center_chains(centers, graph, threads)
    seed = seed_network(centers, chains, graph.range_km, cfg.capacity_gbps, cfg.utilization)
    net = augment(seed, traffic, chains, cfg.max_edges, cfg.min_p95_gain,
                  cfg.candidate_top_k or None, cfg.byte_weighted)
    routing = route_and_load(net, traffic)
    net = replicate(net)
    report = cost(net, cfg.install_usd, cfg.opex_usd, cfg.amortize_years, cfg.unique_towers)
    dist = evalstretch.evaluate(net, traffic, cfg.byte_weighted)
    return DesignResult(centers, traffic, seed, net, routing, report, dist)
