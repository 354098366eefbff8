"""Greedy weighted max-coverage placement of serving locations."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geo import GeoPoint, reachable_radius_km
from .popgrid import PopulationGrid


@dataclass
class PlacementProblem:
    grid: PopulationGrid
    candidates: list[GeoPoint]
    rtt_budget_ms: float
    speed_fraction: float
    coverage_target: float = 0.99

    def __post_init__(self):
        if not 0 < self.coverage_target <= 1:
            raise ValueError(f"coverage_target must be in (0, 1], got {self.coverage_target}")
        if not self.candidates:
            raise ValueError("placement needs at least one candidate site")

    @property
    def radius_km(self) -> float:
        return reachable_radius_km(self.rtt_budget_ms, self.speed_fraction, self.grid.model)


@dataclass
class PlacementSolution:
    sites: list[GeoPoint]
    covered_population: float
    coverage_fraction: float
    feasible: bool = True
    # best coverage any number of candidates can reach; set when infeasible
    max_achievable: float | None = None
    history: list[float] = field(default_factory=list)

    @property
    def num_sites(self) -> int | None:
        return len(self.sites) if self.feasible else None


def default_candidates(grid: PopulationGrid, thin_deg: float = 1.0) -> list[GeoPoint]:
    """Most populous cell of each ``thin_deg`` x ``thin_deg`` block, populated cells only."""
    best: dict[tuple[int, int], int] = {}
    for i in np.nonzero(grid.population > 0)[0]:
        key = (math.floor(grid.lats[i] / thin_deg), math.floor(grid.lons[i] / thin_deg))
        j = best.get(key)
        if j is None or grid.population[i] > grid.population[j]:
            best[key] = int(i)
    return [GeoPoint(grid.lats[i], grid.lons[i]) for _, i in sorted(best.items())]


def coverage_sets(grid: PopulationGrid, candidates: list[GeoPoint], radius_km: float) -> list[np.ndarray]:
    return [grid.indices_within(c, radius_km) for c in candidates]


def _greedy_once(pop: np.ndarray, sets: list[np.ndarray], order: np.ndarray, need: float):
    uncovered = np.ones(len(pop), dtype=bool)
    covered = 0.0
    chosen: list[int] = []
    history: list[float] = []
    while covered < need:
        best_gain, best = 0.0, -1
        for k in order:
            s = sets[k]
            gain = pop[s[uncovered[s]]].sum() if len(s) else 0.0
            if gain > best_gain:
                best_gain, best = gain, int(k)
        if best < 0:
            break
        chosen.append(best)
        uncovered[sets[best]] = False
        covered += best_gain
        history.append(covered)
    return chosen, covered, history


def place_greedy(problem: PlacementProblem, seed: int = 0, restarts: int = 5,
                 sets: list[np.ndarray] | None = None) -> PlacementSolution:
    """Repeatedly pick the candidate covering the most uncovered population.

    ``seed`` only drives the candidate shuffle used to break ties; the best of
    ``restarts`` shuffles (fewest sites, then most coverage) is returned.
    """
    grid = problem.grid
    total = grid.total
    radius = problem.radius_km
    if radius <= 0 or total <= 0:
        return PlacementSolution([], 0.0, 0.0, feasible=False, max_achievable=0.0)
    if sets is None:
        sets = coverage_sets(grid, problem.candidates, radius)
    pop = grid.population
    need = problem.coverage_target * total * (1 - 1e-12)

    reach = np.zeros(len(pop), dtype=bool)
    for s in sets:
        reach[s] = True
    max_cov = float(pop[reach].sum())
    if max_cov < need:
        return PlacementSolution([], 0.0, 0.0, feasible=False, max_achievable=max_cov / total)

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        order = rng.permutation(len(sets))
        chosen, covered, history = _greedy_once(pop, sets, order, need)
        if best is None or (len(chosen), -covered) < (len(best[0]), -best[1]):
            best = (chosen, covered, history)
    chosen, covered, history = best
    return PlacementSolution(
        sites=[problem.candidates[k] for k in chosen],
        covered_population=float(covered),
        coverage_fraction=float(covered / total),
        history=[float(h / total) for h in history],
    )


@dataclass(frozen=True)
class TradeoffRow:
    latency_target_ms: float
    speed_fraction: float
    num_sites: int | None  # None marks an infeasible cell
    coverage_fraction: float


def tradeoff_curve(grid: PopulationGrid, candidates: list[GeoPoint], latency_targets: list[float],
                   speed_fractions: list[float], coverage_target: float = 0.99, seed: int = 0,
                   restarts: int = 5, threads: int = 1) -> list[TradeoffRow]:
    """Site counts for every (latency target, speed) pair.

    A site set that works for a smaller reachable radius also works for any
    larger one, so each cell keeps the smallest feasible set found at any
    radius not exceeding its own. That makes counts non-increasing in both
    speed and latency target.
    """
    cells = [(t, f) for t in latency_targets for f in speed_fractions]

    def run(cell):
        t, f = cell
        problem = PlacementProblem(grid, candidates, t, f, coverage_target)
        return place_greedy(problem, seed=seed, restarts=restarts)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        solutions = list(pool.map(run, cells))

    radii = [reachable_radius_km(t, f, grid.model) for t, f in cells]
    rows = []
    for i, (t, f) in enumerate(cells):
        sol = solutions[i]
        if radii[i] <= 0:
            rows.append(TradeoffRow(t, f, None, 0.0))
            continue
        for j, other in enumerate(solutions):
            if (other.feasible and radii[j] <= radii[i]
                    and (not sol.feasible or len(other.sites) < len(sol.sites))):
                sol = _recover(grid, other.sites, radii[i])
        rows.append(TradeoffRow(t, f, sol.num_sites,
                                sol.coverage_fraction if sol.feasible else (sol.max_achievable or 0.0)))
    return rows


def _recover(grid: PopulationGrid, sites: list[GeoPoint], radius_km: float) -> PlacementSolution:
    mask = np.zeros(len(grid), dtype=bool)
    for s in sites:
        mask[grid.indices_within(s, radius_km)] = True
    covered = float(grid.population[mask].sum())
    return PlacementSolution(list(sites), covered, covered / grid.total)
