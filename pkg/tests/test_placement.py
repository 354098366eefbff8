import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cspeed import synthetic
from cspeed.geo import GeoPoint, great_circle_km
from cspeed.placement import (PlacementProblem, coverage_sets, default_candidates, place_greedy,
                              tradeoff_curve)
from cspeed.popgrid import PopulationGrid

TWO_CLUSTERS = [GeoPoint(0.0, 0.0), GeoPoint(0.0, 60.0)]


def two_cluster_grid():
    return synthetic.cluster_grid(TWO_CLUSTERS, half_width_deg=1.0, cellsize=0.25)


def brute_force_min_sites(grid, candidates, radius_km, target):
    need = target * grid.total * (1 - 1e-12)
    sets = [set(grid.indices_within(c, radius_km).tolist()) for c in candidates]
    for k in range(1, len(candidates) + 1):
        for combo in itertools.combinations(range(len(candidates)), k):
            covered = set().union(*(sets[i] for i in combo))
            if grid.population[list(covered)].sum() >= need:
                return k
    return None


def test_one_site_when_radius_covers_everything():
    g = two_cluster_grid()
    sol = place_greedy(PlacementProblem(g, TWO_CLUSTERS, 100, 1.0, 1.0))
    assert sol.feasible and len(sol.sites) == 1 and sol.coverage_fraction == pytest.approx(1.0)


def test_two_separated_clusters_need_two_sites():
    g = two_cluster_grid()
    problem = PlacementProblem(g, TWO_CLUSTERS, 5, 1.0, 1.0)  # ~750 km radius
    assert 2 * problem.radius_km < great_circle_km(*TWO_CLUSTERS)
    sol = place_greedy(problem)
    assert len(sol.sites) == 2 == brute_force_min_sites(g, TWO_CLUSTERS, problem.radius_km, 1.0)
    assert set(sol.sites) <= set(TWO_CLUSTERS)


def test_infeasible_reports_max_achievable():
    g = two_cluster_grid()
    sol = place_greedy(PlacementProblem(g, TWO_CLUSTERS[:1], 5, 1.0, 1.0))
    assert not sol.feasible and sol.num_sites is None
    assert sol.max_achievable == pytest.approx(0.5)


def test_deterministic_given_seed():
    rng = np.random.default_rng(0)
    g = PopulationGrid(rng.uniform(-30, 30, 800), rng.uniform(-30, 30, 800), rng.uniform(0, 100, 800))
    cands = default_candidates(g, 5.0)
    p = PlacementProblem(g, cands, 10, 0.5, 0.9)
    a, b = place_greedy(p, seed=3), place_greedy(p, seed=3)
    assert a.sites == b.sites
    assert all(x <= y for x, y in zip(a.history, a.history[1:]))
    assert len(a.sites) <= len(cands)


@given(st.integers(0, 10_000), st.integers(4, 12), st.floats(0.5, 1.0))
def test_greedy_within_log_bound_of_optimum(seed, n_cand, target):
    rng = np.random.default_rng(seed)
    g = PopulationGrid(rng.uniform(-10, 10, 60), rng.uniform(-10, 10, 60), rng.integers(1, 50, 60))
    cands = [GeoPoint(rng.uniform(-10, 10), rng.uniform(-10, 10)) for _ in range(n_cand)]
    problem = PlacementProblem(g, cands, 10, 0.1, target)  # ~150 km radius
    sol = place_greedy(problem, seed=seed)
    opt = brute_force_min_sites(g, cands, problem.radius_km, target)
    if opt is None:
        assert not sol.feasible
    else:
        assert sol.feasible
        assert opt <= len(sol.sites) <= opt * (math.log(n_cand) + 1)


def test_tradeoff_monotone_two_continents():
    g = two_cluster_grid()
    speeds = [1 / 32, 1 / 4, 1.0]
    cands = default_candidates(g, 0.5)
    rows = tradeoff_curve(g, cands, [0, 20, 40, 80], speeds, coverage_target=1.0, restarts=2)
    table = {(r.latency_target_ms, r.speed_fraction): r.num_sites for r in rows}
    big = 10 ** 9
    for t in (20, 40, 80):
        counts = [big if table[(t, f)] is None else table[(t, f)] for f in speeds]
        assert counts == sorted(counts, reverse=True)
    for f in speeds:
        counts = [big if table[(t, f)] is None else table[(t, f)] for t in (20, 40, 80)]
        assert counts == sorted(counts, reverse=True)
        assert table[(0, f)] is None


def test_single_cell_world():
    g = PopulationGrid([1.0], [1.0], [100.0])
    rows = tradeoff_curve(g, [GeoPoint(1.0, 1.0)], [5, 30], [1 / 32, 1.0])
    assert all(r.num_sites == 1 for r in rows)


def test_default_candidates_thin_to_one_per_degree():
    g = PopulationGrid([0.1, 0.6, 0.2, 1.5], [0.1, 0.6, 0.9, 0.5], [5, 9, 0, 3])
    assert default_candidates(g) == [GeoPoint(0.6, 0.6), GeoPoint(1.5, 0.5)]
