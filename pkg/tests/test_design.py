import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse.csgraph import shortest_path

from cspeed import design
from cspeed.design import (DesignConfig, DesignedNetwork, DisconnectedCenters, PopulationCenter, augment,
                           augment_step, coalesce, cost_report, gravity_matrix, mst_seed, replica_count,
                           replicate, route_and_load, run_design, seed_network)
from cspeed.evalstretch import geodesic_matrix, pair_weights
from cspeed.geo import GeoPoint, destination, great_circle_km
from cspeed.popgrid import City
from cspeed.towers import TowerChain, build_tower_graph


def center(name, lat, lon, pop=1.0):
    return PopulationCenter(name, GeoPoint(lat, lon), pop, (name,))


def fake_chain(a, b, count, length=None, tag=""):
    """A chain with ``count`` private towers and a chosen length (default: the geodesic)."""
    length = great_circle_km(a.location, b.location) if length is None else length
    ids = tuple(f"{tag or a.name + b.name}{k}" for k in range(count))
    return TowerChain(a.location, b.location, ids, tuple(a.location for _ in ids), length, count)


# coalescing and traffic

def test_coalesce_merges_within_radius():
    a = City("big", GeoPoint(40, -90), 1000)
    near = City("near", destination(a.location, 30, 30), 10)
    far = City("far", destination(a.location, 30, 60), 10)
    out = coalesce([near, a], 50)
    assert len(out) == 1
    assert out[0].name == "big" and out[0].location == a.location and out[0].population == 1010
    assert set(out[0].members) == {"big", "near"}
    assert len(coalesce([a, far], 50)) == 2


def test_gravity_examples():
    two = gravity_matrix([center("a", 0, 0, 5), center("b", 0, 1, 5)])
    assert two.between("a", "b") == pytest.approx(40) and two.between("b", "a") == pytest.approx(40)
    three = gravity_matrix([center(n, 0, k, 7) for k, n in enumerate("abc")])
    off = three.demand[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 80 / 6)
    z = gravity_matrix([center("a", 0, 0, 3), center("b", 0, 1, 4), center("z", 0, 2, 0)])
    assert np.all(z.demand[2] == 0) and np.all(z.demand[:, 2] == 0)
    assert z.demand.sum() == pytest.approx(80)


def test_gravity_rejects_degenerate():
    with pytest.raises(ValueError):
        gravity_matrix([center("a", 0, 0, 0), center("b", 0, 1, 0)])
    with pytest.raises(ValueError):
        gravity_matrix([center("a", 0, 0, 3)])


@given(st.lists(st.floats(1, 1e9), min_size=2, max_size=8), st.floats(1e-3, 1e6))
def test_gravity_scale_invariant_and_proportional(pops, k):
    cs = [center(f"c{i}", 0, i, p) for i, p in enumerate(pops)]
    m1 = gravity_matrix(cs).demand
    m2 = gravity_matrix([center(c.name, 0, i, c.population * k) for i, c in enumerate(cs)]).demand
    assert np.allclose(m1, m2, rtol=1e-9, atol=0)
    assert m1.sum() == pytest.approx(80)
    p = np.array(pops)
    oracle = np.outer(p, p)
    np.fill_diagonal(oracle, 0)
    assert np.allclose(m1, oracle * 80 / oracle.sum(), rtol=1e-9)


# spanning tree seed

def spanning_trees(n, pairs):
    for combo in itertools.combinations(pairs, n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x
        ok = True
        for i, j in combo:
            ri, rj = find(i), find(j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            yield combo


def test_mst_collinear_prefers_path():
    cs = [center("a", 40, -100), center("b", 40, -99), center("c", 40, -98)]
    # towers only along the line: the long chord needs all the towers of both short legs
    chains = {(0, 1): fake_chain(cs[0], cs[1], 2), (1, 2): fake_chain(cs[1], cs[2], 2),
              (0, 2): fake_chain(cs[0], cs[2], 5)}
    tree = mst_seed(cs, chains)
    assert sorted(tree) == [(0, 1), (1, 2)]
    best = min(spanning_trees(3, list(chains)), key=lambda t: sum(chains[e].tower_count for e in t))
    assert sorted(tree) == sorted(best)


def test_mst_two_centers_and_ties_deterministic():
    cs = [center("a", 40, -100), center("b", 40, -99)]
    ch = fake_chain(cs[0], cs[1], 3)
    assert mst_seed(cs, {(0, 1): ch}) == [(0, 1)]
    cs = [center(n, 40, -100 + k * 0.01) for k, n in enumerate("dcba")]
    chains = {(i, j): fake_chain(cs[i], cs[j], 1, 10.0) for i, j in itertools.combinations(range(4), 2)}
    t1, t2 = mst_seed(cs, chains), mst_seed(cs, dict(reversed(list(chains.items()))))
    assert t1 == t2
    # all keys tie: the pairs with lexicographically smallest names win (a-b, a-c, a-d)
    names = {tuple(sorted((cs[i].name, cs[j].name))) for i, j in t1}
    assert names == {("a", "b"), ("a", "c"), ("a", "d")}


@given(st.integers(2, 6), st.integers(0, 10_000))
def test_mst_matches_exhaustive(n, seed):
    rng = np.random.default_rng(seed)
    cs = [center(f"c{k}", rng.uniform(30, 40), rng.uniform(-100, -90)) for k in range(n)]
    chains = {}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < 0.8 or j == i + 1:
            chains[(i, j)] = fake_chain(cs[i], cs[j], int(rng.integers(0, 6)), float(rng.integers(100, 110)))
    tree = mst_seed(cs, chains)
    assert len(tree) == n - 1
    key = lambda t: (sum(chains[e].tower_count for e in t), sum(chains[e].total_length_km for e in t))
    assert key(tree) == min(key(t) for t in spanning_trees(n, list(chains)))


def test_mst_reports_disconnected():
    cs = [center("a", 40, -100, 5), center("b", 40, -99, 3), center("c", 30, -80, 1)]
    with pytest.raises(DisconnectedCenters) as info:
        mst_seed(cs, {(0, 1): fake_chain(cs[0], cs[1], 1)}, range_km=30)
    assert info.value.centers == ["c"]
    assert "30" in str(info.value)


# augmentation

def square_world():
    cs = [center("n0", 40.0, -100.0), center("n1", 40.0, -98.0), center("n2", 38.5, -98.0),
          center("n3", 38.5, -100.0)]
    chains = {(i, j): fake_chain(cs[i], cs[j], 3) for i, j in itertools.combinations(range(4), 2)}
    return cs, chains


def oracle_score(net, extra, chains, weights):
    """Full shortest paths with scipy plus a sort-based nearest-rank p95."""
    n = len(net.centers)
    m = np.zeros((n, n))
    for (i, j), e in list(net.edges.items()) + [(extra, None)]:
        w = chains[(i, j)].total_length_km if e is None else e.length_km
        m[i, j] = m[j, i] = w
    d = shortest_path(m, method="D", directed=False)
    g = geodesic_matrix([c.location for c in net.centers])
    s, w = [], []
    for i in range(n):
        for j in range(n):
            if i != j and weights[i, j] > 0:
                s.append(d[i, j] / g[i, j])
                w.append(weights[i, j])
    order = np.argsort(s)
    s, w = np.array(s)[order], np.array(w)[order] / sum(w)
    p95 = s[np.nonzero(np.cumsum(w) >= 0.95 - 1e-12)[0][0]]
    return p95, float(np.dot(s, w))


def test_square_star_first_step_matches_brute_force():
    cs, chains = square_world()
    seed = DesignedNetwork(cs)
    for j in (1, 2, 3):
        seed.add(0, j, chains[(0, j)])
    traffic = gravity_matrix(cs)
    weights = pair_weights(traffic)
    key, p95, mean, _ = augment_step(seed, chains, weights)
    scores = {k: oracle_score(seed, k, chains, weights) for k in chains if k not in seed.edges}
    best = min(scores.values())
    assert scores[key][0] == pytest.approx(best[0], rel=1e-12)
    assert scores[key][1] == pytest.approx(best[1], rel=1e-12)
    assert (p95, mean) == pytest.approx(scores[key], rel=1e-12)


@given(st.integers(3, 6), st.integers(0, 10_000))
def test_augment_step_matches_exhaustive(n, seed):
    rng = np.random.default_rng(seed)
    cs = [center(f"c{k}", rng.uniform(30, 40), rng.uniform(-100, -90), rng.uniform(1, 100)) for k in range(n)]
    chains = {(i, j): fake_chain(cs[i], cs[j], 1, great_circle_km(cs[i].location, cs[j].location)
                                 * rng.uniform(1.0, 1.3)) for i, j in itertools.combinations(range(n), 2)}
    net = DesignedNetwork(cs)
    for k in range(1, n):
        net.add(k - 1, k, chains[(k - 1, k)])
    weights = pair_weights(gravity_matrix(cs))
    step = augment_step(net, chains, weights)
    scores = {k: oracle_score(net, k, chains, weights) for k in chains if k not in net.edges}
    best = min(scores.values())
    assert step[1] == pytest.approx(best[0], rel=1e-12)
    assert scores[step[0]][0] == pytest.approx(best[0], rel=1e-12)


def test_augment_max_edges_equal_seed_returns_seed():
    cs, chains = square_world()
    seed = seed_network(cs, chains)
    out = augment(seed, gravity_matrix(cs), chains, max_edges=len(seed.edges))
    assert set(out.edges) == set(seed.edges)


def test_augment_monotone_on_fixture(design_world):
    cities, towers = design_world
    res = run_design(cities, towers, DesignConfig())
    hist = res.network.p95_history
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert len(hist) == len(res.network.edges) - len(res.seed.edges) + 1
    # tower count never drops as edges are added
    chains = design.center_chains(res.centers, build_tower_graph(towers, 70))
    counts = [augment(res.seed, res.traffic, chains, max_edges=m).total_towers()
              for m in range(len(res.seed.edges), len(res.network.edges) + 1)]
    assert counts == sorted(counts)


# routing, replication, cost

def test_route_two_centers():
    cs = [center("a", 40, -100, 2), center("b", 40, -99, 3)]
    net = DesignedNetwork(cs)
    net.add(0, 1, fake_chain(cs[0], cs[1], 2))
    t = gravity_matrix(cs)
    r = route_and_load(net, t)
    assert r.loads[(0, 1)] == pytest.approx(t.demand[0, 1] + t.demand[1, 0])


def test_route_triangle_takes_shorter_two_hop():
    cs = [center("a", 40, -100), center("b", 40.5, -99), center("c", 40, -98)]
    net = DesignedNetwork(cs)
    net.add(0, 1, fake_chain(cs[0], cs[1], 1, 100.0))
    net.add(1, 2, fake_chain(cs[1], cs[2], 1, 100.0))
    net.add(0, 2, fake_chain(cs[0], cs[2], 1, 250.0))
    t = gravity_matrix(cs)
    r = route_and_load(net, t)
    assert r.routes[(0, 2)] == [0, 1, 2]
    d = t.demand
    assert r.loads[(0, 2)] == 0
    assert r.loads[(0, 1)] == pytest.approx(d[0, 1] + d[1, 0] + d[0, 2] + d[2, 0])
    assert net.edges[(0, 1)].load_gbps == r.loads[(0, 1)]


def test_route_ties_prefer_fewer_hops():
    cs = [center("a", 40, -100), center("b", 40.5, -99), center("c", 40, -98)]
    net = DesignedNetwork(cs)
    net.add(0, 1, fake_chain(cs[0], cs[1], 1, 100.0))
    net.add(1, 2, fake_chain(cs[1], cs[2], 1, 100.0))
    net.add(0, 2, fake_chain(cs[0], cs[2], 1, 200.0))
    assert route_and_load(net, gravity_matrix(cs)).routes[(0, 2)] == [0, 2]


@given(st.integers(2, 7), st.integers(0, 10_000))
def test_load_conservation(n, seed):
    rng = np.random.default_rng(seed)
    cs = [center(f"c{k}", rng.uniform(30, 40), rng.uniform(-100, -90), rng.uniform(1, 50)) for k in range(n)]
    t = gravity_matrix(cs)
    full = DesignedNetwork(cs)
    for i, j in itertools.combinations(range(n), 2):
        full.add(i, j, fake_chain(cs[i], cs[j], 1))
    r = route_and_load(full, t)
    if all(len(p) == 2 for p in r.routes.values()):
        assert sum(r.loads.values()) == pytest.approx(t.demand.sum())
    path = DesignedNetwork(cs)
    for k in range(1, n):
        path.add(k - 1, k, fake_chain(cs[k - 1], cs[k], 1))
    assert sum(route_and_load(path, t).loads.values()) >= t.demand.sum() * (1 - 1e-12)


def test_replica_examples():
    assert replica_count(0.9) == 5
    assert replica_count(0.0) == 1
    assert replica_count(0.2) == 1
    assert replica_count(0.2000001) == 2
    with pytest.raises(ValueError):
        replica_count(1.0, capacity_gbps=0)


def test_replicate_multiplies_towers_and_is_idempotent():
    cs = [center("a", 40, -100, 2), center("b", 40, -99, 3)]
    net = DesignedNetwork(cs)
    net.add(0, 1, fake_chain(cs[0], cs[1], 4))
    route_and_load(net, gravity_matrix(cs, total_gbps=0.9))
    once = replicate(net)
    assert once.edges[(0, 1)].replicas == 5
    assert once.total_towers() == 20
    twice = replicate(once)
    assert twice.edges[(0, 1)].replicas == 5 and twice.total_towers() == 20


def test_cost_examples():
    r = cost_report(2526)
    assert r.install_usd == pytest.approx(252.6e6)
    assert r.annual_opex_usd == pytest.approx(95.988e6)
    assert r.amortized_annual_usd == pytest.approx(146.508e6)
    z = cost_report(0)
    assert (z.install_usd, z.annual_opex_usd, z.amortized_annual_usd) == (0, 0, 0)
    one = cost_report(1)
    assert (one.install_usd, one.annual_opex_usd, one.amortized_annual_usd) == (100_000, 38_000, 58_000)


@given(st.integers(0, 10**6), st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0.5, 50))
def test_cost_identities(n, inst, opex, years):
    r = cost_report(n, inst, opex, years)
    assert r.install_usd == pytest.approx(n * inst)
    assert r.amortized_annual_usd == pytest.approx(r.install_usd / years + r.annual_opex_usd)


# end to end

def test_run_design_deterministic_and_disconnects(design_world):
    cities, towers = design_world
    a = run_design(cities, towers, DesignConfig())
    b = run_design(cities, towers, DesignConfig(), threads=4)
    assert sorted(a.network.edges) == sorted(b.network.edges)
    assert a.cost == b.cost
    assert np.array_equal(a.stretch.stretch, b.stretch.stretch)
    assert a.stretch.stretch.min() >= 1 - 1e-9
    with pytest.raises(DisconnectedCenters) as info:
        run_design(cities, towers, DesignConfig(range_km=30))
    assert info.value.centers
