import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cspeed.fiberinfl import (DistanceProvider, FiberNetwork, all_pairs_fiber_km, inflation_table,
                              load_fiber_network, median_inflation)
from cspeed.geo import GeoPoint, destination, great_circle_km

O = GeoPoint(40.0, -100.0)


def floyd_oracle(ids, edges):
    d = {(a, b): (0.0 if a == b else float("inf")) for a in ids for b in ids}
    for a, b, km in edges:
        d[(a, b)] = d[(b, a)] = min(d[(a, b)], km)
    for k in ids:
        for i in ids:
            for j in ids:
                if d[(i, k)] + d[(k, j)] < d[(i, j)]:
                    d[(i, j)] = d[(i, k)] + d[(k, j)]
    return d


def test_single_edge():
    net = FiberNetwork({"a": O, "b": destination(O, 90, 100)}, [("a", "b", 130.0)])
    assert all_pairs_fiber_km(net) == {("a", "b"): 130.0}


def test_triangle_takes_min():
    nodes = {"a": O, "b": destination(O, 90, 100), "c": destination(O, 45, 60)}
    net = FiberNetwork(nodes, [("a", "b", 400.0), ("a", "c", 80.0), ("c", "b", 90.0)])
    assert all_pairs_fiber_km(net)[("a", "b")] == pytest.approx(170.0)
    net = FiberNetwork(nodes, [("a", "b", 150.0), ("a", "c", 80.0), ("c", "b", 90.0)])
    assert all_pairs_fiber_km(net)[("a", "b")] == pytest.approx(150.0)


def test_path_prefix_sums():
    lens = [10.0, 25.0, 7.5, 40.0, 12.0]
    ids = [f"n{k}" for k in range(6)]
    nodes = {k: destination(O, 90, 50 * i) for i, k in enumerate(ids)}
    net = FiberNetwork(nodes, [(ids[i], ids[i + 1], lens[i] * 10) for i in range(5)])
    d = all_pairs_fiber_km(net)
    pref = np.concatenate([[0], np.cumsum(lens) * 10])
    for i, j in itertools.combinations(range(6), 2):
        assert d[(ids[i], ids[j])] == pytest.approx(pref[j] - pref[i])


def test_disconnected_pair_excluded():
    nodes = {"a": O, "b": destination(O, 0, 10), "c": destination(O, 90, 10)}
    d = all_pairs_fiber_km(FiberNetwork(nodes, [("a", "b", 20.0)]))
    assert list(d) == [("a", "b")]


@given(st.integers(2, 9), st.integers(0, 10_000))
def test_matches_floyd_warshall_and_edge_monotone(n, seed):
    rng = np.random.default_rng(seed)
    ids = [f"v{k}" for k in range(n)]
    nodes = {k: GeoPoint(rng.uniform(30, 45), rng.uniform(-110, -80)) for k in ids}
    edges = []
    for a, b in itertools.combinations(ids, 2):
        if rng.random() < 0.4:
            edges.append((a, b, great_circle_km(nodes[a], nodes[b]) * rng.uniform(1.0, 2.0) + 1))
    net = FiberNetwork(nodes, edges)
    got = all_pairs_fiber_km(net)
    oracle = floyd_oracle(ids, edges)
    for a, b in itertools.combinations(ids, 2):
        if np.isfinite(oracle[(a, b)]):
            assert got[(a, b)] == pytest.approx(oracle[(a, b)], rel=1e-12)
        else:
            assert (a, b) not in got
    a, b = ids[0], ids[-1]
    more = all_pairs_fiber_km(FiberNetwork(nodes, edges + [(a, b, 5000.0)]))
    for k, v in got.items():
        assert more[k] <= v + 1e-9


def test_inflation_columns():
    b = destination(O, 90, 100)
    net = FiberNetwork({"a": O, "b": b}, [("a", "b", great_circle_km(O, b))])
    (row,) = inflation_table(net)
    assert row.fiber_inflation == pytest.approx(1.0)
    assert row.latency_adjusted_inflation == pytest.approx(1.5)
    assert row.road_km is None and row.road_inflation is None
    (row,) = inflation_table(net, DistanceProvider({("b", "a"): 120.0}))
    assert row.road_km == 120.0 and row.road_inflation == pytest.approx(120.0 / great_circle_km(O, b))


def test_provider_symmetric_and_missing_pair():
    nodes = {"a": O, "b": destination(O, 90, 100), "c": destination(O, 0, 100)}
    net = FiberNetwork(nodes, [("a", "b", 150.0), ("a", "c", 140.0)])
    prov = DistanceProvider({("a", "b"): 110.0})
    assert prov.get("b", "a") == 110.0
    rows = {(r.node_a, r.node_b): r for r in inflation_table(net, prov)}
    assert rows[("a", "c")].road_km is None
    assert rows[("a", "c")].fiber_km == 140.0
    with pytest.raises(ValueError):
        prov.add("b", "a", 111.0)
    with pytest.raises(ValueError):
        DistanceProvider({("a", "b"): 0.0})


def test_median_reference_value():
    # a fiber inflation of 1.733 corresponds to a latency inflation of about 2.6
    b = destination(O, 90, 1000)
    net = FiberNetwork({"a": O, "b": b}, [("a", "b", 1.733 * great_circle_km(O, b))])
    rows = inflation_table(net)
    assert median_inflation(rows) == pytest.approx(1.733)
    assert median_inflation(rows, "latency_adjusted_inflation") == pytest.approx(2.6, abs=0.001)


@given(st.integers(3, 10), st.integers(0, 10_000))
def test_adjusted_is_exactly_one_and_a_half_and_median_oracle(n, seed):
    rng = np.random.default_rng(seed)
    ids = [f"v{k}" for k in range(n)]
    nodes = {k: GeoPoint(rng.uniform(30, 45), rng.uniform(-110, -80)) for k in ids}
    edges = [(ids[k], ids[k + 1], great_circle_km(nodes[ids[k]], nodes[ids[k + 1]]) * rng.uniform(1, 3) + 0.1)
             for k in range(n - 1)]
    rows = inflation_table(FiberNetwork(nodes, edges))
    for r in rows:
        assert r.latency_adjusted_inflation == 1.5 * r.fiber_inflation
    vals = sorted(r.fiber_inflation for r in rows)
    m = len(vals)
    oracle = vals[m // 2] if m % 2 else (vals[m // 2 - 1] + vals[m // 2]) / 2
    assert median_inflation(rows) == pytest.approx(oracle, rel=1e-12)


def test_short_fiber_is_flagged_and_kept(caplog):
    b = destination(O, 90, 100)
    net = FiberNetwork({"a": O, "b": b}, [("a", "b", 90.0)])
    assert "shorter than geodesic" in caplog.text
    assert inflation_table(net)[0].fiber_inflation < 1


def test_load_files(tmp_path):
    (tmp_path / "n.csv").write_text("node_id,lat,lon\na,40,-100\nb,40,-99\n")
    (tmp_path / "e.csv").write_text("node_a,node_b,fiber_km\na,b,120\n")
    (tmp_path / "r.csv").write_text("node_a,node_b,road_km\nb,a,95\n")
    net = load_fiber_network(tmp_path / "n.csv", tmp_path / "e.csv")
    assert net.edges == [("a", "b", 120.0)]
    assert DistanceProvider.from_file(tmp_path / "r.csv").get("a", "b") == 95.0
    (tmp_path / "bad.csv").write_text("node_a,node_b,fiber_km\na,b,x\n")
    with pytest.raises(ValueError, match="bad.csv:2"):
        load_fiber_network(tmp_path / "n.csv", tmp_path / "bad.csv")
