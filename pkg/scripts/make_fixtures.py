"""Write the synthetic desk-scale world to a directory.

    python scripts/make_fixtures.py fixtures/

Produces cities.csv, towers.csv (with a few non-Constructed rows), grid.asc,
fiber_nodes.csv, fiber_edges.csv, road_km.csv, traces.csv, cdn.csv and a
ready-to-use run.cfg.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from cspeed import synthetic, tracelat
from cspeed.geo import GeoPoint, great_circle_km


def write_cities(path, cities):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "lat", "lon", "population"])
        for c in cities:
            w.writerow([c.name, f"{c.location.lat:.6f}", f"{c.location.lon:.6f}", int(c.population)])


def write_towers(path, towers, n_dismantled=5):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tower_id", "lat", "lon", "status"])
        for t in towers:
            w.writerow([t.id, f"{t.location.lat:.7f}", f"{t.location.lon:.7f}", "Constructed"])
        for k in range(n_dismantled):
            w.writerow([f"X{k:03d}", "39.0", f"{-95.0 + k * 0.1:.1f}", "Dismantled"])


def write_grid(path, lat=(34.0, 44.0), lon=(-99.0, -83.0), cellsize=0.25, seed=0):
    rng = np.random.default_rng(seed)
    nrows = int(round((lat[1] - lat[0]) / cellsize))
    ncols = int(round((lon[1] - lon[0]) / cellsize))
    vals = rng.integers(0, 5000, size=(nrows, ncols))
    vals[rng.random((nrows, ncols)) < 0.05] = -9999
    with open(path, "w") as fh:
        fh.write(f"ncols {ncols}\nnrows {nrows}\nxllcorner {lon[0]}\nyllcorner {lat[0]}\n"
                 f"cellsize {cellsize}\nNODATA_value -9999\n")
        for row in vals:
            fh.write(" ".join(str(v) for v in row) + "\n")


def write_fiber(out: Path, seed=0):
    rng = np.random.default_rng(seed)
    nodes = {f"n{k}": GeoPoint(rng.uniform(30, 45), rng.uniform(-120, -75)) for k in range(12)}
    ids = sorted(nodes)
    edges = [(ids[k], ids[k + 1]) for k in range(len(ids) - 1)] + [(ids[0], ids[5]), (ids[3], ids[9]), (ids[2], ids[11])]
    with open(out / "fiber_nodes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "lat", "lon"])
        for k in ids:
            w.writerow([k, f"{nodes[k].lat:.5f}", f"{nodes[k].lon:.5f}"])
    with open(out / "fiber_edges.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_a", "node_b", "fiber_km"])
        for a, b in edges:
            w.writerow([a, b, f"{great_circle_km(nodes[a], nodes[b]) * rng.uniform(1.1, 1.6):.3f}"])
    with open(out / "road_km.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_a", "node_b", "road_km"])
        for a, b in edges[:6]:
            w.writerow([a, b, f"{great_circle_km(nodes[a], nodes[b]) * rng.uniform(1.05, 1.25):.3f}"])


def write_traces(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=tracelat.TRACE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(tracelat.trace_row(r))


def write_cdn(path, seed=0):
    rng = np.random.default_rng(seed)
    day0 = 1.4e9 - (1.4e9 % 86400)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["server_id", "client_id", "rtt_ms", "timestamp_epoch_s", "country", "tz"])
        for pair in range(40):
            base = rng.uniform(2.0, 80.0)
            country, tz = [("US", "CST"), ("US", "EST"), ("GB", "Europe/London")][pair % 3]
            for _ in range(int(rng.integers(20, 80))):
                t = day0 + rng.uniform(0, 86400)
                w.writerow([f"s{pair % 7}", f"c{pair}", f"{base + rng.exponential(3.0):.3f}", f"{t:.0f}", country, tz])


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out", type=Path)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    cities, towers = synthetic.design_fixture(args.seed)
    write_cities(args.out / "cities.csv", cities)
    write_towers(args.out / "towers.csv", towers)
    write_grid(args.out / "grid.asc")
    write_fiber(args.out)
    write_traces(args.out / "traces.csv", synthetic.synthetic_traces())
    write_cdn(args.out / "cdn.csv")
    (args.out / "run.cfg").write_text(
        "# synthetic desk-scale world\n"
        "cities=cities.csv\ntowers=towers.csv\ngrid=grid.asc\n"
        "fiber_nodes=fiber_nodes.csv\nfiber_edges=fiber_edges.csv\nroad_km=road_km.csv\n"
        "traces=traces.csv\ncdn=cdn.csv\n"
        "latency_targets=5,10,20\nrestarts=2\n")
    print(f"wrote fixtures to {args.out}")


if __name__ == "__main__":
    main()
