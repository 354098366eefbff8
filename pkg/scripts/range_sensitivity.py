"""Tower count and stretch of the designed network as radio range shrinks.

    python scripts/range_sensitivity.py --ranges 70,60,50,40,30
"""

import argparse
import time

from cspeed import synthetic
from cspeed.design import DesignConfig, DisconnectedCenters, run_design


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ranges", default="70,60,50,40,30")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--cities", type=int, default=10)
    ap.add_argument("--towers", type=int, default=500)
    args = ap.parse_args()
    cities, towers = synthetic.design_fixture(args.seed, args.cities, args.towers)
    print("range_km,edges,towers,median_stretch,p95_stretch,seconds")
    for r in (float(x) for x in args.ranges.split(",")):
        t0 = time.perf_counter()
        try:
            res = run_design(cities, towers, DesignConfig(range_km=r))
        except DisconnectedCenters as exc:
            print(f"{r:g},disconnected: {', '.join(exc.centers)}")
            continue
        print(f"{r:g},{len(res.network.edges)},{res.cost.tower_count},{res.stretch.median:.4f},"
              f"{res.stretch.p95:.4f},{time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
