"""Population reachable within an RTT budget as a function of signal speed.

Uses a uniform synthetic grid, so the curve shows the geometry alone: in the
plane the reachable population grows with the square of the speed.

    python scripts/coverage_curve.py --budget 30
"""

import argparse

from cspeed import synthetic
from cspeed.geo import GeoPoint, reachable_radius_km
from cspeed.popgrid import population_within_radius


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--budget", type=float, default=30.0, help="RTT budget, ms")
    ap.add_argument("--speeds", default="0.05,0.1,0.2,0.3,0.4,0.5")
    ap.add_argument("--cellsize", type=float, default=0.25)
    args = ap.parse_args()
    grid = synthetic.uniform_grid(lat=(-25.0, 25.0), lon=(-25.0, 25.0), cellsize=args.cellsize)
    origin = GeoPoint(0.0, 0.0)
    speeds = [float(s) for s in args.speeds.split(",")]
    base = None
    print("speed_fraction,radius_km,population,ratio_to_slowest")
    for f in speeds:
        r = reachable_radius_km(args.budget, f)
        pop = population_within_radius(grid, origin, r)
        base = base or pop
        print(f"{f:g},{r:.1f},{pop:.6g},{pop / base:.2f}")


if __name__ == "__main__":
    main()
