"""Command-line front end.

    cspeed [--config PATH] [--out DIR] [--seed N] [--threads N] [--set KEY=VALUE ...] COMMAND

Commands: coverage, place, tradeoff, design, evaluate, fiber, trace.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields

import numpy as np

from . import design as dsg
from . import evalstretch, fiberinfl, placement, popgrid, tracelat
from .config import ConfigError, RunConfig, load_config
from .geo import GeoPoint, PropagationModel, reachable_radius_km
from .report import Outputs, fmt, point_feature
from .towers import TowerChain, TowerParseError, load_towers

log = logging.getLogger("cspeed")

COMMANDS = ("coverage", "place", "tradeoff", "design", "evaluate", "fiber", "trace")


def _model(cfg: RunConfig) -> PropagationModel:
    return PropagationModel(fiber_factor=cfg.fiber_factor)


def _grid(cfg: RunConfig):
    return popgrid.load_grid(cfg.grid, cfg.grid_format or None, _model(cfg))


def _candidates(cfg: RunConfig, grid) -> list[GeoPoint]:
    if cfg.candidates:
        with open(cfg.candidates, newline="") as fh:
            rows = csv.DictReader(r for r in fh if not r.startswith("#"))
            return [GeoPoint(float(r["lat"]), float(r["lon"])) for r in rows]
    return placement.default_candidates(grid, cfg.candidate_thin_deg)


def cmd_coverage(cfg: RunConfig, out: Outputs, args) -> list[str]:
    cfg.require("grid", "cities")
    grid = _grid(cfg)
    cities = popgrid.load_cities(cfg.cities)
    if not cities:
        raise ValueError(f"{cfg.cities}: no cities")
    curve = popgrid.community_size_curve(grid, cities, cfg.rtt_budget_ms, cfg.speed_list)
    out.csv("community_size.csv", ["speed_fraction", "reachable_radius_km", "median_population"],
            [(f, reachable_radius_km(cfg.rtt_budget_ms, f, grid.model), p) for f, p in curve])
    table = []
    for c in cities:
        for f in cfg.speed_list:
            r = reachable_radius_km(cfg.rtt_budget_ms, f, grid.model)
            table.append((c.name, c.location.lat, c.location.lon, f, popgrid.population_within_radius(grid, c.location, r)))
    out.csv("coverage_table.csv", ["name", "lat", "lon", "speed_fraction", "population"], table)
    return [f"grid cells={len(grid)} total_population={fmt(grid.total)}",
            *(f"speed={fmt(f)} median_population={fmt(p)}" for f, p in curve)]


def cmd_place(cfg: RunConfig, out: Outputs, args) -> list[str]:
    cfg.require("grid")
    cfg.check_optional("candidates")
    grid = _grid(cfg)
    problem = placement.PlacementProblem(grid, _candidates(cfg, grid), cfg.rtt_budget_ms,
                                         cfg.placement_speed, cfg.coverage_target)
    sol = placement.place_greedy(problem, seed=args.seed, restarts=cfg.restarts)
    if not sol.feasible:
        out.keyvalue("placement_summary.txt", {"feasible": False, "max_achievable_coverage": sol.max_achievable})
        out.csv("placement.csv", ["rank", "lat", "lon", "cumulative_coverage"], [])
        out.geojson("sites.geojson", [])
        return [f"infeasible: at most {fmt(sol.max_achievable)} of the population is reachable"]
    out.csv("placement.csv", ["rank", "lat", "lon", "cumulative_coverage"],
            [(k + 1, s.lat, s.lon, h) for k, (s, h) in enumerate(zip(sol.sites, sol.history))])
    out.geojson("sites.geojson", [point_feature(s.lat, s.lon, {"rank": k + 1}) for k, s in enumerate(sol.sites)])
    out.keyvalue("placement_summary.txt", {"feasible": True, "num_sites": len(sol.sites),
                                           "coverage_fraction": sol.coverage_fraction,
                                           "radius_km": problem.radius_km})
    return [f"sites={len(sol.sites)} coverage={fmt(sol.coverage_fraction)} radius_km={fmt(problem.radius_km)}"]


def cmd_tradeoff(cfg: RunConfig, out: Outputs, args) -> list[str]:
    cfg.require("grid")
    cfg.check_optional("candidates")
    grid = _grid(cfg)
    rows = placement.tradeoff_curve(grid, _candidates(cfg, grid), cfg.latency_target_list,
                                    cfg.tradeoff_speed_list, cfg.coverage_target, seed=args.seed,
                                    restarts=cfg.restarts, threads=args.threads)
    out.csv("tradeoff.csv", ["latency_target_ms", "speed_fraction", "num_sites", "coverage_fraction"],
            [(r.latency_target_ms, r.speed_fraction, "infeasible" if r.num_sites is None else r.num_sites,
              r.coverage_fraction) for r in rows])
    return [f"target={fmt(r.latency_target_ms)} speed={fmt(r.speed_fraction)} sites="
            f"{'infeasible' if r.num_sites is None else r.num_sites}" for r in rows]


def _design_config(cfg: RunConfig) -> dsg.DesignConfig:
    names = {f.name for f in fields(dsg.DesignConfig)}
    return dsg.DesignConfig(**{k: getattr(cfg, k) for k in names})


def _emit_network(out: Outputs, net: dsg.DesignedNetwork) -> None:
    names = net.names
    out.csv("centers.csv", ["name", "lat", "lon", "population", "member_cities"],
            [(c.name, c.location.lat, c.location.lon, c.population, ";".join(c.members)) for c in net.centers])
    edges = net.sorted_edges()
    out.csv("edges.csv", ["city_a", "city_b", "replicas", "towers", "length_km", "load_gbps"],
            [(names[e.a], names[e.b], e.replicas, e.towers, e.length_km, e.load_gbps) for e in edges])
    feats = [point_feature(c.location.lat, c.location.lon, {"name": c.name, "population": c.population})
             for c in net.centers]
    feats += [e.chain.to_geojson({"city_a": names[e.a], "city_b": names[e.b], "replicas": e.replicas})
              for e in edges]
    out.geojson("network.geojson", feats)


def _emit_stretch(out: Outputs, dist: evalstretch.StretchDistribution, summary: dict) -> list[str]:
    out.csv("stretch_cdf.csv", ["stretch", "cumulative_byte_fraction"], dist.cdf())
    out.keyvalue("summary.txt", summary)
    out.csv("summary.csv", ["key", "value"], list(summary.items()))
    return [f"{k}={fmt(v)}" for k, v in summary.items()]


def cmd_design(cfg: RunConfig, out: Outputs, args) -> list[str]:
    cfg.require("cities", "towers")
    cfg.check_optional("grid")
    dcfg = _design_config(cfg)
    lines = ["config: " + " ".join(f"{k}={fmt(getattr(dcfg, k))}" for k in (
        "range_km", "capacity_gbps", "utilization", "total_gbps", "coalesce_km",
        "install_usd", "opex_usd", "amortize_years", "max_edges", "min_p95_gain"))]
    cities = popgrid.load_cities(cfg.cities)
    registry = load_towers(cfg.towers)
    lines.append(f"towers kept={registry.kept} dropped={registry.dropped}")
    res = dsg.run_design(cities, registry, dcfg, threads=args.threads)
    _emit_network(out, res.network)
    out.csv("augment.csv", ["edges", "p95_stretch"],
            [(len(res.seed.edges) + k, p) for k, p in enumerate(res.network.p95_history)])
    out.keyvalue("cost.txt", {"tower_count": res.cost.tower_count, "install_usd": res.cost.install_usd,
                              "annual_opex_usd": res.cost.annual_opex_usd,
                              "amortized_annual_usd": res.cost.amortized_annual_usd,
                              "amortization_years": res.cost.amortization_years})
    summary = evalstretch.summary(res.stretch, res.network, res.cost)
    if cfg.grid:
        grid = _grid(cfg)
        pop, frac = evalstretch.coverage_within(res.centers, grid, cfg.coverage_radius_km)
        summary.update(covered_population=pop, covered_fraction=frac)
    return lines + _emit_stretch(out, res.stretch, summary)


def _load_network(cfg: RunConfig) -> dsg.DesignedNetwork:
    centers = []
    with open(cfg.centers, newline="") as fh:
        for r in csv.DictReader(x for x in fh if not x.startswith("#")):
            members = tuple(m for m in (r.get("member_cities") or "").split(";") if m)
            centers.append(dsg.PopulationCenter(r["name"], GeoPoint(float(r["lat"]), float(r["lon"])),
                                                float(r["population"]), members))
    net = dsg.DesignedNetwork(centers, capacity_gbps=cfg.capacity_gbps, utilization=cfg.utilization)
    with open(cfg.edges, newline="") as fh:
        for r in csv.DictReader(x for x in fh if not x.startswith("#")):
            i, j = net.index_of(r["city_a"]), net.index_of(r["city_b"])
            reps = int(r["replicas"])
            chain = TowerChain(centers[i].location, centers[j].location, (), (), float(r["length_km"]),
                               int(r["towers"]) // max(1, reps))
            net.add(i, j, chain)
            e = net.edges[(min(i, j), max(i, j))]
            e.replicas, e.load_gbps = reps, float(r["load_gbps"])
    return net


def cmd_evaluate(cfg: RunConfig, out: Outputs, args) -> list[str]:
    cfg.require("centers", "edges")
    cfg.check_optional("grid")
    net = _load_network(cfg)
    if not net.is_connected():
        raise dsg.DisconnectedCenters([n for n, d in zip(net.names, net.lengths()[0]) if not np.isfinite(d)])
    traffic = dsg.gravity_matrix(net.centers, cfg.total_gbps)
    dist = evalstretch.evaluate(net, traffic, cfg.byte_weighted)
    report = dsg.cost(net, cfg.install_usd, cfg.opex_usd, cfg.amortize_years, cfg.unique_towers)
    summary = evalstretch.summary(dist, net, report)
    if cfg.grid:
        pop, frac = evalstretch.coverage_within(net.centers, _grid(cfg), cfg.coverage_radius_km)
        summary.update(covered_population=pop, covered_fraction=frac)
    return _emit_stretch(out, dist, summary)


def cmd_fiber(cfg: RunConfig, out: Outputs, args) -> list[str]:
    cfg.require("fiber_nodes", "fiber_edges")
    cfg.check_optional("road_km")
    net = fiberinfl.load_fiber_network(cfg.fiber_nodes, cfg.fiber_edges)
    provider = fiberinfl.DistanceProvider.from_file(cfg.road_km) if cfg.road_km else None
    rows = fiberinfl.inflation_table(net, provider, _model(cfg))
    out.csv("fiber_inflation.csv", ["node_a", "node_b", "geodesic_km", "fiber_km", "fiber_inflation", "road_km",
                                    "road_inflation", "latency_adjusted_inflation"],
            [(r.node_a, r.node_b, r.geodesic_km, r.fiber_km, r.fiber_inflation, r.road_km, r.road_inflation,
              r.latency_adjusted_inflation) for r in rows])
    summary = {"pairs": len(rows)}
    if rows:
        summary["median_fiber_inflation"] = fiberinfl.median_inflation(rows)
        summary["median_latency_adjusted_inflation"] = fiberinfl.median_inflation(rows, "latency_adjusted_inflation")
        if any(r.road_inflation is not None for r in rows):
            summary["median_road_inflation"] = fiberinfl.median_inflation(rows, "road_inflation")
    out.keyvalue("fiber_summary.txt", summary)
    return [f"{k}={fmt(v)}" for k, v in summary.items()]


METRICS = ["dns", "handshake", "request_response", "transfer", "total", "min_ping", "median_ping", "router_path"]


def cmd_trace(cfg: RunConfig, out: Outputs, args) -> list[str]:
    if not cfg.traces and not cfg.cdn:
        raise ConfigError("trace needs config key traces and/or cdn")
    cfg.check_optional("traces", "cdn")
    model = _model(cfg)
    lines = []
    if cfg.traces:
        records = tracelat.load_traces(cfg.traces)
        kept, report = tracelat.cull_anomalies(records, model)
        rows = []
        for k, r in enumerate(kept):
            vals = tracelat.metric_values(r, model)
            comp = tracelat.inflation_components(r, model)
            rows.append([k, r.c_latency_ms(model)] + [vals.get(m) for m in METRICS]
                        + [comp.server_processing_ms, comp.server_processing_clamped])
        out.csv("trace_inflation.csv", ["record", "c_latency_ms"] + METRICS
                + ["server_processing_ms", "server_processing_clamped"], rows)
        bins = tracelat.binned_medians(kept, cfg.trace_bin, METRICS, model)
        out.csv("trace_bins.csv", ["bin", "count"] + METRICS,
                [[b.bin, b.count] + [b.medians.get(m) for m in METRICS] for b in bins])
        summary = {"records": len(records), "kept": report.kept, "dropped": report.dropped}
        summary.update({f"dropped_{k}": v for k, v in sorted(report.reasons.items())})
        if kept:
            meds = tracelat.global_medians(kept, METRICS, model)
            summary.update({f"median_{k}": v for k, v in meds.items()})
            if "min_ping" in meds:
                norm = tracelat.normalize_by_ping({k: meds[k] for k in ("dns", "handshake", "transfer") if k in meds},
                                                  meds["min_ping"])
                summary.update({f"ping_normalized_{k}": v for k, v in norm.items()})
        out.keyvalue("trace_summary.txt", summary)
        lines += [f"{k}={fmt(v)}" for k, v in summary.items()]
    if cfg.cdn:
        samples = tracelat.load_cdn_samples(cfg.cdn)
        stats = tracelat.timeofday_stats(samples, cfg.tod_bins, cfg.min_rtt_ms, cfg.tod_group)
        rows, drows = [], []
        for g, s in stats.items():
            label = "/".join(g)
            for b in range(cfg.tod_bins):
                rows.append((label, b, s.tracked_pairs, s.median_ms[b], s.p90_ms[b]))
                drows.append((label, b, s.delta_pairs[b], s.delta_max_median_ms[b]))
            lines += [f"{label}: {d}" for d in s.diagnostics]
        if not stats:
            lines.append("no qualifying host pairs")
        out.csv("tod_rtt.csv", ["group", "bin", "pairs", "median_rtt_ms", "p90_rtt_ms"], rows)
        out.csv("tod_delta_max.csv", ["group", "bin", "pairs", "median_delta_max_ms"], drows)
    return lines


HANDLERS = {"coverage": cmd_coverage, "place": cmd_place, "tradeoff": cmd_tradeoff, "design": cmd_design,
            "evaluate": cmd_evaluate, "fiber": cmd_fiber, "trace": cmd_trace}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cspeed", description="Speed-of-light network planning and latency analysis.")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=0, help="tie-breaking seed for placement")
    p.add_argument("--threads", type=int, default=1, help="maximum worker threads")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("command", choices=COMMANDS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            cfg.set(*item.split("=", 1))
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        out = Outputs(cfg.digest())
        lines = HANDLERS[args.command](cfg, out, args)
        out.write(args.out)
    except dsg.DisconnectedCenters as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, OSError, KeyError, TowerParseError, popgrid.GridParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
