"""Run configuration: plain ``key=value`` text, ``#`` comments."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


@dataclass
class RunConfig:
    # network design
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
    coverage_radius_km: float = 100.0
    fiber_factor: float = 2.0 / 3.0
    # coverage and placement
    rtt_budget_ms: float = 30.0
    speed_fractions: str = "0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
    placement_speed: float = 1.0
    coverage_target: float = 0.99
    latency_targets: str = "10,20,30,40,50,75,100"
    tradeoff_speeds: str = "0.03125,0.25,1.0"
    restarts: int = 5
    candidate_thin_deg: float = 1.0
    # trace analysis
    trace_bin: str = "page_size_1KB"
    tod_bins: int = 12
    min_rtt_ms: float = 3.0
    tod_group: str = "country_tz"
    # inputs
    grid: str = ""
    grid_format: str = ""
    cities: str = ""
    candidates: str = ""
    towers: str = ""
    centers: str = ""
    edges: str = ""
    fiber_nodes: str = ""
    fiber_edges: str = ""
    road_km: str = ""
    traces: str = ""
    cdn: str = ""

    @property
    def speed_list(self) -> list[float]:
        return _floats(self.speed_fractions)

    @property
    def latency_target_list(self) -> list[float]:
        return _floats(self.latency_targets)

    @property
    def tradeoff_speed_list(self) -> list[float]:
        return _floats(self.tradeoff_speeds)

    def set(self, key: str, value: str) -> None:
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(self, key)
        try:
            if isinstance(current, bool):
                low = value.strip().lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                parsed = low in ("true", "1", "yes")
            elif isinstance(current, int):
                parsed = int(value)
            elif isinstance(current, float):
                parsed = float(value)
            else:
                parsed = value.strip()
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}") from None
        setattr(self, key, parsed)

    def dump(self) -> str:
        return "".join(f"{f.name}={_fmt(getattr(self, f.name))}\n" for f in fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()[:12]

    def require(self, *keys: str) -> None:
        """Check that the named input paths are set and exist."""
        for k in keys:
            v = getattr(self, k)
            if not v:
                raise ConfigError(f"config key {k} (input path) is required for this command")
            if not Path(v).is_file():
                raise ConfigError(f"{k}: no such file: {v}")

    def check_optional(self, *keys: str) -> None:
        for k in keys:
            v = getattr(self, k)
            if v and not Path(v).is_file():
                raise ConfigError(f"{k}: no such file: {v}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def parse_config_text(text: str, cfg: RunConfig | None = None, source: str = "<config>") -> RunConfig:
    cfg = cfg or RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            cfg.set(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg = parse_config_text(p.read_text(), source=str(path))
    # relative input paths resolve against the config file's directory
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in _PATH_KEYS and v and not Path(v).is_absolute():
            setattr(cfg, f.name, str(p.parent / v))
    return cfg


_PATH_KEYS = {"grid", "cities", "candidates", "towers", "centers", "edges", "fiber_nodes", "fiber_edges",
              "road_km", "traces", "cdn"}
