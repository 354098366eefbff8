"""Population rasters, city lists, and population-within-radius queries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import DEFAULT_MODEL, GeoPoint, PropagationModel, great_circle_km_many, reachable_radius_km


class GridParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class MalformedHeaderError(GridParseError):
    pass


class NonNumericCellError(GridParseError):
    pass


class RowLengthError(GridParseError):
    pass


class PopulationGrid:
    """Immutable set of populated cell centers on a regular lat/lon lattice.

    Cells are kept sorted by latitude so a radius query only scans the
    latitude band that can possibly lie within the radius.
    """

    def __init__(self, lats, lons, population, cellsize: float | None = None,
                 model: PropagationModel = DEFAULT_MODEL):
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        pop = np.asarray(population, dtype=float)
        if not (lats.shape == lons.shape == pop.shape and lats.ndim == 1):
            raise ValueError("lats, lons and population must be 1-d arrays of equal length")
        if np.any(pop < 0) or not np.all(np.isfinite(pop)):
            raise ValueError("populations must be finite and non-negative")
        if np.any(np.abs(lats) > 90) or np.any(np.abs(lons) > 180):
            raise ValueError("cell centers out of range")
        order = np.argsort(lats, kind="stable")
        self.lats = lats[order]
        self.lons = lons[order]
        self.population = pop[order]
        for arr in (self.lats, self.lons, self.population):
            arr.flags.writeable = False
        self.cellsize = cellsize
        self.model = model

    def __len__(self) -> int:
        return len(self.population)

    @property
    def total(self) -> float:
        return float(self.population.sum())

    def band(self, center: GeoPoint, radius_km: float) -> slice:
        """Index slice of cells whose latitude can be within ``radius_km``."""
        dlat = math.degrees(radius_km / self.model.earth_radius)
        lo = np.searchsorted(self.lats, center.lat - dlat - 1e-9, side="left")
        hi = np.searchsorted(self.lats, center.lat + dlat + 1e-9, side="right")
        return slice(int(lo), int(hi))

    def indices_within(self, center: GeoPoint, radius_km: float) -> np.ndarray:
        if radius_km < 0:
            raise ValueError(f"radius must be non-negative, got {radius_km}")
        sl = self.band(center, radius_km)
        d = great_circle_km_many(center, self.lats[sl], self.lons[sl], self.model)
        return np.nonzero(d <= radius_km)[0] + sl.start


def load_grid(path, format: str | None = None, model: PropagationModel = DEFAULT_MODEL) -> PopulationGrid:
    """Load an Esri ASCII grid (``.asc``) or a ``lat,lon,population`` CSV."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "esri"
    if format in ("esri", "esri-ascii-grid", "asc"):
        return _load_esri(path, model)
    if format == "csv":
        return _load_grid_csv(path, model)
    raise ValueError(f"unknown grid format {format!r}")


_HEADER_KEYS = {"ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value"}


def _load_esri(path: Path, model) -> PopulationGrid:
    header: dict[str, float] = {}
    lats, lons, pops = [], [], []
    with open(path) as fh:
        lines = fh.readlines()
    lineno = 0
    while lineno < len(lines):
        parts = lines[lineno].split()
        if not parts:
            lineno += 1
            continue
        key = parts[0].lower()
        if key[0].isdigit() or key[0] in "+-.":
            break
        if key not in _HEADER_KEYS or len(parts) != 2:
            raise MalformedHeaderError(path, lineno + 1, f"unexpected header line {lines[lineno].strip()!r}")
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise MalformedHeaderError(path, lineno + 1, f"non-numeric header value for {key}") from None
        lineno += 1
    for required in ("ncols", "nrows", "cellsize"):
        if required not in header:
            raise MalformedHeaderError(path, lineno + 1, f"missing header key {required}")
    if "xllcorner" in header:
        x0 = header["xllcorner"] + header["cellsize"] / 2
    elif "xllcenter" in header:
        x0 = header["xllcenter"]
    else:
        raise MalformedHeaderError(path, lineno + 1, "missing header key xllcorner")
    if "yllcorner" in header:
        y0 = header["yllcorner"] + header["cellsize"] / 2
    elif "yllcenter" in header:
        y0 = header["yllcenter"]
    else:
        raise MalformedHeaderError(path, lineno + 1, "missing header key yllcorner")
    ncols, nrows, cs = int(header["ncols"]), int(header["nrows"]), header["cellsize"]
    if ncols <= 0 or nrows <= 0 or cs <= 0:
        raise MalformedHeaderError(path, lineno, "ncols, nrows and cellsize must be positive")
    nodata = header.get("nodata_value")

    row = 0
    for i in range(lineno, len(lines)):
        parts = lines[i].split()
        if not parts:
            continue
        if row >= nrows:
            raise RowLengthError(path, i + 1, f"more than nrows={nrows} data rows")
        if len(parts) != ncols:
            raise RowLengthError(path, i + 1, f"expected {ncols} values, found {len(parts)}")
        try:
            values = np.array([float(v) for v in parts])
        except ValueError:
            bad = next(v for v in parts if not _is_float(v))
            raise NonNumericCellError(path, i + 1, f"non-numeric cell {bad!r}") from None
        keep = np.isfinite(values)
        if nodata is not None:
            keep &= values != nodata
        if np.any(values[keep] < 0):
            raise NonNumericCellError(path, i + 1, "negative population")
        lat = y0 + (nrows - 1 - row) * cs
        cols = np.nonzero(keep)[0]
        lats.extend([lat] * len(cols))
        lons.extend((x0 + cols * cs).tolist())
        pops.extend(values[cols].tolist())
        row += 1
    if row != nrows:
        raise RowLengthError(path, len(lines), f"expected {nrows} data rows, found {row}")
    lons = [(lon + 180.0) % 360.0 - 180.0 if lon >= 180.0 else lon for lon in lons]
    return PopulationGrid(lats, lons, pops, cellsize=cs, model=model)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _load_grid_csv(path: Path, model) -> PopulationGrid:
    lats, lons, pops = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = {"lat", "lon", "population"} - set(reader.fieldnames or [])
        if missing:
            raise MalformedHeaderError(path, 1, f"missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                lat, lon, p = float(rec["lat"]), float(rec["lon"]), float(rec["population"])
            except (TypeError, ValueError):
                raise NonNumericCellError(path, lineno, "non-numeric value") from None
            if p < 0:
                raise NonNumericCellError(path, lineno, "negative population")
            lats.append(lat)
            lons.append(lon)
            pops.append(p)
    return PopulationGrid(lats, lons, pops, cellsize=_infer_cellsize(lats), model=model)


def _infer_cellsize(lats) -> float | None:
    u = np.unique(np.round(np.asarray(lats, dtype=float), 9))
    if len(u) < 2:
        return None
    return float(np.min(np.diff(u)))


@dataclass(frozen=True)
class City:
    name: str
    location: GeoPoint
    population: float


def load_cities(path) -> list[City]:
    """Read a ``name,lat,lon,population`` CSV."""
    cities: list[City] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = {"name", "lat", "lon", "population"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            name = rec["name"].strip()
            if name in seen:
                raise ValueError(f"{path}:{lineno}: duplicate city name {name!r}")
            try:
                loc = GeoPoint(float(rec["lat"]), float(rec["lon"]))
                pop = float(rec["population"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if pop < 0:
                raise ValueError(f"{path}:{lineno}: negative population")
            seen.add(name)
            cities.append(City(name, loc, pop))
    return cities


def population_within_radius(grid: PopulationGrid, center: GeoPoint, radius_km: float) -> float:
    if radius_km >= math.pi * grid.model.earth_radius:
        return grid.total
    idx = grid.indices_within(center, radius_km)
    return float(grid.population[idx].sum())


def population_in_annulus(grid: PopulationGrid, center: GeoPoint, inner_km: float, outer_km: float) -> float:
    """Population with inner_km < distance <= outer_km."""
    if not 0 <= inner_km <= outer_km:
        raise ValueError("need 0 <= inner_km <= outer_km")
    sl = grid.band(center, outer_km)
    d = great_circle_km_many(center, grid.lats[sl], grid.lons[sl], grid.model)
    mask = (d > inner_km) & (d <= outer_km)
    return float(grid.population[sl][mask].sum())


def lower_median(values) -> float:
    s = sorted(values)
    if not s:
        raise ValueError("median of empty sequence")
    return s[(len(s) - 1) // 2]


def community_size_curve(grid: PopulationGrid, centers: list[City] | list[GeoPoint], rtt_budget_ms: float,
                         speed_fractions: list[float]) -> list[tuple[float, float]]:
    """Median (over centers) population reachable within the RTT budget, per speed.

    Returns ``(speed_fraction, median_population)`` rows in input order.
    """
    if not centers:
        raise ValueError("community_size_curve needs at least one center")
    points = [c.location if isinstance(c, City) else c for c in centers]
    rows = []
    for f in speed_fractions:
        r = reachable_radius_km(rtt_budget_ms, f, grid.model)
        rows.append((f, lower_median(population_within_radius(grid, p, r) for p in points)))
    return rows
