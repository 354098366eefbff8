"""Deterministic CSV / GeoJSON / key=value writers.

CSV rows use lat,lon order; GeoJSON coordinates are [lon, lat] as the format
requires. Floats are written with 6 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

from . import __version__


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


class Outputs:
    """Collects output files in memory and writes them only when a command succeeds."""

    def __init__(self, config_digest: str):
        self.digest = config_digest
        self.files: dict[str, str] = {}

    def header(self) -> str:
        return f"# cspeed {__version__} config={self.digest}\n"

    def csv(self, name: str, columns: list[str], rows) -> None:
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) for x in row])
        self.files[name] = buf.getvalue()

    def keyvalue(self, name: str, items: dict) -> None:
        self.files[name] = self.header() + "".join(f"{k}={fmt(v)}\n" for k, v in items.items())

    def geojson(self, name: str, features: list[dict]) -> None:
        doc = {"type": "FeatureCollection", "features": features}
        self.files[name] = json.dumps(doc, sort_keys=True, indent=1) + "\n"

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        try:
            for name in sorted(self.files):
                p = out / name
                tmp = p.with_suffix(p.suffix + ".tmp")
                tmp.write_text(self.files[name])
                os.replace(tmp, p)
                written.append(p)
        except OSError:
            for p in written:
                p.unlink(missing_ok=True)
            raise
        return written


def point_feature(lat: float, lon: float, properties: dict) -> dict:
    return {"type": "Feature", "geometry": {"type": "Point", "coordinates": [lon, lat]},
            "properties": properties}
