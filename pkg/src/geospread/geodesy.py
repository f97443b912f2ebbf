"""Great-circle distance, geographic midpoint, and nearest-centroid region assignment.

All functions are pure and stateless. Distances are kilometers on a sphere of
mean radius 6371 km.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DegenerateMidpoint, NoRegions, UnreadableFile

EARTH_RADIUS_KM = 6371.0

_MIDPOINT_EPS = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate pair; longitude is normalized into [-180, 180)."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        lon = ((self.lon + 180.0) % 360.0) - 180.0
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(lon))


@dataclass(frozen=True)
class Region:
    """A named spatial bucket (state or country), optionally with a centroid."""

    key: str
    centroid: GeoPoint | None = None

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("region key must be non-empty")


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in kilometers."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    # rounding can push h a hair outside [0, 1]; asin would then blow up
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def midpoint(points: Sequence[GeoPoint]) -> GeoPoint:
    """Geographic midpoint via the normalized mean of unit 3-vectors.

    Uses exact (fsum) accumulation, so the result is independent of input
    order. Raises DegenerateMidpoint when the mean vector vanishes, e.g. for
    a balanced antipodal pair; the caller decides the fallback.
    """
    if not points:
        raise ValueError("midpoint of an empty point set")
    xs, ys, zs = [], [], []
    for p in points:
        phi = math.radians(p.lat)
        lam = math.radians(p.lon)
        xs.append(math.cos(phi) * math.cos(lam))
        ys.append(math.cos(phi) * math.sin(lam))
        zs.append(math.sin(phi))
    n = len(points)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    mz = math.fsum(zs) / n
    norm = math.sqrt(mx * mx + my * my + mz * mz)
    if norm < _MIDPOINT_EPS:
        raise DegenerateMidpoint(f"mean vector norm {norm:.3e} below {_MIDPOINT_EPS:.0e}")
    lat = math.degrees(math.atan2(mz, math.hypot(mx, my)))
    lon = math.degrees(math.atan2(my, mx))
    return GeoPoint(lat, lon)


def assign_region(point: GeoPoint, regions: Sequence[Region]) -> Region:
    """Nearest-centroid region for a point; ties broken by lexicographic key."""
    if not regions:
        raise NoRegions("no regions supplied")
    best: tuple[float, str, Region] | None = None
    for region in regions:
        if region.centroid is None:
            continue
        cand = (haversine(point, region.centroid), region.key, region)
        if best is None or cand[:2] < best[:2]:
            best = cand
    if best is None:
        raise NoRegions("no region has a centroid")
    return best[2]


def load_region_table(path: str) -> list[Region]:
    """Read a region centroid table: CSV with header columns key, lat, lon."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"key", "lat", "lon"} <= set(reader.fieldnames):
            raise UnreadableFile(f"{path}: expected header with columns key, lat, lon")
        regions = []
        for row in reader:
            regions.append(Region(row["key"], GeoPoint(float(row["lat"]), float(row["lon"]))))
    return regions


def write_region_table(regions: Iterable[Region], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "lat", "lon"])
        for region in regions:
            if region.centroid is None:
                raise ValueError(f"region {region.key} has no centroid")
            writer.writerow([region.key, repr(region.centroid.lat), repr(region.centroid.lon)])
