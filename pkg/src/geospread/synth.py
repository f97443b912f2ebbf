"""Synthetic event generator that makes the pipeline testable end to end.

Builds a corpus whose regional dispersion widens over windows at a
configurable rate: message k-in-window-w posts from the center region with
probability 1 / (1 + spread_growth * w), otherwise from a uniformly chosen
outer region. With spread_growth = 0 every message stays in the center
region, so per-window entropy is exactly zero by construction; with a
positive rate, later windows mix regions and entropy rises.

Everything is driven by one seeded RNG in a fixed draw order, so identical
specs produce byte-identical output files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
from dataclasses import dataclass, field

from .geodesy import GeoPoint, Region, write_region_table

DEFAULT_KEYWORD = "alert"

_RING_RADIUS_DEG = 6.0


@dataclass(frozen=True)
class SynthSpec:
    center: GeoPoint = field(default_factory=lambda: GeoPoint(40.0, -100.0))
    n_messages: int = 2000
    n_users: int = 200
    n_regions: int = 8
    spread_growth: float = 0.3
    follow_density: float = 0.02
    seed: int = 0
    origin: int = 1_600_000_000
    width: int = 1800
    windows: int = 96
    estimated_frac: float = 0.25

    def __post_init__(self) -> None:
        if min(self.n_messages, self.n_users, self.n_regions, self.windows) < 1:
            raise ValueError("counts must be positive")
        if self.spread_growth < 0 or self.follow_density < 0:
            raise ValueError("rates must be >= 0")
        if not 0.0 <= self.estimated_frac <= 1.0:
            raise ValueError("estimated_frac must lie in [0, 1]")
        if self.n_users < self.n_regions:
            raise ValueError("need at least one user per region")
        if self.n_messages < self.windows:
            raise ValueError("need at least one message per window")
        if abs(self.center.lat) > 80.0:
            raise ValueError("synthetic center latitude must lie within [-80, 80]")


def _region_layout(spec: SynthSpec) -> list[Region]:
    """Center region plus a ring of outer regions with distinct centroids."""
    regions = [Region("R000", spec.center)]
    outer = spec.n_regions - 1
    for i in range(outer):
        angle = 2.0 * math.pi * i / outer
        lat = spec.center.lat + _RING_RADIUS_DEG * math.cos(angle)
        lon = spec.center.lon + _RING_RADIUS_DEG * math.sin(angle)
        regions.append(Region(f"R{i + 1:03d}", GeoPoint(lat, lon)))
    return regions


def _window_counts(spec: SynthSpec) -> list[int]:
    """Tent-shaped per-window counts summing to n_messages, all positive."""
    peak = spec.windows // 3
    half_span = max(peak, spec.windows - 1 - peak, 1)
    weights = [1.0 + 4.0 * (1.0 - abs(k - peak) / half_span) for k in range(spec.windows)]
    scale = spec.n_messages / sum(weights)
    counts = [max(1, int(w * scale)) for w in weights]
    # settle the rounding remainder on the largest windows, deterministically
    order = sorted(range(spec.windows), key=lambda k: (-weights[k], k))
    i = 0
    while sum(counts) < spec.n_messages:
        counts[order[i % spec.windows]] += 1
        i += 1
    while sum(counts) > spec.n_messages:
        k = order[i % spec.windows]
        if counts[k] > 1:
            counts[k] -= 1
        i += 1
    return counts


def generate(spec: SynthSpec, output_dir: str) -> dict:
    """Write corpus.ndjson, traces.ndjson, edges.csv, regions.csv, keywords.json.

    Returns a manifest with the file paths and headline counts.
    """
    os.makedirs(output_dir, exist_ok=True)
    rng = random.Random(spec.seed)
    regions = _region_layout(spec)
    home_region = [i % spec.n_regions for i in range(spec.n_users)]
    users_in_region: list[list[int]] = [[] for _ in range(spec.n_regions)]
    for u, r in enumerate(home_region):
        users_in_region[r].append(u)

    counts = _window_counts(spec)
    paths = {
        "corpus": os.path.join(output_dir, "corpus.ndjson"),
        "traces": os.path.join(output_dir, "traces.ndjson"),
        "edges": os.path.join(output_dir, "edges.csv"),
        "regions": os.path.join(output_dir, "regions.csv"),
        "keywords": os.path.join(output_dir, "keywords.json"),
    }

    n_estimated = 0
    msg_index = 0
    with open(paths["corpus"], "w", encoding="utf-8") as fh:
        for k in range(spec.windows):
            p_center = 1.0 / (1.0 + spec.spread_growth * k)
            for j in range(counts[k]):
                if spec.n_regions == 1 or rng.random() < p_center:
                    region_idx = 0
                else:
                    region_idx = rng.randrange(1, spec.n_regions)
                user = users_in_region[region_idx][rng.randrange(len(users_in_region[region_idx]))]
                centroid = regions[region_idx].centroid
                geotagged = rng.random() >= spec.estimated_frac
                if not geotagged:
                    n_estimated += 1
                msg_id = f"m{msg_index:07d}"
                rec = {
                    "id": msg_id,
                    "user_id": f"u{user:05d}",
                    "timestamp": spec.origin + k * spec.width + int((j + 0.5) * spec.width / counts[k]),
                    "lat": centroid.lat if geotagged else None,
                    "lon": centroid.lon if geotagged else None,
                    "lang": "en",
                    "text": f"{DEFAULT_KEYWORD} synthetic event report {msg_id} zone {regions[region_idx].key}",
                }
                fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")
                msg_index += 1

    with open(paths["traces"], "w", encoding="utf-8") as fh:
        for u in range(spec.n_users):
            centroid = regions[home_region[u]].centroid
            rec = {"user_id": f"u{u:05d}", "points": [[centroid.lat, centroid.lon]] * 3}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    n_edges = 0
    with open(paths["edges"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["follower_id", "followee_id"])
        for u in range(spec.n_users):
            for v in range(spec.n_users):
                if u != v and rng.random() < spec.follow_density:
                    writer.writerow([f"u{u:05d}", f"u{v:05d}"])
                    n_edges += 1

    write_region_table(regions, paths["regions"])
    with open(paths["keywords"], "w", encoding="utf-8") as fh:
        json.dump({"*": [DEFAULT_KEYWORD]}, fh)

    return {
        "paths": paths,
        "messages": spec.n_messages,
        "users": spec.n_users,
        "regions": spec.n_regions,
        "windows": spec.windows,
        "edges": n_edges,
        "non_geotagged": n_estimated,
        "window_counts": counts,
    }
