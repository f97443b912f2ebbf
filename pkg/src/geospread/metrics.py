"""The three locality measures (focus, entropy, spread) and distance CDFs.

Focus is the largest regional share of a message set, entropy the Shannon
entropy (bits) of the regional distribution, and spread the mean great-circle
distance from the set's geographic midpoint. All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Message
from .errors import EmptySet
from .geodesy import GeoPoint, haversine, midpoint

KM_PER_MILE = 1.609344

REPORT_COLUMNS = ("scope", "n", "focus", "entropy_bits", "spread_km", "midpoint_lat", "midpoint_lon")


@dataclass(frozen=True)
class RegionCounts:
    """Message counts per region key; total is the sum of all counts."""

    counts: dict[str, int]
    total: int

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "RegionCounts":
        for key, value in counts.items():
            if value < 0:
                raise ValueError(f"negative count for region {key!r}")
        return cls(dict(counts), sum(counts.values()))

    @classmethod
    def from_messages(cls, messages: Iterable[Message]) -> "RegionCounts":
        counts: dict[str, int] = {}
        for m in messages:
            if m.region is None:
                raise ValueError(f"message {m.id} has no region")
            counts[m.region] = counts.get(m.region, 0) + 1
        return cls(counts, sum(counts.values()))


@dataclass(frozen=True)
class LocalityReport:
    focus: float
    entropy: float
    spread: float
    midpoint: GeoPoint
    n: int


def focus(counts: RegionCounts) -> float:
    """Largest fraction of messages concentrated in a single region."""
    if counts.total <= 0:
        raise EmptySet("focus of an empty region distribution")
    return max(counts.counts.values()) / counts.total


def entropy(counts: RegionCounts) -> float:
    """Shannon entropy of the regional distribution, in bits; 0 log 0 = 0."""
    if counts.total <= 0:
        raise EmptySet("entropy of an empty region distribution")
    total = counts.total
    acc = 0.0
    for value in counts.counts.values():
        if value > 0:
            p = value / total
            acc -= p * math.log2(p)
    return acc


def spread(points: Sequence[GeoPoint], center: GeoPoint | None = None) -> float:
    """Mean distance (km) of each point from the set's geographic midpoint.

    Pass `center` to override the computed midpoint, e.g. when the midpoint
    is degenerate or a fixed reference point is wanted.
    """
    if not points:
        raise EmptySet("spread of an empty point set")
    l0 = midpoint(points) if center is None else center
    return math.fsum(haversine(l0, p) for p in points) / len(points)


def locality_report(
    messages: Sequence[Message],
    spread_mode: str = "messages",
    centroids: Mapping[str, GeoPoint] | None = None,
) -> LocalityReport:
    """Focus and entropy over region counts plus spread over message points.

    spread_mode "messages" (default) averages the distance of every message
    point from the midpoint of all message points. Mode "regions" is the
    per-location variant: it averages over the distinct regions' centroids
    instead, taking each region's centroid from `centroids` when given and
    from the mean of its message points otherwise.
    """
    if not messages:
        raise EmptySet("locality report over no messages")
    if spread_mode not in ("messages", "regions"):
        raise ValueError(f"unknown spread_mode {spread_mode!r}")
    for m in messages:
        if m.point is None:
            raise ValueError(f"message {m.id} has no point")
    counts = RegionCounts.from_messages(messages)

    if spread_mode == "messages":
        points = [m.point for m in messages]
    else:
        points = []
        for key in sorted(counts.counts):
            if centroids is not None and key in centroids:
                points.append(centroids[key])
            else:
                points.append(midpoint([m.point for m in messages if m.region == key]))
    l0 = midpoint(points)
    return LocalityReport(
        focus=focus(counts),
        entropy=entropy(counts),
        spread=spread(points, center=l0),
        midpoint=l0,
        n=len(messages),
    )


def distance_cdf(
    messages: Sequence[Message],
    center: GeoPoint,
    thresholds: Sequence[float],
) -> list[float]:
    """Fraction of messages within each distance threshold (km) of a center."""
    if not messages:
        raise EmptySet("distance cdf over no messages")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly ascending")
    distances = []
    for m in messages:
        if m.point is None:
            raise ValueError(f"message {m.id} has no point")
        distances.append(haversine(center, m.point))
    n = len(distances)
    return [sum(1 for d in distances if d <= t) / n for t in thresholds]
