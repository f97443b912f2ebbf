"""Toolkit for measuring how information spreads through geotagged message streams.

Submodules: corpus (ingestion and filtering), geodesy (distance and
midpoints), metrics (focus, entropy, spread), temporal (windows, peaks,
LOWESS), topics (LDA), propagation (follow-graph trees), synth (test-event
generator), cli (the command-line pipeline).
"""

__version__ = "0.1.0"

from .corpus import Corpus, Message, UserTrace
from .geodesy import GeoPoint, Region, haversine, midpoint
from .metrics import LocalityReport, RegionCounts, distance_cdf, entropy, focus, locality_report, spread
from .temporal import WindowSeries, WindowSpec, align_to_peak, bucket, find_peak, lowess, metric_series

__all__ = [
    "Corpus",
    "GeoPoint",
    "LocalityReport",
    "Message",
    "Region",
    "RegionCounts",
    "UserTrace",
    "WindowSeries",
    "WindowSpec",
    "__version__",
    "align_to_peak",
    "bucket",
    "distance_cdf",
    "entropy",
    "find_peak",
    "focus",
    "haversine",
    "locality_report",
    "lowess",
    "metric_series",
    "midpoint",
    "spread",
]
