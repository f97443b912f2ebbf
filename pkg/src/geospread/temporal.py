"""Event timelines: interval bucketing, peak detection, per-window metrics, LOWESS.

Windows are half-open [origin + k*width, origin + (k+1)*width) in epoch
seconds. The smoother is Cleveland's classic first-degree locally weighted
regression (tricube neighborhood weights, bisquare robustness reweighting).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .corpus import Message
from .errors import DegenerateFit, EmptySeries
from .geodesy import GeoPoint
from .metrics import LocalityReport, locality_report


@dataclass(frozen=True)
class WindowSpec:
    """Half-open interval grid: count windows of width seconds from origin."""

    origin: int
    count: int
    width: int = 1800

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("window width must be positive")
        if self.count < 0:
            raise ValueError("window count must be non-negative")

    def start(self, k: int) -> int:
        return self.origin + k * self.width


@dataclass(frozen=True)
class WindowSeries:
    """Per-window message-id groups with counts and optional derived values."""

    spec: WindowSpec
    buckets: tuple[tuple[str, ...], ...]
    counts: tuple[int, ...]
    out_of_range: int = 0
    metrics: tuple[LocalityReport | None, ...] | None = None
    offsets_min: tuple[float, ...] | None = None


def bucket(messages: Sequence[Message], spec: WindowSpec) -> WindowSeries:
    """Assign each in-range message to exactly one window by the half-open rule."""
    groups: list[list[str]] = [[] for _ in range(spec.count)]
    out_of_range = 0
    end = spec.origin + spec.count * spec.width
    for m in messages:
        if spec.origin <= m.timestamp < end:
            groups[(m.timestamp - spec.origin) // spec.width].append(m.id)
        else:
            out_of_range += 1
    buckets = tuple(tuple(g) for g in groups)
    return WindowSeries(spec, buckets, tuple(len(g) for g in buckets), out_of_range)


def find_peak(series: WindowSeries) -> int:
    """Index of the maximum-count window; earliest index wins ties."""
    best = -1
    best_count = 0
    for k, c in enumerate(series.counts):
        if c > best_count:
            best = k
            best_count = c
    if best < 0:
        raise EmptySeries("no non-empty window")
    return best


def metric_series(
    series: WindowSeries,
    lookup: Mapping[str, Message],
    spread_mode: str = "messages",
    centroids: Mapping[str, GeoPoint] | None = None,
) -> tuple[LocalityReport | None, ...]:
    """Locality report per non-empty window; empty windows yield None."""
    out: list[LocalityReport | None] = []
    for ids in series.buckets:
        if not ids:
            out.append(None)
        else:
            out.append(locality_report([lookup[i] for i in ids], spread_mode, centroids))
    return tuple(out)


def with_metrics(series: WindowSeries, reports: Sequence[LocalityReport | None]) -> WindowSeries:
    if len(reports) != len(series.buckets):
        raise ValueError("one report slot per window required")
    return replace(series, metrics=tuple(reports))


def align_to_peak(series: WindowSeries, peak: int) -> WindowSeries:
    """Relabel window k as (k - peak) * width minutes; data is unchanged."""
    if not 0 <= peak < len(series.buckets):
        raise ValueError(f"peak index {peak} out of range")
    offsets = tuple((k - peak) * series.spec.width / 60.0 for k in range(len(series.buckets)))
    return replace(series, offsets_min=offsets)


def lowess(
    x: Sequence[float],
    y: Sequence[float],
    frac: float = 0.3,
    robust_iters: int = 3,
) -> np.ndarray:
    """Locally weighted linear regression fitted at every x_i.

    For each point, a weighted linear model is fit over the int(frac * n)
    nearest neighbors with tricube weights on distance scaled by the
    neighborhood radius, followed by robust_iters bisquare reweighting
    passes on the residuals (scaled by six times their median). A
    neighborhood whose robustness weights all vanish falls back to its
    tricube-weighted local mean.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if y.size != n:
        raise ValueError("x and y lengths differ")
    if n < 2:
        raise ValueError("need at least two points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly ascending")
    if not 0.0 < frac <= 1.0:
        raise ValueError("frac must lie in (0, 1]")
    if robust_iters < 0:
        raise ValueError("robust_iters must be >= 0")

    k = max(2, min(int(frac * n), n))
    span = x[-1] - x[0]
    y_scale = max(1.0, float(np.max(np.abs(y))))
    rw = np.ones(n)
    fitted = np.empty(n)
    for pass_idx in range(robust_iters + 1):
        robust = rw if pass_idx > 0 else None
        nleft = 0
        nright = k - 1
        for i in range(n):
            xs = x[i]
            while nright < n - 1 and xs - x[nleft] > x[nright + 1] - xs:
                nleft += 1
                nright += 1
            fitted[i] = _fit_at(x, y, xs, nleft, nright, span, robust)
        if pass_idx == robust_iters:
            break
        resid = np.abs(y - fitted)
        if np.max(resid) <= 1e-14 * y_scale:  # fit is exact to rounding; keep it
            break
        rs = np.sort(resid)
        cmad = 3.0 * (rs[n // 2] + rs[n - n // 2 - 1])  # 6 * median residual
        if cmad <= 0.0:
            break
        c1 = 0.001 * cmad
        c9 = 0.999 * cmad
        rw = np.where(
            resid <= c1, 1.0, np.where(resid <= c9, (1.0 - (resid / cmad) ** 2) ** 2, 0.0)
        )
    return fitted


def _fit_at(x, y, xs, nleft, nright, span, robust, slope=True):
    """One local fit, mirroring Cleveland's LOWEST inner routine."""
    n = x.size
    h = max(xs - x[nleft], x[nright] - xs)
    h9 = 0.999 * h
    h1 = 0.001 * h
    weights = np.zeros(n)
    total = 0.0
    j = nleft
    while j < n:
        r = abs(x[j] - xs)
        if r <= h9:
            wj = 1.0 if r <= h1 else (1.0 - (r / h) ** 3) ** 3
            if robust is not None:
                wj *= robust[j]
            weights[j] = wj
            total += wj
        elif x[j] > xs:
            break
        j += 1

    if total <= 0.0:
        if robust is not None:
            # every robustness weight vanished: tricube-only local mean
            return _fit_at(x, y, xs, nleft, nright, span, None, slope=False)
        raise DegenerateFit(f"no usable neighbors at x = {xs}")

    w = weights[nleft:j] / total
    xw = x[nleft:j]
    if slope and h > 0.0:
        xmean = np.dot(w, xw)
        b = xs - xmean
        c = np.dot(w, (xw - xmean) ** 2)
        if np.sqrt(c) > 0.001 * span:
            w = w * (1.0 + (b / c) * (xw - xmean))
    return float(np.dot(w, y[nleft:j]))
