"""Corpus ingestion, filtering, deduplication, and home-location estimation.

A Corpus is an immutable, (timestamp, id)-sorted sequence of messages plus a
provenance record (source files and a per-stage filter log). All operations
are pure: they return new corpora and never mutate their inputs, so they are
safe to call concurrently on shared data.
"""

from __future__ import annotations

import csv
import json
import re
import statistics
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import FormatMismatch, InsufficientEvidence, UnreadableFile
from .geodesy import GeoPoint

GEO_NATIVE = "native"
GEO_ESTIMATED = "estimated"

NDJSON_FIELDS = ("id", "user_id", "timestamp", "lat", "lon", "lang", "text")


@dataclass(frozen=True)
class Message:
    """One geotagged (or to-be-geotagged) post."""

    id: str
    user_id: str
    timestamp: int
    point: GeoPoint | None
    language: str
    text: str
    region: str | None = None
    topic: int | None = None
    geo_source: str = GEO_NATIVE

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("message id must be non-empty")
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool) or self.timestamp <= 0:
            raise ValueError(f"timestamp must be a positive integer, got {self.timestamp!r}")
        if not self.language:
            raise ValueError("language must be non-empty")
        if self.geo_source not in (GEO_NATIVE, GEO_ESTIMATED):
            raise ValueError(f"geo_source must be native or estimated, got {self.geo_source!r}")
        if self.geo_source == GEO_ESTIMATED and self.point is None:
            raise ValueError("estimated geo_source requires a point")


@dataclass(frozen=True)
class UserTrace:
    """Native geotag evidence for one user, used for home estimation."""

    user_id: str
    points: tuple[GeoPoint, ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("trace must contain at least one point")


@dataclass(frozen=True)
class Provenance:
    sources: tuple[str, ...] = ()
    log: tuple[dict, ...] = ()


@dataclass(frozen=True)
class Corpus:
    """Immutable message container, sorted by (timestamp, id), ids unique."""

    messages: tuple[Message, ...]
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.messages, key=lambda m: (m.timestamp, m.id)))
        seen: set[str] = set()
        for m in ordered:
            if m.id in seen:
                raise ValueError(f"duplicate message id {m.id!r}")
            seen.add(m.id)
        object.__setattr__(self, "messages", ordered)

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)

    def derive(self, messages: Iterable[Message], log_entry: dict) -> "Corpus":
        """New corpus with the same sources and one more filter-log entry."""
        prov = Provenance(self.provenance.sources, self.provenance.log + (log_entry,))
        return Corpus(tuple(messages), prov)


def _point_from_values(lat, lon) -> GeoPoint | None:
    if lat is None and lon is None:
        return None
    if lat is None or lon is None:
        raise ValueError("lat and lon must both be present or both null")
    return GeoPoint(float(lat), float(lon))


def _int_timestamp(value) -> int:
    if isinstance(value, bool):
        raise ValueError("timestamp must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and value.strip():
        return int(value.strip())
    raise ValueError(f"timestamp must be integer epoch seconds, got {value!r}")


def _message_from_record(rec: Mapping) -> Message:
    missing = [k for k in NDJSON_FIELDS if k not in rec]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    topic = rec.get("topic")
    if topic is not None:
        topic = int(topic)
    geo_source = rec.get("geo_source") or GEO_NATIVE
    return Message(
        id=str(rec["id"]),
        user_id=str(rec["user_id"]),
        timestamp=_int_timestamp(rec["timestamp"]),
        point=_point_from_values(rec["lat"], rec["lon"]),
        language=str(rec["lang"]).strip().lower(),
        text=str(rec["text"]),
        region=(str(rec["region"]) if rec.get("region") else None),
        topic=topic,
        geo_source=str(geo_source),
    )


def load_corpus(path: str, format: str = "ndjson") -> Corpus:
    """Ingest a message file. Malformed records are skipped and counted.

    Raises UnreadableFile when the file cannot be opened and FormatMismatch
    when more than half of its records are malformed (or, for csv, when the
    required header is absent).
    """
    if format not in ("ndjson", "csv"):
        raise ValueError(f"unknown format {format!r}")
    try:
        fh = open(path, encoding="utf-8", newline="" if format == "csv" else None)
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc

    messages: list[Message] = []
    seen_ids: set[str] = set()
    malformed = 0
    duplicates = 0
    total = 0

    def take(rec) -> None:
        nonlocal malformed, duplicates
        try:
            msg = _message_from_record(rec)
        except (ValueError, TypeError, KeyError):
            malformed += 1
            return
        if msg.id in seen_ids:
            duplicates += 1
            return
        seen_ids.add(msg.id)
        messages.append(msg)

    with fh:
        if format == "ndjson":
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                total += 1
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    malformed += 1
                    continue
                take(rec)
        else:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(NDJSON_FIELDS) <= set(reader.fieldnames):
                raise FormatMismatch(f"csv header must include columns {', '.join(NDJSON_FIELDS)}")
            while True:
                try:
                    row = next(reader)
                except StopIteration:
                    break
                except csv.Error:
                    total += 1
                    malformed += 1
                    continue
                total += 1
                take({k: (None if v == "" else v) for k, v in row.items() if k is not None})

    if total > 0 and malformed * 2 > total:
        raise FormatMismatch(f"{path}: {malformed} of {total} records malformed")
    prov = Provenance(
        sources=(path,),
        log=(
            {
                "stage": "load",
                "format": format,
                "in": total,
                "out": len(messages),
                "malformed": malformed,
                "duplicate_ids": duplicates,
            },
        ),
    )
    return Corpus(tuple(messages), prov)


def write_corpus(corpus: Corpus, path: str) -> None:
    """Emit NDJSON with the ingestion schema plus geo_source (and any labels)."""
    with open(path, "w", encoding="utf-8") as fh:
        for m in corpus:
            rec = {
                "id": m.id,
                "user_id": m.user_id,
                "timestamp": m.timestamp,
                "lat": None if m.point is None else m.point.lat,
                "lon": None if m.point is None else m.point.lon,
                "lang": m.language,
                "text": m.text,
                "geo_source": m.geo_source,
            }
            if m.region is not None:
                rec["region"] = m.region
            if m.topic is not None:
                rec["topic"] = m.topic
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def load_traces(path: str) -> dict[str, UserTrace]:
    """Read a traces file: NDJSON of {user_id, points: [[lat, lon], ...]}.

    Malformed lines are skipped; the first trace wins for a repeated user.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    traces: dict[str, UserTrace] = {}
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                user_id = str(rec["user_id"])
                points = tuple(GeoPoint(float(lat), float(lon)) for lat, lon in rec["points"])
                trace = UserTrace(user_id, points)
            except (ValueError, TypeError, KeyError, json.JSONDecodeError):
                continue
            traces.setdefault(user_id, trace)
    return traces


def load_keywords(path: str) -> dict[str, list[str]]:
    """Read a keyword file: JSON object mapping language code -> keyword list.

    An optional "*" entry supplies the fallback list for languages with no
    entry of their own.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatMismatch(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatMismatch(f"{path}: expected a JSON object")
    return {str(lang).lower(): [str(kw) for kw in kws] for lang, kws in raw.items()}


def _compile_keywords(keywords: Sequence[str], mode: str) -> re.Pattern:
    parts = [re.escape(kw.strip().casefold()) for kw in keywords]
    body = "|".join(parts)
    if mode == "token":
        return re.compile(rf"(?<!\w)(?:{body})(?!\w)")
    return re.compile(body)


def filter_keyword(
    corpus: Corpus,
    keywords: Mapping[str, Sequence[str]],
    mode: str = "substring",
) -> Corpus:
    """Retain messages whose text matches any keyword for their language.

    Matching is case-insensitive after Unicode casefolding. Languages without
    an entry fall back to the "*" list when present, otherwise to the union
    of all per-language lists. `mode="token"` requires the match to sit on
    word boundaries; the default substring mode matches anywhere.
    """
    if mode not in ("substring", "token"):
        raise ValueError(f"unknown mode {mode!r}")
    if not keywords:
        raise ValueError("keyword mapping must be non-empty")
    for lang, kws in keywords.items():
        if not kws or any(not kw.strip() for kw in kws):
            raise ValueError(f"empty keyword in list for {lang!r}")

    if "*" in keywords:
        fallback = list(keywords["*"])
    else:
        fallback = sorted({kw for kws in keywords.values() for kw in kws})
    patterns = {lang: _compile_keywords(kws, mode) for lang, kws in keywords.items() if lang != "*"}
    default_pattern = _compile_keywords(fallback, mode)

    kept = [
        m
        for m in corpus
        if patterns.get(m.language, default_pattern).search(m.text.casefold())
    ]
    return corpus.derive(
        kept,
        {"stage": "filter_keyword", "mode": mode, "in": len(corpus), "out": len(kept)},
    )


def _normalize_text(text: str) -> str:
    return " ".join(text.casefold().split())


def dedup(corpus: Corpus) -> Corpus:
    """Drop messages repeating an earlier message's normalized text per language.

    Normalization is Unicode casefold plus whitespace-run collapse; the
    earliest (timestamp, id) occurrence is kept.
    """
    seen: set[tuple[str, str]] = set()
    kept = []
    for m in corpus:  # corpus order is (timestamp, id), so first seen = earliest
        key = (m.language, _normalize_text(m.text))
        if key in seen:
            continue
        seen.add(key)
        kept.append(m)
    return corpus.derive(kept, {"stage": "dedup", "in": len(corpus), "out": len(kept)})


def prune_languages(corpus: Corpus, min_count: int = 100) -> Corpus:
    """Drop every message of any language with fewer than min_count messages."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: dict[str, int] = {}
    for m in corpus:
        counts[m.language] = counts.get(m.language, 0) + 1
    kept = [m for m in corpus if counts[m.language] >= min_count]
    return corpus.derive(
        kept,
        {
            "stage": "prune_languages",
            "min_count": min_count,
            "in": len(corpus),
            "out": len(kept),
            "languages_kept": sum(1 for c in counts.values() if c >= min_count),
        },
    )


def estimate_home(trace: UserTrace, min_points: int = 2) -> GeoPoint:
    """Per-axis median of a user's natively geotagged points.

    Even-count medians are the mean of the two middle values. Raises
    InsufficientEvidence when the trace has fewer than min_points points.
    """
    if len(trace.points) < min_points:
        raise InsufficientEvidence(
            f"user {trace.user_id}: {len(trace.points)} point(s), need {min_points}"
        )
    lat = statistics.median(p.lat for p in trace.points)
    lon = statistics.median(p.lon for p in trace.points)
    return GeoPoint(lat, lon)


def attach_estimated_locations(
    corpus: Corpus,
    traces: Mapping[str, UserTrace],
    min_points: int = 2,
) -> Corpus:
    """Fill in missing points from the authors' home estimates.

    Messages that already carry a point pass through unchanged. A message
    without one gains its author's estimated home (geo_source = estimated)
    when the author has a qualifying trace, and is dropped otherwise.
    """
    kept = []
    estimated = 0
    dropped = 0
    homes: dict[str, GeoPoint | None] = {}
    for m in corpus:
        if m.point is not None:
            kept.append(m)
            continue
        if m.user_id not in homes:
            trace = traces.get(m.user_id)
            if trace is None:
                homes[m.user_id] = None
            else:
                try:
                    homes[m.user_id] = estimate_home(trace, min_points)
                except InsufficientEvidence:
                    homes[m.user_id] = None
        home = homes[m.user_id]
        if home is None:
            dropped += 1
            continue
        kept.append(replace(m, point=home, geo_source=GEO_ESTIMATED))
        estimated += 1
    return corpus.derive(
        kept,
        {
            "stage": "attach_estimated_locations",
            "in": len(corpus),
            "out": len(kept),
            "estimated": estimated,
            "dropped_no_evidence": dropped,
        },
    )
