"""Follow-graph ingestion and propagation-tree analysis.

A posting user is a child when at least one followee posted strictly
earlier in the event, and a root otherwise; equal timestamps carry no
ordering evidence and never create a child relation. The cumulative curve
tracks the child fraction over all users whose first post falls at or
before each window checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Message
from .errors import EmptyForest, UnreadableFile
from .temporal import WindowSpec

ROOT = "root"
CHILD = "child"

CURVE_COLUMNS = ("minutes_from_peak", "cumulative_users", "cumulative_children", "child_fraction")


@dataclass(frozen=True)
class FollowGraph:
    """user_id -> set of followees; self-edges and duplicates removed on load."""

    edges: dict[str, frozenset[str]]
    self_edges_dropped: int = 0
    duplicate_edges: int = 0
    malformed_rows: int = 0

    def followees(self, user_id: str) -> frozenset[str]:
        return self.edges.get(user_id, frozenset())


@dataclass(frozen=True)
class PropagationForest:
    first_post: dict[str, int]
    classification: dict[str, str]
    parent_candidates: dict[str, frozenset[str]]


@dataclass(frozen=True)
class CurvePoint:
    minutes_from_peak: float
    cumulative_users: int
    cumulative_children: int
    child_fraction: float


def load_graph(path: str) -> FollowGraph:
    """Read a two-column (follower, followee) edge list, CSV or TSV.

    A first row naming the columns is skipped; malformed rows are counted,
    not fatal.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    edges: dict[str, set[str]] = {}
    self_dropped = 0
    duplicates = 0
    malformed = 0
    with fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in (line.split("\t") if "\t" in line else line.split(","))]
            if lineno == 0 and parts[:2] == ["follower_id", "followee_id"]:
                continue
            if len(parts) != 2 or not parts[0] or not parts[1]:
                malformed += 1
                continue
            follower, followee = parts
            if follower == followee:
                self_dropped += 1
                continue
            bucket = edges.setdefault(follower, set())
            if followee in bucket:
                duplicates += 1
            else:
                bucket.add(followee)
    return FollowGraph(
        {u: frozenset(vs) for u, vs in edges.items()},
        self_edges_dropped=self_dropped,
        duplicate_edges=duplicates,
        malformed_rows=malformed,
    )


def classify(messages: Sequence[Message], graph: FollowGraph) -> PropagationForest:
    """Root/child classification from each user's earliest in-event post.

    Later posts by the same user never reclassify them, and users absent
    from the follow graph are roots. Classification depends only on the
    (user, first timestamp) set, not on message order.
    """
    first_post: dict[str, int] = {}
    for m in messages:
        prev = first_post.get(m.user_id)
        if prev is None or m.timestamp < prev:
            first_post[m.user_id] = m.timestamp

    classification: dict[str, str] = {}
    parent_candidates: dict[str, frozenset[str]] = {}
    for user, t_user in first_post.items():
        parents = frozenset(
            v for v in graph.followees(user) if v in first_post and first_post[v] < t_user
        )
        parent_candidates[user] = parents
        classification[user] = CHILD if parents else ROOT
    return PropagationForest(first_post, classification, parent_candidates)


def child_proportion_curve(
    forest: PropagationForest,
    spec: WindowSpec,
    peak: int,
) -> list[CurvePoint]:
    """Cumulative child fraction at each window-end checkpoint.

    Checkpoint k covers every user whose first post precedes the end of
    window k, with no lower bound, so pre-origin posters count everywhere.
    Checkpoints reached by no user yet are omitted.
    """
    if not forest.first_post:
        raise EmptyForest("no posting users")
    users = sorted(forest.first_post.items(), key=lambda kv: (kv[1], kv[0]))
    points: list[CurvePoint] = []
    idx = 0
    cumulative = 0
    children = 0
    for k in range(spec.count):
        checkpoint_end = spec.origin + (k + 1) * spec.width
        while idx < len(users) and users[idx][1] < checkpoint_end:
            cumulative += 1
            if forest.classification[users[idx][0]] == CHILD:
                children += 1
            idx += 1
        if cumulative == 0:
            continue
        points.append(
            CurvePoint(
                minutes_from_peak=(k - peak) * spec.width / 60.0,
                cumulative_users=cumulative,
                cumulative_children=children,
                child_fraction=children / cumulative,
            )
        )
    return points
