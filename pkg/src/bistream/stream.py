"""Bipartite link streams: data model, packet transformation, queries, pruning."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, NamedTuple, Sequence

from .intervals import Interval, IntervalSet, _intersect, check_interval

if TYPE_CHECKING:
    from .ingest import PacketRecord, PartitionRule

log = logging.getLogger(__name__)

TOP = "top"
BOTTOM = "bottom"


class StreamError(ValueError):
    pass


class UnknownNodeError(KeyError):
    pass


class Link(NamedTuple):
    """A maximal interval during which a (top, bottom) pair is linked."""

    begin: float
    end: float
    top_node: str
    bottom_node: str

    @property
    def duration(self) -> float:
        return self.end - self.begin


class BipartiteLinkStream:
    """Time span T, node sets top/bottom and the pairwise presence sets of E.

    ``pairs`` maps ``(top_node, bottom_node)`` to the IntervalSet of times the
    two are linked.  Pairs with empty presence are dropped.  Instances are
    treated as immutable once built.
    """

    def __init__(
        self,
        timespan: tuple[float, float],
        top: Iterable[str],
        bottom: Iterable[str],
        pairs: Mapping[tuple[str, str], IntervalSet | Iterable[tuple[float, float]]],
    ):
        self.timespan = check_interval(*timespan)
        self.top: tuple[str, ...] = tuple(sorted(set(top)))
        self.bottom: tuple[str, ...] = tuple(sorted(set(bottom)))
        self._side: dict[str, str] = {u: TOP for u in self.top}
        for v in self.bottom:
            if v in self._side:
                raise StreamError(f"node {v!r} is both top and bottom")
            self._side[v] = BOTTOM

        t0, t1 = self.timespan
        clean: dict[tuple[str, str], IntervalSet] = {}
        for key in sorted(pairs):
            u, v = key
            if self._side.get(u) != TOP or self._side.get(v) != BOTTOM:
                raise StreamError(f"pair {key!r} is not a (top, bottom) pair of this stream")
            ivs = pairs[key]
            if not isinstance(ivs, IntervalSet):
                ivs = IntervalSet(ivs)
            if not ivs:
                continue
            if ivs[0].begin < t0 or ivs[-1].end > t1:
                raise StreamError(f"pair {key!r} has presence outside timespan {self.timespan}")
            clean[key] = ivs
        self.pairs: dict[tuple[str, str], IntervalSet] = clean

        # neighbor dicts are filled in sorted order so iteration is reproducible
        self.neighbors: dict[str, dict[str, IntervalSet]] = {n: {} for n in self.top + self.bottom}
        for (u, v), ivs in clean.items():
            self.neighbors[u][v] = ivs
        for v, u in sorted((v, u) for u, v in clean):
            self.neighbors[v][u] = clean[(u, v)]

    def __repr__(self) -> str:
        return (
            f"BipartiteLinkStream(T={self.timespan}, |top|={len(self.top)}, "
            f"|bottom|={len(self.bottom)}, links={self.n_links})"
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BipartiteLinkStream):
            return NotImplemented
        return (
            self.timespan == other.timespan
            and self.top == other.top
            and self.bottom == other.bottom
            and self.pairs == other.pairs
        )

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.top + self.bottom

    @property
    def n_links(self) -> int:
        return sum(len(ivs) for ivs in self.pairs.values())

    def side(self, node: str) -> str:
        try:
            return self._side[node]
        except KeyError:
            raise UnknownNodeError(node) from None

    def degree(self, node: str) -> int:
        self.side(node)
        return len(self.neighbors[node])

    def audit(self) -> list[str]:
        """Return a list of consistency problems (empty when sound)."""
        problems = []
        if set(self.top) & set(self.bottom):
            problems.append("top and bottom overlap")
        seen = 0
        for node, nbrs in self.neighbors.items():
            for other, ivs in nbrs.items():
                key = (node, other) if self._side[node] == TOP else (other, node)
                if self.pairs.get(key) != ivs:
                    problems.append(f"neighbor entry {node}->{other} does not match pairs")
                seen += 1
        if seen != 2 * len(self.pairs):
            problems.append("neighbor index is not the transpose of pairs")
        t0, t1 = self.timespan
        for key, ivs in self.pairs.items():
            if not ivs.is_canonical():
                problems.append(f"pair {key} not canonical")
            if ivs and (ivs[0].begin < t0 or ivs[-1].end > t1):
                problems.append(f"pair {key} outside timespan")
        return problems


def stream_from_packets(
    packets: Sequence[PacketRecord],
    partition: PartitionRule,
    half_window: float = 0.5,
    timespan: tuple[float, float] | None = None,
) -> BipartiteLinkStream:
    """Turn timestamped packets into a bipartite link stream.

    Each packet at time t links its endpoints over ``[t - half_window,
    t + half_window]``; direction is ignored.  The time span defaults to the
    hull of all packet windows, otherwise presence is clipped to ``timespan``.
    """
    if not packets:
        raise StreamError("no packets: cannot build an empty stream")
    if not half_window > 0:
        raise StreamError(f"half_window must be > 0, got {half_window!r}")
    windows: dict[tuple[str, str], list[tuple[float, float]]] = defaultdict(list)
    top: set[str] = set()
    bottom: set[str] = set()
    lo, hi = math.inf, -math.inf
    for row, p in enumerate(packets):
        if not math.isfinite(p.timestamp):
            raise StreamError(f"packet {row}: non-finite timestamp {p!r}")
        s_src, s_dst = partition.side_of(p.src), partition.side_of(p.dst)
        if s_src == s_dst:
            raise StreamError(f"packet {row}: both endpoints on side {s_src!r}: {p!r}")
        u, v = (p.src, p.dst) if s_src == TOP else (p.dst, p.src)
        top.add(u)
        bottom.add(v)
        windows[(u, v)].append((p.timestamp - half_window, p.timestamp + half_window))
        lo = min(lo, p.timestamp)
        hi = max(hi, p.timestamp)

    if timespan is None:
        span = Interval(lo - half_window, hi + half_window)
        pairs = {k: IntervalSet(w) for k, w in windows.items()}
    else:
        span = check_interval(*timespan)
        pairs = {k: IntervalSet(w).clip(span) for k, w in windows.items()}
    return BipartiteLinkStream(span, top, bottom, pairs)


def _pair_key(stream: BipartiteLinkStream, a: str, b: str) -> tuple[str, str]:
    sa, sb = stream.side(a), stream.side(b)
    if sa == sb:
        raise StreamError(f"{a!r} and {b!r} are both on side {sa!r}")
    return (a, b) if sa == TOP else (b, a)


def pair_intervals(stream: BipartiteLinkStream, u: str, v: str) -> IntervalSet:
    """Presence of the pair ``(u, v)``; empty if the two never interact."""
    key = _pair_key(stream, u, v)
    return stream.pairs.get(key, IntervalSet.from_canonical(()))


def group_intersection(
    stream: BipartiteLinkStream,
    v: str,
    others: Iterable[str],
    window: tuple[float, float],
) -> IntervalSet:
    """Times within ``window`` at which ``v`` is linked to every node of ``others``."""
    side = stream.side(v)
    others = list(others)
    for w in others:
        if stream.side(w) == side:
            raise StreamError(f"{w!r} is on the same side as {v!r}")
    nbrs = stream.neighbors[v]
    cur: list = [Interval(*window)]
    for w in others:
        ivs = nbrs.get(w)
        if ivs is None:
            return IntervalSet.from_canonical(())
        cur = _intersect(cur, ivs.intervals)
        if not cur:
            break
    return IntervalSet.from_canonical(cur)


def links(stream: BipartiteLinkStream) -> list[Link]:
    return [Link(b, e, u, v) for (u, v), ivs in stream.pairs.items() for b, e in ivs]


def prune_degree_one(stream: BipartiteLinkStream) -> BipartiteLinkStream:
    """Iteratively drop nodes with exactly one neighbor, then isolated nodes.

    Degree is the static neighbor count over the whole time span.
    """
    degree = {n: len(nb) for n, nb in stream.neighbors.items()}
    removed: set[str] = set()
    queue = [n for n, d in degree.items() if d == 1]
    while queue:
        n = queue.pop()
        if n in removed or degree[n] != 1:
            continue
        removed.add(n)
        for m in stream.neighbors[n]:
            if m not in removed:
                degree[m] -= 1
                if degree[m] == 1:
                    queue.append(m)
    keep = {n for n, d in degree.items() if n not in removed and d > 0}
    pairs = {k: ivs for k, ivs in stream.pairs.items() if k[0] in keep and k[1] in keep}
    log.debug("pruning removed %d of %d nodes", len(stream.neighbors) - len(keep), len(stream.neighbors))
    return BipartiteLinkStream(
        stream.timespan,
        [u for u in stream.top if u in keep],
        [v for v in stream.bottom if v in keep],
        pairs,
    )


def save_stream(stream: BipartiteLinkStream, path: str | Path) -> None:
    doc = {
        "timespan": list(stream.timespan),
        "top": list(stream.top),
        "bottom": list(stream.bottom),
        "links": [[l.top_node, l.bottom_node, l.begin, l.end] for l in links(stream)],
    }
    Path(path).write_text(json.dumps(doc, indent=None) + "\n", encoding="utf-8")


def load_stream(path: str | Path) -> BipartiteLinkStream:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    pairs: dict[tuple[str, str], list[tuple[float, float]]] = defaultdict(list)
    for u, v, b, e in doc["links"]:
        pairs[(u, v)].append((b, e))
    return BipartiteLinkStream(tuple(doc["timespan"]), doc["top"], doc["bottom"], pairs)

