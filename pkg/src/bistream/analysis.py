"""Measurements over sampled cliques and streams: distributions, activity, anomalies."""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np

from .clique import Clique
from .ingest import LabelSet
from .stream import BOTTOM, TOP, BipartiteLinkStream

SIZE_HISTOGRAM = "size-histogram"
DURATION_CCDF = "duration-inverse-cumulative"


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow(_fmt(x) for x in row)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


@dataclass
class DistributionTable(Table):
    kind: str = SIZE_HISTOGRAM

    def as_dict(self) -> dict:
        return {row[0]: row[1] for row in self.rows}

    def fraction_at(self, x: float) -> float:
        """Fraction of items strictly above ``x`` (inverse-cumulative tables only)."""
        if self.kind != DURATION_CCDF:
            raise TypeError("fraction_at only applies to duration tables")
        xs = [r[0] for r in self.rows]
        k = bisect_right(xs, x) - 1
        if k < 0:
            return 1.0 if self.rows else 0.0
        return self.rows[k][1]


def _filtered(cliques: Iterable[Clique], min_size: int) -> list[Clique]:
    return [c for c in cliques if c.size >= min_size]


def size_distribution(cliques: Iterable[Clique], min_size: int = 0) -> DistributionTable:
    counts = Counter(c.size for c in _filtered(cliques, min_size))
    return DistributionTable(("size", "count"), sorted(counts.items()), kind=SIZE_HISTOGRAM)


def _ccdf_table(durations: list[float]) -> DistributionTable:
    table = DistributionTable(("duration", "fraction_longer", "count_longer"), kind=DURATION_CCDF)
    if not durations:
        return table
    d = np.sort(np.asarray(durations, dtype=float))
    xs = np.unique(d)
    longer = len(d) - np.searchsorted(d, xs, side="right")
    table.rows = [(float(x), int(k) / len(d), int(k)) for x, k in zip(xs, longer)]
    return table


def duration_ccdf(
    cliques: Iterable[Clique], group_by_size: bool = False, min_size: int = 0
) -> DistributionTable | dict[int, DistributionTable]:
    """Fraction of cliques lasting strictly longer than each observed duration.

    With ``group_by_size`` one table per clique size is returned.
    """
    selected = _filtered(cliques, min_size)
    if not group_by_size:
        return _ccdf_table([c.duration for c in selected])
    by_size: dict[int, list[float]] = defaultdict(list)
    for c in selected:
        by_size[c.size].append(c.duration)
    return {size: _ccdf_table(ds) for size, ds in sorted(by_size.items())}


def ccdf_by_size_table(tables: dict[int, DistributionTable]) -> Table:
    out = Table(("size", "duration", "fraction_longer", "count_longer"))
    for size, t in tables.items():
        out.rows.extend((size,) + row for row in t.rows)
    return out


def timespan_table(cliques: Iterable[Clique], min_size: int = 0) -> Table:
    """Cliques ranked by begin time (then end, then nodes), one row each."""
    ordered = sorted(
        _filtered(cliques, min_size), key=lambda c: (c.begin, c.end, c.top_nodes, c.bottom_nodes)
    )
    rows = [(rank, c.begin, c.end, c.size) for rank, c in enumerate(ordered)]
    return Table(("rank", "begin", "end", "size"), rows)


def _bins_of(intervals, k0: int, k1: int) -> list[tuple[int, int]]:
    """Merged ranges of second indices k (k0 <= k <= k1) whose bin [k, k+1) meets an interval."""
    ranges: list[list[int]] = []
    for b, e in sorted(intervals):
        lo = max(math.floor(b), k0)
        hi = min(math.floor(e), k1)
        if lo > hi:
            continue
        if ranges and lo <= ranges[-1][1] + 1:
            ranges[-1][1] = max(ranges[-1][1], hi)
        else:
            ranges.append([lo, hi])
    return [(a, b) for a, b in ranges]


def activity_per_second(stream: BipartiteLinkStream, labels: Iterable[str] = ()) -> Table:
    """Distinct active nodes and links per one-second bin ``[k, k+1)``.

    Bins start at integer seconds and cover the time span; a bin that would
    only touch the span's final instant is left out.  A link is anomalous when
    either endpoint is labelled.
    """
    labels = frozenset(labels)
    t0, t1 = stream.timespan
    k0 = math.floor(t0)
    k1 = math.ceil(t1) - 1 if t1 > k0 else k0
    n = k1 - k0 + 1
    cols = {name: np.zeros(n + 1, dtype=np.int64) for name in ("nodes", "anodes", "links", "alinks")}

    def add(col, ranges):
        for a, b in ranges:
            col[a - k0] += 1
            col[b - k0 + 1] -= 1

    per_node: dict[str, list] = defaultdict(list)
    for (u, v), ivs in stream.pairs.items():
        ranges = _bins_of(ivs, k0, k1)
        add(cols["links"], ranges)
        if u in labels or v in labels:
            add(cols["alinks"], ranges)
        per_node[u].extend(ivs)
        per_node[v].extend(ivs)
    for node, ivs in per_node.items():
        ranges = _bins_of(ivs, k0, k1)
        add(cols["nodes"], ranges)
        if node in labels:
            add(cols["anodes"], ranges)
    series = {k: np.cumsum(v)[:n] for k, v in cols.items()}
    rows = [
        (k0 + i, int(series["nodes"][i]), int(series["anodes"][i]), int(series["links"][i]), int(series["alinks"][i]))
        for i in range(n)
    ]
    return Table(("second", "nodes_active", "anomalous_nodes_active", "links_active", "anomalous_links_active"), rows)


def format_fraction(x: float | None) -> str:
    """Two significant digits, or ``n/a`` for an undefined ratio."""
    return "n/a" if x is None else f"{x:.1e}"


@dataclass
class AnomalySummary:
    cliques: int
    anomalous_cliques: int
    clique_nodes: int
    flagged_clique_nodes: int
    stream_nodes: int
    flagged_stream_nodes: int
    unmatched_labels: int

    @staticmethod
    def _ratio(a: int, b: int) -> float | None:
        return a / b if b else None

    @property
    def clique_flagged_fraction(self) -> float | None:
        return self._ratio(self.flagged_clique_nodes, self.clique_nodes)

    @property
    def stream_flagged_fraction(self) -> float | None:
        return self._ratio(self.flagged_stream_nodes, self.stream_nodes)

    def rows(self) -> list[tuple[str, object]]:
        return [
            ("cliques", self.cliques),
            ("anomalous_cliques", self.anomalous_cliques),
            ("clique_nodes", self.clique_nodes),
            ("flagged_clique_nodes", self.flagged_clique_nodes),
            ("clique_flagged_fraction", format_fraction(self.clique_flagged_fraction)),
            ("stream_nodes", self.stream_nodes),
            ("flagged_stream_nodes", self.flagged_stream_nodes),
            ("stream_flagged_fraction", format_fraction(self.stream_flagged_fraction)),
            ("unmatched_labels", self.unmatched_labels),
        ]

    def to_csv(self, path: str | Path) -> None:
        Table(("metric", "value"), self.rows()).to_csv(path)


def anomaly_stats(
    cliques: Iterable[Clique], stream: BipartiteLinkStream, labels: Iterable[str], min_size: int = 0
) -> AnomalySummary:
    labels = LabelSet(labels)
    selected = _filtered(cliques, min_size)
    clique_nodes = {n for c in selected for n in c.nodes}
    stream_nodes = set(stream.nodes)
    return AnomalySummary(
        cliques=len(selected),
        anomalous_cliques=sum(1 for c in selected if any(n in labels for n in c.nodes)),
        clique_nodes=len(clique_nodes),
        flagged_clique_nodes=len(clique_nodes & labels),
        stream_nodes=len(stream_nodes),
        flagged_stream_nodes=len(stream_nodes & labels),
        unmatched_labels=len(labels.unmatched(stream_nodes)),
    )


@dataclass
class InducedGraph:
    nodes: list[tuple[str, str, bool]]  # (node, side, anomalous)
    edges: list[tuple[str, str]]  # (top, bottom)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for node, side, flagged in self.nodes:
            g.add_node(node, side=side, anomalous=flagged)
        g.add_edges_from(self.edges)
        return g

    def components(self) -> list[set[str]]:
        return sorted(nx.connected_components(self.to_networkx()), key=lambda s: (-len(s), min(s)))

    def write_csv(self, edges_path: str | Path, nodes_path: str | Path) -> None:
        Table(("src", "dst"), list(self.edges)).to_csv(edges_path)
        Table(("node", "side", "anomalous"), [(n, s, int(a)) for n, s, a in self.nodes]).to_csv(nodes_path)

    def write_graphml(self, path: str | Path) -> None:
        nx.write_graphml(self.to_networkx(), path)


def induced_graph(
    cliques: Iterable[Clique],
    window: tuple[float, float],
    min_size: int = 0,
    labels: Iterable[str] = (),
) -> InducedGraph:
    """Union graph of the cliques whose begin time falls in ``[window[0], window[1])``."""
    labels = frozenset(labels)
    lo, hi = window
    side: dict[str, str] = {}
    edges: set[tuple[str, str]] = set()
    for c in _filtered(cliques, min_size):
        if not lo <= c.begin < hi:
            continue
        for u in c.top_nodes:
            side[u] = TOP
            for v in c.bottom_nodes:
                edges.add((u, v))
        for v in c.bottom_nodes:
            side[v] = BOTTOM
    assert all(side[u] == TOP and side[v] == BOTTOM for u, v in edges)
    nodes = [(n, side[n], n in labels) for n in sorted(side)]
    return InducedGraph(nodes, sorted(edges))
