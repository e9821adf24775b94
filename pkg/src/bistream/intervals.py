"""Closed time intervals and canonical unions of them.

An :class:`IntervalSet` is always kept in canonical form: intervals sorted by
begin, pairwise disjoint, and separated by a strictly positive gap.  Touching
intervals such as ``[0, 1]`` and ``[1, 2]`` are merged into ``[0, 2]``.

The ``_merge`` / ``_intersect`` / ``_clip`` helpers work on plain sequences of
``(begin, end)`` tuples; the sampler calls them directly in its inner loop.
"""

from __future__ import annotations

from bisect import bisect_right
from typing import Iterable, Iterator, NamedTuple, Sequence


class Interval(NamedTuple):
    """Closed interval ``[begin, end]`` in seconds."""

    begin: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.begin

    def contains_time(self, t: float) -> bool:
        return self.begin <= t <= self.end

    def contains(self, other: Interval) -> bool:
        return self.begin <= other.begin and other.end <= self.end

    def __str__(self) -> str:
        return f"[{self.begin:g},{self.end:g}]"


def check_interval(begin: float, end: float) -> Interval:
    if not begin <= end:
        raise ValueError(f"invalid interval: begin {begin!r} > end {end!r}")
    return Interval(begin, end)


def _merge(sorted_pairs: Iterable[tuple[float, float]]) -> list[Interval]:
    out: list[Interval] = []
    cur_b = cur_e = None
    for b, e in sorted_pairs:
        if cur_b is None:
            cur_b, cur_e = b, e
        elif b <= cur_e:  # overlap or touch
            if e > cur_e:
                cur_e = e
        else:
            out.append(Interval(cur_b, cur_e))
            cur_b, cur_e = b, e
    if cur_b is not None:
        out.append(Interval(cur_b, cur_e))
    return out


def _intersect(a: Sequence[tuple[float, float]], b: Sequence[tuple[float, float]]) -> list[Interval]:
    out: list[Interval] = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        ab, ae = a[i]
        bb, be = b[j]
        lo = ab if ab > bb else bb
        hi = ae if ae < be else be
        if lo <= hi:
            out.append(Interval(lo, hi))
        if ae < be:
            i += 1
        else:
            j += 1
    return out


def _clip(a: Sequence[tuple[float, float]], lo: float, hi: float) -> list[Interval]:
    out: list[Interval] = []
    for b, e in a:
        if e < lo:
            continue
        if b > hi:
            break
        out.append(Interval(b if b > lo else lo, e if e < hi else hi))
    return out


class IntervalSet:
    """Canonical union of closed intervals.

    Build one with :func:`normalize` (any input) or :meth:`from_canonical`
    (trusted, already canonical input).
    """

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[tuple[float, float]] = ()):
        raw = [check_interval(b, e) for b, e in intervals]
        raw.sort()
        self.intervals: tuple[Interval, ...] = tuple(_merge(raw))

    @classmethod
    def from_canonical(cls, intervals: Iterable[tuple[float, float]]) -> IntervalSet:
        obj = cls.__new__(cls)
        obj.intervals = tuple(Interval(b, e) for b, e in intervals)
        return obj

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __getitem__(self, i: int) -> Interval:
        return self.intervals[i]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, IntervalSet):
            return self.intervals == other.intervals
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.intervals)

    def __repr__(self) -> str:
        return "IntervalSet{" + ",".join(str(i) for i in self.intervals) + "}"

    def __contains__(self, t: float) -> bool:
        k = bisect_right(self.intervals, (t, float("inf"))) - 1
        return k >= 0 and self.intervals[k].end >= t

    @property
    def duration(self) -> float:
        return sum(e - b for b, e in self.intervals)

    def is_canonical(self) -> bool:
        for b, e in self.intervals:
            if b > e:
                return False
        return all(p.end < n.begin for p, n in zip(self.intervals, self.intervals[1:]))

    def intersect(self, other: IntervalSet) -> IntervalSet:
        return IntervalSet.from_canonical(_intersect(self.intervals, other.intervals))

    __and__ = intersect

    def union(self, other: IntervalSet) -> IntervalSet:
        return IntervalSet(self.intervals + other.intervals)

    __or__ = union

    def clip(self, window: tuple[float, float]) -> IntervalSet:
        return IntervalSet.from_canonical(_clip(self.intervals, window[0], window[1]))

    def covering(self, window: tuple[float, float]) -> Interval | None:
        """The maximal interval of the set that contains ``window``, if any."""
        k = bisect_right(self.intervals, (window[0], float("inf"))) - 1
        if k >= 0:
            iv = self.intervals[k]
            if iv.end >= window[1]:
                return iv
        return None


def normalize(raw: Iterable[tuple[float, float]]) -> IntervalSet:
    """Canonical IntervalSet covering the union of ``raw``.

    Raises ValueError on any interval with begin > end.
    """
    return IntervalSet(raw)


def intersect(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    return a.intersect(b)
