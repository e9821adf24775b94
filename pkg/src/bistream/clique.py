"""Cliques of bipartite link streams: checks, the randomized sampler, an exact oracle.

A clique ``(C_top, C_bottom, I)`` requires every top/bottom pair to be linked
throughout ``I``.  The sampler grows a clique from ``(∅, ∅, T)`` one random
node at a time, alternating sides so the clique stays balanced, and emits the
time-extended version of every state it passes through.
"""

from __future__ import annotations

import itertools
import logging
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .intervals import Interval, _clip, _intersect
from .stream import BOTTOM, TOP, BipartiteLinkStream, StreamError

log = logging.getLogger(__name__)

MAX_BRUTEFORCE_NODES = 12


class Clique(NamedTuple):
    top_nodes: tuple[str, ...]
    bottom_nodes: tuple[str, ...]
    interval: Interval

    @classmethod
    def of(cls, top: Iterable[str], bottom: Iterable[str], interval: tuple[float, float]) -> Clique:
        return cls(tuple(sorted(set(top))), tuple(sorted(set(bottom))), Interval(*interval))

    @property
    def size(self) -> int:
        return len(self.top_nodes) + len(self.bottom_nodes)

    @property
    def duration(self) -> float:
        return self.interval.end - self.interval.begin

    @property
    def begin(self) -> float:
        return self.interval.begin

    @property
    def end(self) -> float:
        return self.interval.end

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.top_nodes + self.bottom_nodes

    def contained_in(self, other: Clique) -> bool:
        """Node sets and interval all included in ``other``'s (non-strict)."""
        return (
            other.interval.begin <= self.interval.begin
            and self.interval.end <= other.interval.end
            and set(self.top_nodes) <= set(other.top_nodes)
            and set(self.bottom_nodes) <= set(other.bottom_nodes)
        )


def format_clique(c: Clique) -> str:
    """``begin,end,top|top,bottom|bottom`` with 6-decimal times."""
    for n in c.nodes:
        if "|" in n or "," in n or "\n" in n:
            raise ValueError(f"node id {n!r} cannot be serialized")
    return f"{c.begin:.6f},{c.end:.6f},{'|'.join(c.top_nodes)},{'|'.join(c.bottom_nodes)}"


def parse_clique(line: str) -> Clique:
    parts = line.rstrip("\n").split(",")
    if len(parts) != 4:
        raise ValueError(f"bad clique line {line!r}")
    b, e, top, bottom = parts
    tops = tuple(top.split("|")) if top else ()
    bottoms = tuple(bottom.split("|")) if bottom else ()
    c = Clique(tops, bottoms, Interval(float(b), float(e)))
    if list(tops) != sorted(set(tops)) or list(bottoms) != sorted(set(bottoms)) or c.begin > c.end:
        raise ValueError(f"non-canonical clique line {line!r}")
    return c


@dataclass(frozen=True)
class SamplerConfig:
    min_emit_size: int = 2
    min_interval_duration: float = 1e-6
    subinterval_choice: str = "uniform"  # or "longest"
    rng_seed: int = 0

    def __post_init__(self):
        if not self.min_interval_duration > 0:
            raise ValueError("min_interval_duration must be > 0")
        if self.subinterval_choice not in ("uniform", "longest"):
            raise ValueError(f"unknown subinterval_choice {self.subinterval_choice!r}")
        if self.min_emit_size < 2:
            raise ValueError("min_emit_size must be >= 2")


class CliqueSet:
    """Deduplicated cliques with a count of every insertion."""

    def __init__(self, cliques: Iterable[Clique] = ()):
        self._counts: dict[Clique, int] = {}
        self.total = 0
        self.trajectories = 0
        for c in cliques:
            self.add(c)

    def add(self, c: Clique, times: int = 1) -> bool:
        self.total += times
        seen = c in self._counts
        self._counts[c] = self._counts.get(c, 0) + times
        return not seen

    def update(self, other: CliqueSet) -> None:
        for c, k in other._counts.items():
            self.add(c, k)
        self.trajectories += other.trajectories

    @property
    def distinct(self) -> int:
        return len(self._counts)

    def count(self, c: Clique) -> int:
        return self._counts.get(c, 0)

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, c: object) -> bool:
        return c in self._counts

    def __iter__(self) -> Iterator[Clique]:
        return iter(sorted(self._counts))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CliqueSet):
            return NotImplemented
        return self._counts == other._counts and self.total == other.total

    def __repr__(self) -> str:
        return f"CliqueSet(distinct={self.distinct}, total={self.total})"


# ---------------------------------------------------------------- checks


def _check_sides(stream: BipartiteLinkStream, c: Clique) -> None:
    for u in c.top_nodes:
        if stream.side(u) != TOP:
            raise StreamError(f"{u!r} is not a top node")
    for v in c.bottom_nodes:
        if stream.side(v) != BOTTOM:
            raise StreamError(f"{v!r} is not a bottom node")


def is_clique(stream: BipartiteLinkStream, c: Clique) -> bool:
    _check_sides(stream, c)
    for u in c.top_nodes:
        nb = stream.neighbors[u]
        for v in c.bottom_nodes:
            ivs = nb.get(v)
            if ivs is None or ivs.covering(c.interval) is None:
                return False
    return True


def is_balanced(c: Clique) -> bool:
    return abs(len(c.top_nodes) - len(c.bottom_nodes)) <= 1


def _extended_interval(stream: BipartiteLinkStream, top, bottom, window) -> Interval | None:
    lo, hi = -float("inf"), float("inf")
    for u in top:
        nb = stream.neighbors[u]
        for v in bottom:
            ivs = nb.get(v)
            cov = None if ivs is None else ivs.covering(window)
            if cov is None:
                return None
            if cov.begin > lo:
                lo = cov.begin
            if cov.end < hi:
                hi = cov.end
    return Interval(lo, hi)


def extend_time(stream: BipartiteLinkStream, c: Clique) -> Clique:
    """Grow ``c``'s interval to the largest one over which all its pairs stay linked."""
    if not c.top_nodes or not c.bottom_nodes:
        raise ValueError("extend_time needs nodes on both sides")
    _check_sides(stream, c)
    j = _extended_interval(stream, c.top_nodes, c.bottom_nodes, c.interval)
    if j is None:
        raise ValueError(f"{c} is not a clique")
    return c._replace(interval=j)


def is_maximal_balanced(stream: BipartiteLinkStream, c: Clique) -> bool:
    """True iff no balanced clique strictly contains ``c``.

    A balanced clique strictly containing a balanced ``c`` either shares its
    nodes (then ``c`` is not temporally maximal) or has a node that can be
    added alone to ``c``'s smaller side, or to either side on a tie, while
    keeping ``c``'s interval.  So it suffices to test those single additions.
    """
    if not is_balanced(c) or not is_clique(stream, c):
        raise ValueError(f"{c} is not a balanced clique")
    window = c.interval
    if c.top_nodes and c.bottom_nodes:
        if extend_time(stream, c).interval != window:
            return False
    n_top, n_bot = len(c.top_nodes), len(c.bottom_nodes)
    sides = []
    if n_top <= n_bot:
        sides.append((TOP, stream.top, c.top_nodes, c.bottom_nodes))
    if n_bot <= n_top:
        sides.append((BOTTOM, stream.bottom, c.bottom_nodes, c.top_nodes))
    for _, pool, mine, opposite in sides:
        if opposite:
            candidates = stream.neighbors[opposite[0]]
        else:
            candidates = pool
        for w in candidates:
            if w in mine:
                continue
            nb = stream.neighbors[w]
            if all(o in nb and nb[o].covering(window) is not None for o in opposite):
                return False
    return True


# ---------------------------------------------------------------- sampler


class State(NamedTuple):
    top_nodes: tuple[str, ...]
    bottom_nodes: tuple[str, ...]
    interval: Interval


def _other(side: str) -> str:
    return BOTTOM if side == TOP else TOP


def trajectory_states(stream: BipartiteLinkStream, cfg: SamplerConfig, rng: random.Random) -> Iterator[State]:
    """Yield the clique state after each node addition of one greedy pass.

    ``cand[side]`` maps every node that could join ``side`` to the pieces of
    the current interval during which it is linked to the whole opposite side,
    keeping only pieces at least ``min_interval_duration`` long.  Pieces only
    ever shrink, so dropped pieces and nodes never come back.
    """
    min_d = cfg.min_interval_duration
    longest = cfg.subinterval_choice == "longest"
    nbrs = stream.neighbors
    lo, hi = stream.timespan
    members: dict[str, list[str]] = {TOP: [], BOTTOM: []}
    cand: dict[str, dict[str, list] | None] = {TOP: None, BOTTOM: None}
    pools = {TOP: stream.top, BOTTOM: stream.bottom}
    turn = TOP if rng.random() < 0.5 else BOTTOM

    while True:
        n_top, n_bot = len(members[TOP]), len(members[BOTTOM])
        if n_top == n_bot:
            order = (turn, _other(turn))
        else:
            order = (TOP if n_top < n_bot else BOTTOM,)
        side = None
        for s in order:
            if cand[s] is None:
                # opposite side empty: every node qualifies over the whole interval
                if pools[s] and hi - lo >= min_d:
                    side = s
                    v = pools[s][rng.randrange(len(pools[s]))]
                    piece = (lo, hi)
                    break
            elif cand[s]:
                side = s
                keys = list(cand[s])
                v = keys[rng.randrange(len(keys))]
                pieces = cand[s][v]
                if longest:
                    piece = max(pieces, key=lambda p: p[1] - p[0])
                else:
                    piece = pieces[rng.randrange(len(pieces))] if len(pieces) > 1 else pieces[0]
                break
        if side is None:
            return

        opp = _other(side)
        members[side].append(v)
        lo, hi = piece
        nb_v = nbrs[v]
        if cand[side] is not None:
            del cand[side][v]
            fresh = {}
            for w, ps in cand[side].items():
                kept = [p for p in _clip(ps, lo, hi) if p[1] - p[0] >= min_d]
                if kept:
                    fresh[w] = kept
            cand[side] = fresh
        fresh = {}
        if cand[opp] is None:
            taken = members[opp]
            for w, ivs in nb_v.items():
                if w in taken:
                    continue
                kept = [p for p in _clip(ivs.intervals, lo, hi) if p[1] - p[0] >= min_d]
                if kept:
                    fresh[w] = kept
        else:
            for w, ps in cand[opp].items():
                ivs = nb_v.get(w)
                if ivs is None:
                    continue
                kept = [p for p in _intersect(_clip(ps, lo, hi), ivs.intervals) if p[1] - p[0] >= min_d]
                if kept:
                    fresh[w] = kept
        cand[opp] = fresh
        turn = opp
        yield State(tuple(members[TOP]), tuple(members[BOTTOM]), Interval(lo, hi))


def sample_trajectory(stream: BipartiteLinkStream, cfg: SamplerConfig, rng: random.Random) -> list[Clique]:
    """Run one greedy pass and return the time-extended cliques it visits."""
    out = []
    for top, bottom, window in trajectory_states(stream, cfg, rng):
        if top and bottom and len(top) + len(bottom) >= cfg.min_emit_size:
            j = _extended_interval(stream, top, bottom, window)
            out.append(Clique(tuple(sorted(top)), tuple(sorted(bottom)), j))
    return out


def trajectory_rng(seed: int, index: int) -> random.Random:
    """RNG for trajectory ``index``: SeedSequence(seed) spawned at key (index,)."""
    state = np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(4, dtype=np.uint32)
    return random.Random(int.from_bytes(state.tobytes(), "little"))


def _run_range(stream: BipartiteLinkStream, cfg: SamplerConfig, start: int, count: int) -> CliqueSet:
    out = CliqueSet()
    for idx in range(start, start + count):
        for c in sample_trajectory(stream, cfg, trajectory_rng(cfg.rng_seed, idx)):
            out.add(c)
    out.trajectories = count
    return out


_worker_stream: BipartiteLinkStream | None = None
_worker_cfg: SamplerConfig | None = None


def _worker_init(stream: BipartiteLinkStream, cfg: SamplerConfig) -> None:
    global _worker_stream, _worker_cfg
    _worker_stream, _worker_cfg = stream, cfg


def _worker_run(start: int, count: int) -> CliqueSet:
    return _run_range(_worker_stream, _worker_cfg, start, count)


def sample_many(
    stream: BipartiteLinkStream,
    cfg: SamplerConfig,
    trajectories: int | None = None,
    seconds: float | None = None,
    workers: int = 1,
    start_index: int = 0,
    chunk: int = 256,
    checkpoint: Callable[[CliqueSet], None] | None = None,
) -> CliqueSet:
    """Run many trajectories and merge their emissions into a CliqueSet.

    The budget is a trajectory count or a wall-clock duration (or both, first
    reached wins).  Trajectory ``i`` always draws from ``trajectory_rng(seed,
    start_index + i)``, so a count budget yields the same set for any number
    of workers.  ``checkpoint`` is called with the running set after every
    completed chunk.
    """
    if trajectories is None and seconds is None:
        raise ValueError("need a trajectory count or a time budget")
    if (trajectories is not None and trajectories < 0) or (seconds is not None and seconds < 0):
        raise ValueError("budget must be >= 0")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    result = CliqueSet()
    if trajectories == 0 or seconds == 0 or not stream.pairs:
        return result
    deadline = None if seconds is None else time.monotonic() + seconds
    limit = start_index + trajectories if trajectories is not None else None

    def ranges() -> Iterator[tuple[int, int]]:
        for start in itertools.count(start_index, chunk):
            if limit is not None and start >= limit:
                return
            if deadline is not None and time.monotonic() >= deadline:
                return
            yield start, chunk if limit is None else min(chunk, limit - start)

    if workers == 1:
        for start, count in ranges():
            result.update(_run_range(stream, cfg, start, count))
            if checkpoint:
                checkpoint(result)
        return result

    with ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(stream, cfg)) as pool:
        pending = []
        it = ranges()
        for rng_range in itertools.islice(it, 2 * workers):
            pending.append(pool.submit(_worker_run, *rng_range))
        while pending:
            part = pending.pop(0).result()
            result.update(part)
            if checkpoint:
                checkpoint(result)
            nxt = next(it, None)
            if nxt is not None:
                pending.append(pool.submit(_worker_run, *nxt))
    return result


# ---------------------------------------------------------------- exact oracle


def _common_presence(interval_lists: Sequence[Sequence[tuple[float, float]]]) -> list[Interval]:
    """Maximal intervals covered by every list, by sweeping elementary pieces.

    Deliberately independent of the two-pointer intersection used elsewhere.
    """
    points = sorted({x for ivs in interval_lists for iv in ivs for x in iv})

    def covered(t: float) -> bool:
        return all(any(b <= t <= e for b, e in ivs) for ivs in interval_lists)

    # elements alternate point, open gap, point, ...; each is (start, end, covered)
    elements = []
    for i, p in enumerate(points):
        elements.append((p, p, covered(p)))
        if i + 1 < len(points):
            q = points[i + 1]
            elements.append((p, q, covered((p + q) / 2)))
    out = []
    run_start = None
    run_end = None
    for start, end, ok in elements:
        if ok:
            if run_start is None:
                run_start = start
            run_end = end
        elif run_start is not None:
            out.append(Interval(run_start, run_end))
            run_start = None
    if run_start is not None:
        out.append(Interval(run_start, run_end))
    return out


def enumerate_maximal_balanced_bruteforce(
    stream: BipartiteLinkStream, max_total_nodes: int = MAX_BRUTEFORCE_NODES
) -> CliqueSet:
    """Every maximal balanced clique with both sides non-empty, by exhaustion."""
    if max_total_nodes > MAX_BRUTEFORCE_NODES:
        raise ValueError(f"max_total_nodes is capped at {MAX_BRUTEFORCE_NODES}")
    if len(stream.top) + len(stream.bottom) > max_total_nodes:
        raise ValueError(
            f"stream has {len(stream.top) + len(stream.bottom)} nodes, above the limit of {max_total_nodes}"
        )

    def subsets(nodes):
        for k in range(1, len(nodes) + 1):
            yield from itertools.combinations(nodes, k)

    candidates = []
    for top in subsets(stream.top):
        for bottom in subsets(stream.bottom):
            if abs(len(top) - len(bottom)) > 1:
                continue
            lists = []
            for u in top:
                for v in bottom:
                    lists.append(stream.pairs[(u, v)].intervals if (u, v) in stream.pairs else ())
            for iv in _common_presence(lists):
                if iv.end - iv.begin > 0:
                    candidates.append(Clique(top, bottom, iv))

    maximal = [
        c
        for c in candidates
        if not any(d is not c and d.size >= c.size and c.contained_in(d) for d in candidates)
    ]
    return CliqueSet(maximal)
