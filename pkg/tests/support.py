"""Shared builders for the test suite."""

from __future__ import annotations

import random

from bistream.ingest import PacketRecord, PartitionRule
from bistream.stream import BipartiteLinkStream

TOY_PAIRS = {
    ("u", "a"): [(1, 6), (8, 10)],
    ("u", "b"): [(0, 5)],
    ("v", "a"): [(2, 5), (7, 10)],
    ("v", "b"): [(3, 6)],
}

TOY_LINKS = {(1, 6, "u", "a"), (8, 10, "u", "a"), (0, 5, "u", "b"), (2, 5, "v", "a"), (7, 10, "v", "a"), (3, 6, "v", "b")}

TOY_PARTITION = PartitionRule(exact={"u": "top", "v": "top", "a": "bottom", "b": "bottom"})


def toy_stream() -> BipartiteLinkStream:
    return BipartiteLinkStream((0, 10), ["u", "v"], ["a", "b"], TOY_PAIRS)


def toy_packets() -> list[PacketRecord]:
    """One packet per second at half-second offsets reproduces every toy-stream link."""
    out = []
    for (u, v), ivs in TOY_PAIRS.items():
        for b, e in ivs:
            t = b + 0.5
            flip = False
            while t <= e - 0.5:
                out.append(PacketRecord(t, v, u) if flip else PacketRecord(t, u, v))
                flip = not flip
                t += 1.0
    return out


def random_stream(rng: random.Random, max_top: int = 5, max_bottom: int = 5, max_links: int = 15) -> BipartiteLinkStream:
    """Small stream with half-second-grid endpoints on [0, 20]."""
    n_top = rng.randint(1, max_top)
    n_bottom = rng.randint(1, max_bottom)
    top = [f"t{i}" for i in range(n_top)]
    bottom = [f"b{i}" for i in range(n_bottom)]
    pairs: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for _ in range(rng.randint(1, max_links)):
        key = (rng.choice(top), rng.choice(bottom))
        b = rng.randint(0, 36) / 2
        e = min(20.0, b + rng.randint(1, 16) / 2)
        pairs.setdefault(key, []).append((b, e))
    return BipartiteLinkStream((0, 20), top, bottom, pairs)
