"""Packet traces, side partitions, anomaly labels and synthetic scenarios."""

from __future__ import annotations

import configparser
import csv
import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

SIDES = ("top", "bottom")
_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)")
HEADER = ["timestamp", "src", "dst"]


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class PartitionError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


class PacketRecord(NamedTuple):
    timestamp: float
    src: str
    dst: str


# ---------------------------------------------------------------- packets


def parse_packet_csv(path: str | Path, header: bool | None = None) -> list[PacketRecord]:
    """Read ``timestamp,src,dst`` rows in file order.

    ``header=None`` skips a leading ``timestamp,src,dst`` line if present;
    ``True`` requires it, ``False`` treats every line as data.
    """
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if lineno == 1:
                is_header = [c.strip() for c in row] == HEADER
                if header and not is_header:
                    raise ParseError(path, 1, "expected header 'timestamp,src,dst'")
                if is_header and header is not False:
                    continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(path, lineno, f"expected 3 fields, got {len(row)}")
            ts, src, dst = (c.strip() for c in row)
            if not _DECIMAL.fullmatch(ts):
                raise ParseError(path, lineno, f"bad timestamp {ts!r}")
            t = float(ts)
            if not src or not dst:
                raise ParseError(path, lineno, "empty node id")
            if src == dst:
                raise ParseError(path, lineno, f"src equals dst ({src!r})")
            records.append(PacketRecord(t, src, dst))
    return records


def _positional(t: float) -> str:
    """Shortest round-tripping decimal, never in exponent notation."""
    return format(Decimal(repr(float(t))), "f")


def write_packet_csv(records: Iterable[PacketRecord], path: str | Path, header: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        if header:
            w.writerow(HEADER)
        for r in records:
            w.writerow((_positional(r.timestamp), r.src, r.dst))


# ---------------------------------------------------------------- partition


@dataclass
class PartitionRule:
    """Maps node ids to a side.

    Exact ids win over prefixes; among prefixes the longest match wins, ties
    going to the earliest rule.  Unmatched nodes take ``default`` or raise.
    With ``strict`` set, a packet whose endpoints share a side is an error;
    otherwise such packets are dropped by :func:`assign_sides`.
    """

    exact: dict[str, str] = field(default_factory=dict)
    prefixes: list[tuple[str, str]] = field(default_factory=list)
    default: str | None = None
    strict: bool = True

    def __post_init__(self):
        for side in list(self.exact.values()) + [s for _, s in self.prefixes]:
            if side not in SIDES:
                raise PartitionError(f"unknown side {side!r}")
        if self.default is not None and self.default not in SIDES:
            raise PartitionError(f"unknown default side {self.default!r}")

    @classmethod
    def from_sides(cls, top: Iterable[str], bottom: Iterable[str]) -> PartitionRule:
        exact = {u: "top" for u in top}
        for v in bottom:
            if exact.get(v) == "top":
                raise PartitionError(f"node {v!r} mapped to both sides")
            exact[v] = "bottom"
        return cls(exact=exact)

    def side_of(self, node: str) -> str:
        side = self.exact.get(node)
        if side is not None:
            return side
        best = None
        for prefix, side in self.prefixes:
            if node.startswith(prefix) and (best is None or len(prefix) > len(best[0])):
                best = (prefix, side)
        if best is not None:
            return best[1]
        if self.default is not None:
            return self.default
        raise PartitionError(f"node {node!r} matches no partition rule and there is no default")


def load_partition(path: str | Path, strict: bool = True) -> PartitionRule:
    """Read ``pattern,side`` lines; a trailing ``*`` makes the pattern a prefix."""
    exact: dict[str, str] = {}
    prefixes: list[tuple[str, str]] = []
    default = None
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2 or parts[1] not in SIDES:
                raise ParseError(path, lineno, f"expected 'pattern,top|bottom', got {line!r}")
            pattern, side = parts
            if pattern == "default":
                if default is not None:
                    raise ParseError(path, lineno, "default given twice")
                default = side
            elif pattern.endswith("*"):
                prefixes.append((pattern[:-1], side))
            else:
                if exact.get(pattern, side) != side:
                    raise ParseError(path, lineno, f"node {pattern!r} mapped to both sides")
                exact[pattern] = side
    return PartitionRule(exact=exact, prefixes=prefixes, default=default, strict=strict)


def write_partition(rule: PartitionRule, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for node, side in rule.exact.items():
            f.write(f"{node},{side}\n")
        for prefix, side in rule.prefixes:
            f.write(f"{prefix}*,{side}\n")
        if rule.default is not None:
            f.write(f"default,{rule.default}\n")


def assign_sides(
    records: Sequence[PacketRecord], rule: PartitionRule
) -> tuple[frozenset[str], frozenset[str], list[PacketRecord]]:
    """Split observed nodes into (top, bottom) and keep cross-side packets."""
    side: dict[str, str] = {}
    for node in {n for r in records for n in (r.src, r.dst)}:
        side[node] = rule.side_of(node)
    kept = []
    dropped = 0
    for row, r in enumerate(records):
        if side[r.src] == side[r.dst]:
            if rule.strict:
                raise PartitionError(f"packet {row} {r!r}: both endpoints are {side[r.src]}")
            dropped += 1
            continue
        kept.append(r)
    if dropped:
        log.warning("dropped %d same-side packets", dropped)
    top = frozenset(n for n, s in side.items() if s == "top")
    bottom = frozenset(n for n, s in side.items() if s == "bottom")
    return top, bottom, kept


# ---------------------------------------------------------------- labels


class LabelSet(frozenset):
    """Node ids flagged as anomalous."""

    def unmatched(self, nodes: Iterable[str]) -> frozenset[str]:
        return frozenset(self - set(nodes))


def load_labels(path: str | Path) -> LabelSet:
    ids = []
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if line:
                ids.append(line)
    return LabelSet(ids)


def write_labels(labels: Iterable[str], path: str | Path) -> None:
    Path(path).write_text("".join(f"{n}\n" for n in sorted(labels)), encoding="utf-8")


# ---------------------------------------------------------------- synthetic traces


@dataclass
class PlantedClique:
    name: str
    n_top: int
    n_bottom: int
    begin: float
    end: float
    period: float = 0.9
    flagged: bool = False


@dataclass
class PlantedScan:
    name: str
    sources: int
    destinations: int
    begin: float
    duration: float = 0.5
    flagged: bool = True


@dataclass
class Scenario:
    timespan: tuple[float, float]
    noise_rate: float = 0.0
    noise_top: int = 100
    noise_bottom: int = 100
    seed: int = 0
    cliques: list[PlantedClique] = field(default_factory=list)
    scans: list[PlantedScan] = field(default_factory=list)

    def validate(self) -> None:
        t0, t1 = self.timespan
        if not t0 < t1:
            raise ScenarioError(f"empty timespan {self.timespan}")
        if self.noise_rate < 0:
            raise ScenarioError("noise_rate must be >= 0")
        if self.noise_rate > 0 and (self.noise_top < 1 or self.noise_bottom < 1):
            raise ScenarioError("noise pools must be non-empty when noise_rate > 0")
        for c in self.cliques:
            if not t0 <= c.begin < c.end <= t1:
                raise ScenarioError(f"clique {c.name!r} [{c.begin},{c.end}] outside timespan")
            if not 0 < c.period <= 1:
                raise ScenarioError(f"clique {c.name!r}: period must be in (0, 1]")
            if c.end - c.begin < c.period:
                raise ScenarioError(f"clique {c.name!r} shorter than its period")
            if c.n_top < 1 or c.n_bottom < 1:
                raise ScenarioError(f"clique {c.name!r} needs nodes on both sides")
            if max(c.n_top, c.n_bottom) > 65536:
                raise ScenarioError(f"clique {c.name!r} too large")
        for s in self.scans:
            if not (t0 <= s.begin and s.begin + s.duration <= t1):
                raise ScenarioError(f"scan {s.name!r} outside timespan")
            if not 0 <= s.duration < 1:
                raise ScenarioError(f"scan {s.name!r}: duration must be in [0, 1)")
            if s.sources < 1 or not 1 <= s.destinations <= 254:
                raise ScenarioError(f"scan {s.name!r}: need >=1 source and 1..254 destinations")


@dataclass
class SyntheticTrace:
    packets: list[PacketRecord]
    events: list[dict]
    labels: LabelSet
    partition: PartitionRule


TOP_PREFIX = "10."


def _addr(first: str, index: int, k: int) -> str:
    return f"{first}.{index}.{k // 256}.{k % 256}"


def generate_synthetic(scenario: Scenario, seed: int | None = None) -> SyntheticTrace:
    """Background Poisson noise plus planted cliques and coordinated scans.

    Top ids start with ``10.`` (the monitored network); everything else is
    bottom.  Noise, clique and scan events use disjoint address blocks.
    Timestamps are rounded to microseconds.
    """
    scenario.validate()
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    t0, t1 = scenario.timespan
    packets: list[PacketRecord] = []
    events: list[dict] = []
    flagged: set[str] = set()

    def emit(t: float, top: str, bottom: str) -> None:
        t = round(float(t), 6)
        if rng.random() < 0.5:
            packets.append(PacketRecord(t, top, bottom))
        else:
            packets.append(PacketRecord(t, bottom, top))

    if scenario.noise_rate > 0:
        n = rng.poisson(scenario.noise_rate * (t1 - t0))
        times = np.sort(rng.uniform(t0, t1, size=n))
        us = rng.integers(0, scenario.noise_top, size=n)
        vs = rng.integers(0, scenario.noise_bottom, size=n)
        for t, u, v in zip(times, us, vs):
            emit(t, _addr("10", 1, int(u)), _addr("198", 51, int(v)))

    for idx, c in enumerate(scenario.cliques):
        tops = [_addr("10", 100 + idx, k) for k in range(c.n_top)]
        bottoms = [_addr("203", idx, k) for k in range(c.n_bottom)]
        for u in tops:
            for v in bottoms:
                t = c.begin + rng.uniform(0, c.period)
                while t <= c.end:
                    emit(t, u, v)
                    t += c.period
        if c.flagged:
            flagged.update(tops + bottoms)
        events.append(
            {"kind": "clique", "name": c.name, "top": tops, "bottom": bottoms, "begin": c.begin, "end": c.end}
        )

    for idx, s in enumerate(scenario.scans):
        sources = [_addr("192", idx, k + 1) for k in range(s.sources)]
        dests = [f"10.200.{idx}.{k + 1}" for k in range(s.destinations)]
        for src in sources:
            for dst in dests:
                emit(s.begin + rng.uniform(0, s.duration), dst, src)
        if s.flagged:
            flagged.update(sources)
        events.append(
            {
                "kind": "scan",
                "name": s.name,
                "top": dests,
                "bottom": sources,
                "begin": s.begin,
                "end": s.begin + s.duration,
            }
        )

    if not packets:
        raise ScenarioError("scenario produced no packets")
    packets.sort()
    partition = PartitionRule(prefixes=[(TOP_PREFIX, "top")], default="bottom")
    return SyntheticTrace(packets, events, LabelSet(flagged), partition)


def _span(text: str) -> tuple[float, float]:
    a, b = text.split(":")
    return float(a), float(b)


def load_scenario(path: str | Path) -> Scenario:
    """Read an INI scenario.

    ``[scenario]`` holds ``timespan = t0:t1``, ``seed``, ``noise_rate``
    (packets/s), ``noise_top`` and ``noise_bottom`` (pool sizes).  Each
    ``[clique.NAME]`` section holds ``top``, ``bottom``, ``begin``, ``end``,
    ``period``, ``flagged``; each ``[scan.NAME]`` holds ``sources``,
    ``destinations``, ``begin``, ``duration``, ``flagged``.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path, encoding="utf-8"):
        raise ScenarioError(f"cannot read scenario {path}")
    if not cp.has_section("scenario"):
        raise ScenarioError("missing [scenario] section")
    try:
        sc = cp["scenario"]
        scenario = Scenario(
            timespan=_span(sc["timespan"]),
            noise_rate=sc.getfloat("noise_rate", 0.0),
            noise_top=sc.getint("noise_top", 100),
            noise_bottom=sc.getint("noise_bottom", 100),
            seed=sc.getint("seed", 0),
        )
        for name in cp.sections():
            sec = cp[name]
            if name.startswith("clique."):
                scenario.cliques.append(
                    PlantedClique(
                        name=name[7:],
                        n_top=sec.getint("top"),
                        n_bottom=sec.getint("bottom"),
                        begin=sec.getfloat("begin"),
                        end=sec.getfloat("end"),
                        period=sec.getfloat("period", 0.9),
                        flagged=sec.getboolean("flagged", False),
                    )
                )
            elif name.startswith("scan."):
                scenario.scans.append(
                    PlantedScan(
                        name=name[5:],
                        sources=sec.getint("sources"),
                        destinations=sec.getint("destinations"),
                        begin=sec.getfloat("begin"),
                        duration=sec.getfloat("duration", 0.5),
                        flagged=sec.getboolean("flagged", True),
                    )
                )
            elif name != "scenario":
                raise ScenarioError(f"unknown section [{name}]")
        scenario.validate()
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bad scenario {path}: {exc}") from exc
    return scenario
