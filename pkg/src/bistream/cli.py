"""``bistream`` command line: synth, build, sample, analyze.

Every flag can also come from an INI file given with ``--config``; keys are
flag names with dashes replaced by underscores, read from the ``[run]``
section and then from the section named after the subcommand.  Flags given on
the command line win.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import analysis
from .clique import Clique, SamplerConfig, _extended_interval, is_maximal_balanced, sample_many
from .ingest import (
    ParseError,
    PartitionError,
    PartitionRule,
    ScenarioError,
    assign_sides,
    generate_synthetic,
    load_labels,
    load_partition,
    load_scenario,
    parse_packet_csv,
    write_labels,
    write_packet_csv,
    write_partition,
)
from .stream import StreamError, links, load_stream, prune_degree_one, save_stream, stream_from_packets
from .store import CliqueStore, StoreError

log = logging.getLogger("bistream")

STREAM_FILE = "stream.json"
STATS_FILE = "stats.json"
SELECTORS = ("sizes", "ccdf", "ccdf-by-size", "timespan", "activity", "summary", "induced")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _span(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in str(text).split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'begin:end', got {text!r}") from None
    if a > b:
        raise argparse.ArgumentTypeError(f"empty span {text!r}")
    return a, b


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "yes", "true", "on")


@dataclass
class RunConfig:
    out: Path
    packets: Path | None = None
    partition: Path | None = None
    labels: Path | None = None
    half_window: float = 0.5
    timespan: tuple[float, float] | None = None
    prune: bool = False
    lenient: bool = False
    seed: int = 0
    min_emit_size: int = 2
    min_interval: float = 1e-6
    subinterval: str = "uniform"
    trajectories: int | None = None
    seconds: float | None = None
    workers: int = 1
    checkpoint_every: int = 10_000
    resume: bool = False

    def validate(self, command: str) -> None:
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        for name in ("packets", "partition", "labels"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise UsageError(f"--{name} file not found: {p}")
        if command == "build" and (self.packets is None or self.partition is None):
            raise UsageError("build needs --packets and --partition")
        if command == "sample":
            if self.trajectories is None and self.seconds is None:
                raise UsageError("sample needs --trajectories or --seconds")
            if (self.trajectories is not None and self.trajectories <= 0) or (
                self.seconds is not None and self.seconds <= 0
            ):
                raise UsageError("budget must be > 0")

    def sampler(self) -> SamplerConfig:
        try:
            return SamplerConfig(
                min_emit_size=self.min_emit_size,
                min_interval_duration=self.min_interval,
                subinterval_choice=self.subinterval,
                rng_seed=self.seed,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bistream", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="INI file supplying flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic trace")
    p.add_argument("--scenario", type=Path, required=False)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("build", help="build a link stream from packets")
    p.add_argument("--packets", type=Path)
    p.add_argument("--partition", type=Path)
    p.add_argument("--lenient", action="store_true", default=None, help="drop same-side packets")
    p.add_argument("--half-window", type=float)
    p.add_argument("--timespan", type=_span)
    p.add_argument("--prune", action="store_true", default=None, help="iteratively drop degree-1 nodes")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sample", help="sample balanced cliques into the store")
    p.add_argument("--out", type=Path)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--seconds", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-emit-size", type=int)
    p.add_argument("--min-interval", type=float)
    p.add_argument("--subinterval", choices=("uniform", "longest"))
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--resume", action="store_true", default=None)

    p = sub.add_parser("analyze", help="write analysis tables")
    p.add_argument("selector", choices=SELECTORS)
    p.add_argument("--out", type=Path)
    p.add_argument("--labels", type=Path)
    p.add_argument("--min-size", type=int)
    p.add_argument("--window", type=_span)
    p.add_argument("--maximal-only", action="store_true", default=None)
    return parser


_TYPES = {
    "half_window": float,
    "timespan": _span,
    "window": _span,
    "seed": int,
    "min_emit_size": int,
    "min_interval": float,
    "trajectories": int,
    "seconds": float,
    "workers": int,
    "checkpoint_every": int,
    "min_size": int,
    "prune": _bool,
    "lenient": _bool,
    "resume": _bool,
    "maximal_only": _bool,
}


def _config_values(path: Path, command: str) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path, encoding="utf-8"):
        raise UsageError(f"cannot read config {path}")
    values = {}
    for section in ("run", command):
        if cp.has_section(section):
            for key, raw in cp[section].items():
                key = key.replace("-", "_")
                conv = _TYPES.get(key)
                if conv is None and key in ("out", "packets", "partition", "labels", "scenario"):
                    conv = Path
                try:
                    values[key] = conv(raw) if conv else raw
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config {path} [{section}] {key}: {exc}") from exc
    return values


def _merged_args(argv: list[str] | None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    if args.config is not None:
        for key, value in _config_values(args.config, args.command).items():
            if getattr(args, key, None) is None:
                setattr(args, key, value)
    if getattr(args, "out", None) is None:
        raise UsageError("--out is required")
    return args


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(out=Path(args.out))
    for key in RunConfig.__dataclass_fields__:
        value = getattr(args, key, None)
        if value is not None and key != "out":
            setattr(cfg, key, value)
    cfg.validate(args.command)
    return cfg


# ---------------------------------------------------------------- commands


def cmd_synth(args: argparse.Namespace) -> int:
    if args.scenario is None:
        raise UsageError("synth needs --scenario")
    try:
        scenario = load_scenario(args.scenario)
        trace = generate_synthetic(scenario, seed=args.seed)
    except ScenarioError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_packet_csv(trace.packets, out / "packets.csv")
    write_partition(trace.partition, out / "partition.txt")
    write_labels(trace.labels, out / "labels.txt")
    (out / "truth.json").write_text(json.dumps(trace.events, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(trace.packets)} packets, {len(trace.events)} planted events to {out}")
    return 0


def cmd_build(cfg: RunConfig) -> dict:
    try:
        records = parse_packet_csv(cfg.packets)
        rule = load_partition(cfg.partition, strict=not cfg.lenient)
        top, bottom, kept = assign_sides(records, rule)
        stream = stream_from_packets(
            kept, PartitionRule.from_sides(top, bottom), half_window=cfg.half_window, timespan=cfg.timespan
        )
    except (ParseError, PartitionError, StreamError) as exc:
        raise DataError(str(exc)) from exc
    if cfg.prune:
        stream = prune_degree_one(stream)
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_stream(stream, cfg.out / STREAM_FILE)
    stats = {
        "top": len(stream.top),
        "bottom": len(stream.bottom),
        "packets": len(kept),
        "links": len(links(stream)),
        "timespan": list(stream.timespan),
        "half_window": cfg.half_window,
        "pruned": cfg.prune,
    }
    (cfg.out / STATS_FILE).write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    for key, value in stats.items():
        print(f"{key}: {value}")
    return stats


def _load_stream(out: Path):
    path = out / STREAM_FILE
    if not path.is_file():
        raise UsageError(f"no stream in {out}; run 'bistream build' first")
    try:
        return load_stream(path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"corrupt stream file {path}: {exc}") from exc


def cmd_sample(cfg: RunConfig) -> dict:
    stream = _load_stream(cfg.out)
    sampler = cfg.sampler()
    store = CliqueStore(cfg.out)
    try:
        base_lines, base_meta = store.load()
    except StoreError as exc:
        raise DataError(str(exc)) from exc
    start = base_meta.next_index.get(str(cfg.seed), 0) if cfg.resume else 0

    last_saved = [0]

    def checkpoint(found):
        if found.trajectories - last_saved[0] >= cfg.checkpoint_every:
            lines, meta = store.merged(base_lines, base_meta, found)
            store.save(lines, meta)
            last_saved[0] = found.trajectories

    t0 = time.monotonic()
    found = sample_many(
        stream,
        sampler,
        trajectories=cfg.trajectories,
        seconds=cfg.seconds,
        workers=cfg.workers,
        start_index=start,
        checkpoint=checkpoint,
    )
    elapsed = time.monotonic() - t0
    lines, meta = store.merged(base_lines, base_meta, found)
    seed_key = str(cfg.seed)
    meta.next_index[seed_key] = max(meta.next_index.get(seed_key, 0), start + found.trajectories)
    run = {
        "seed": cfg.seed,
        "start_index": start,
        "trajectories": found.trajectories,
        "sampled": found.total,
        "new_distinct": len(lines) - len(base_lines),
        "workers": cfg.workers,
    }
    meta.runs.append(run)
    store.save(lines, meta)
    print(
        f"trajectories: {found.trajectories} ({found.trajectories / max(elapsed, 1e-9):.0f}/s)\n"
        f"sampled: {found.total}\nnew distinct: {run['new_distinct']}\n"
        f"store: {meta.distinct} distinct of {meta.total_sampled} sampled"
    )
    return run


def _resolve(stream, c: Clique) -> Clique | None:
    """Recover exact interval endpoints of a stored (6-decimal) clique."""
    mid = (c.begin + c.end) / 2
    try:
        j = _extended_interval(stream, c.top_nodes, c.bottom_nodes, (mid, mid))
    except KeyError:
        return None
    return None if j is None else c._replace(interval=j)


def cmd_analyze(args: argparse.Namespace) -> list[Path]:
    out = Path(args.out)
    selector = args.selector
    min_size = args.min_size if args.min_size is not None else 0
    needs_labels = selector in ("summary", "induced")
    if needs_labels and args.labels is None:
        raise UsageError(f"labels required for '{selector}' (use --labels)")
    if args.labels is not None and not Path(args.labels).is_file():
        raise UsageError(f"--labels file not found: {args.labels}")
    labels = load_labels(args.labels) if args.labels is not None else frozenset()

    store = CliqueStore(out)
    needs_store = selector != "activity"
    stream = _load_stream(out) if selector in ("activity", "summary") or args.maximal_only else None
    cliques: list[Clique] = []
    if needs_store:
        if not store.exists():
            raise UsageError(f"no clique store in {out}; run 'bistream sample' first")
        try:
            cliques = store.cliques()
        except StoreError as exc:
            raise DataError(str(exc)) from exc
        if args.maximal_only:
            resolved = [_resolve(stream, c) for c in cliques]
            cliques = [c for c, r in zip(cliques, resolved) if r is not None and is_maximal_balanced(stream, r)]

    dest = out / "analysis"
    dest.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if selector == "sizes":
        path = dest / "sizes.csv"
        analysis.size_distribution(cliques, min_size).to_csv(path)
        written.append(path)
    elif selector == "ccdf":
        path = dest / "ccdf.csv"
        analysis.duration_ccdf(cliques, min_size=min_size).to_csv(path)
        written.append(path)
    elif selector == "ccdf-by-size":
        path = dest / "ccdf_by_size.csv"
        tables = analysis.duration_ccdf(cliques, group_by_size=True, min_size=min_size)
        analysis.ccdf_by_size_table(tables).to_csv(path)
        written.append(path)
    elif selector == "timespan":
        path = dest / "timespan.csv"
        analysis.timespan_table(cliques, min_size).to_csv(path)
        written.append(path)
    elif selector == "activity":
        path = dest / "activity.csv"
        analysis.activity_per_second(stream, labels).to_csv(path)
        written.append(path)
    elif selector == "summary":
        path = dest / "summary.csv"
        summary = analysis.anomaly_stats(cliques, stream, labels, min_size=min_size)
        summary.to_csv(path)
        for key, value in summary.rows():
            print(f"{key}: {value}")
        written.append(path)
    elif selector == "induced":
        if args.window is None:
            raise UsageError("induced needs --window begin:end")
        graph = analysis.induced_graph(cliques, args.window, min_size, labels)
        graph.write_csv(dest / "induced_edges.csv", dest / "induced_nodes.csv")
        graph.write_graphml(dest / "induced.graphml")
        comps = graph.components()
        flagged = {n for n, _, a in graph.nodes if a}
        for i, comp in enumerate(comps):
            k = len(comp & flagged)
            print(f"component {i}: {len(comp)} nodes, {k} flagged, {len(comp) - k} unflagged")
        written += [dest / "induced_edges.csv", dest / "induced_nodes.csv", dest / "induced.graphml"]
    for path in written:
        log.info("wrote %s", path)
    return written


def main(argv: list[str] | None = None) -> int:
    try:
        try:
            args = _merged_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "analyze":
            cmd_analyze(args)
            return 0
        cfg = _run_config(args)
        if args.command == "build":
            cmd_build(cfg)
        else:
            cmd_sample(cfg)
        return 0
    except UsageError as exc:
        print(f"bistream: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"bistream: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
