"""On-disk deduplicated clique store.

A store is a directory holding ``cliques.txt`` (one canonical clique line per
row, sorted, no duplicates) and ``cliques.meta.json`` (counters).  Writes go
through a temporary file and an atomic rename.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .clique import Clique, CliqueSet, format_clique, parse_clique

LINES_FILE = "cliques.txt"
META_FILE = "cliques.meta.json"


class StoreError(Exception):
    pass


@dataclass
class StoreMeta:
    distinct: int = 0
    total_sampled: int = 0
    trajectories: int = 0
    next_index: dict[str, int] = field(default_factory=dict)  # seed -> first unused trajectory index
    runs: list[dict] = field(default_factory=list)


class CliqueStore:
    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.lines_path = self.dir / LINES_FILE
        self.meta_path = self.dir / META_FILE

    def exists(self) -> bool:
        return self.lines_path.exists() or self.meta_path.exists()

    def load(self) -> tuple[set[str], StoreMeta]:
        """Read and validate the store; an absent store is empty."""
        if not self.exists():
            return set(), StoreMeta()
        if not (self.lines_path.exists() and self.meta_path.exists()):
            raise StoreError(f"store in {self.dir} is incomplete; delete it and re-run sampling")
        try:
            meta = StoreMeta(**json.loads(self.meta_path.read_text(encoding="utf-8")))
        except (ValueError, TypeError) as exc:
            raise StoreError(f"corrupt store metadata {self.meta_path}: {exc}; rebuild the store") from exc
        lines = self.lines_path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            try:
                parse_clique(line)
            except ValueError as exc:
                raise StoreError(f"corrupt store line {i + 1}: {exc}; rebuild the store") from exc
            if i and lines[i - 1] >= line:
                raise StoreError(f"store not sorted/unique at line {i + 1}; rebuild the store")
        if meta.distinct != len(lines) or meta.total_sampled < meta.distinct:
            raise StoreError(f"store counters disagree with {self.lines_path}; rebuild the store")
        return set(lines), meta

    def cliques(self) -> list[Clique]:
        lines, _ = self.load()
        return [parse_clique(line) for line in sorted(lines)]

    def save(self, lines: set[str], meta: StoreMeta) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        meta.distinct = len(lines)
        _atomic_write(self.lines_path, "".join(line + "\n" for line in sorted(lines)))
        _atomic_write(self.meta_path, json.dumps(asdict(meta), indent=2, sort_keys=True) + "\n")

    def merged(self, base_lines: set[str], base: StoreMeta, found: CliqueSet) -> tuple[set[str], StoreMeta]:
        lines = base_lines | {format_clique(c) for c in found}
        meta = StoreMeta(**json.loads(json.dumps(asdict(base))))
        meta.total_sampled += found.total
        meta.trajectories += found.trajectories
        meta.distinct = len(lines)
        return lines, meta


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
