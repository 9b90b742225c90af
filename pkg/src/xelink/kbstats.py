"""Knowledge-base statistics from an anchor-annotated article collection.

Counts are derived from anchor links only: how often each entity is the
target of an anchor, on how many pages two entities co-occur as targets
(once per unordered pair per page), and the multiset of outgoing link
targets per page. Ingestion is shardable; `merge` is the only cross-shard
synchronization point.

On disk a statistics store is a directory with meta.json (constants,
totals, checksums) and three sorted TSVs, so identical stores produce
identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from xelink.corpus import normalize_entity

FORMAT_VERSION = 1
DEFAULT_EPSILON = 1e-7
DEFAULT_SMOOTHING = 0.75


class StatsError(ValueError):
    """Malformed statistics store or incompatible merge."""


@dataclass(frozen=True)
class AnchorPage:
    """One article page: its own entity plus its anchor links in order."""

    page_entity: str
    links: tuple[tuple[str, str], ...]  # (anchor surface, target entity)

    def __post_init__(self):
        object.__setattr__(self, "page_entity", normalize_entity(self.page_entity))
        links = []
        for surface, target in self.links:
            if not surface:
                raise StatsError(f"page {self.page_entity!r}: empty anchor surface")
            links.append((surface, normalize_entity(target)))
        object.__setattr__(self, "links", tuple(links))


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass
class KbStatistics:
    """Aggregated anchor-link statistics plus the feature constants."""

    entity_count: dict[str, int] = field(default_factory=dict)
    pair_count: dict[tuple[str, str], int] = field(default_factory=dict)
    outlinks: dict[str, dict[str, int]] = field(default_factory=dict)
    total_anchor_count: int = 0
    total_pair_count: int = 0
    epsilon: float = DEFAULT_EPSILON
    smoothing: float = DEFAULT_SMOOTHING
    _smoothed_total: float | None = field(default=None, repr=False, compare=False)

    def count(self, entity: str) -> int:
        return self.entity_count.get(entity, 0)

    def pair(self, a: str, b: str) -> int:
        return self.pair_count.get(_pair_key(a, b), 0)

    def outlink_multiplicity(self, page: str, target: str) -> int:
        return self.outlinks.get(page, {}).get(target, 0)

    def outlink_total(self, page: str) -> int:
        return sum(self.outlinks.get(page, {}).values())

    def smoothed_total(self) -> float:
        """Sum of count**smoothing over all entities (PPMI marginal norm)."""
        if self._smoothed_total is None:
            self._smoothed_total = float(
                sum(c**self.smoothing for c in self.entity_count.values())
            )
        return self._smoothed_total

    def smoothed_prob(self, entity: str) -> float:
        total = self.smoothed_total()
        if total == 0.0:
            return 0.0
        return self.count(entity) ** self.smoothing / total

    def has_entity(self, entity: str) -> bool:
        return entity in self.entity_count

    def check(self) -> None:
        """Validate the count-total invariants; raises StatsError on breakage."""
        if self.total_anchor_count != sum(self.entity_count.values()):
            raise StatsError("total_anchor_count does not match entity counts")
        if self.total_pair_count != sum(self.pair_count.values()):
            raise StatsError("total_pair_count does not match pair counts")
        for a, b in self.pair_count:
            if a not in self.entity_count or b not in self.entity_count:
                raise StatsError(f"pair ({a!r}, {b!r}) references an uncounted entity")
        if not self.epsilon > 0:
            raise StatsError("epsilon must be positive")
        if not 0 < self.smoothing <= 1:
            raise StatsError("smoothing must lie in (0, 1]")


def ingest(
    pages: Iterable[AnchorPage],
    epsilon: float = DEFAULT_EPSILON,
    smoothing: float = DEFAULT_SMOOTHING,
) -> KbStatistics:
    """Build statistics from a finite stream of anchor pages.

    Pair co-occurrence is page-level: each unordered pair of distinct
    entities that are both link targets on a page counts once for that
    page. Self-pairs are never counted.
    """
    stats = KbStatistics(epsilon=epsilon, smoothing=smoothing)
    for page in pages:
        targets_on_page: set[str] = set()
        page_out = stats.outlinks.setdefault(page.page_entity, {})
        for _surface, target in page.links:
            stats.entity_count[target] = stats.entity_count.get(target, 0) + 1
            stats.total_anchor_count += 1
            page_out[target] = page_out.get(target, 0) + 1
            targets_on_page.add(target)
        for key in {_pair_key(a, b) for a in targets_on_page for b in targets_on_page if a < b}:
            stats.pair_count[key] = stats.pair_count.get(key, 0) + 1
            stats.total_pair_count += 1
        if not page_out:
            del stats.outlinks[page.page_entity]
    return stats


def merge(a: KbStatistics, b: KbStatistics) -> KbStatistics:
    """Pointwise sum of two shard ingests built with identical constants."""
    if a.epsilon != b.epsilon or a.smoothing != b.smoothing:
        raise StatsError(
            "cannot merge statistics with different constants: "
            f"epsilon {a.epsilon} vs {b.epsilon}, smoothing {a.smoothing} vs {b.smoothing}"
        )
    out = KbStatistics(epsilon=a.epsilon, smoothing=a.smoothing)
    out.entity_count = dict(a.entity_count)
    for e, c in b.entity_count.items():
        out.entity_count[e] = out.entity_count.get(e, 0) + c
    out.pair_count = dict(a.pair_count)
    for k, c in b.pair_count.items():
        out.pair_count[k] = out.pair_count.get(k, 0) + c
    out.outlinks = {page: dict(targets) for page, targets in a.outlinks.items()}
    for page, targets in b.outlinks.items():
        page_out = out.outlinks.setdefault(page, {})
        for t, c in targets.items():
            page_out[t] = page_out.get(t, 0) + c
    out.total_anchor_count = a.total_anchor_count + b.total_anchor_count
    out.total_pair_count = a.total_pair_count + b.total_pair_count
    return out


def read_anchor_corpus(path: str | Path) -> Iterator[AnchorPage]:
    """Stream AnchorPages from a JSONL file of {"page", "links"} records."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                links = tuple((l["surface"], l["entity"]) for l in obj.get("links", ()))
                yield AnchorPage(page_entity=obj["page"], links=links)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise StatsError(f"{path}:{lineno}: {exc}") from exc


_ENTITY_FILE = "entity_counts.tsv"
_PAIR_FILE = "pair_counts.tsv"
_OUTLINK_FILE = "outlinks.tsv"
_META_FILE = "meta.json"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save(stats: KbStatistics, directory: str | Path) -> None:
    """Write the store directory; all TSVs sorted for deterministic bytes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / _ENTITY_FILE, "w", encoding="utf-8") as fh:
        for entity in sorted(stats.entity_count):
            fh.write(f"{entity}\t{stats.entity_count[entity]}\n")
    with open(directory / _PAIR_FILE, "w", encoding="utf-8") as fh:
        for a, b in sorted(stats.pair_count):
            fh.write(f"{a}\t{b}\t{stats.pair_count[(a, b)]}\n")
    with open(directory / _OUTLINK_FILE, "w", encoding="utf-8") as fh:
        for page in sorted(stats.outlinks):
            for target in sorted(stats.outlinks[page]):
                fh.write(f"{page}\t{target}\t{stats.outlinks[page][target]}\n")
    meta = {
        "format_version": FORMAT_VERSION,
        "epsilon": stats.epsilon,
        "smoothing": stats.smoothing,
        "total_anchor_count": stats.total_anchor_count,
        "total_pair_count": stats.total_pair_count,
        "checksums": {
            name: _sha256(directory / name)
            for name in (_ENTITY_FILE, _PAIR_FILE, _OUTLINK_FILE)
        },
    }
    with open(directory / _META_FILE, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load(directory: str | Path) -> KbStatistics:
    """Load a store directory; verifies format version and file checksums."""
    directory = Path(directory)
    meta_path = directory / _META_FILE
    if not meta_path.exists():
        raise StatsError(f"missing {meta_path}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != FORMAT_VERSION:
        raise StatsError(
            f"{meta_path}: unknown format_version {meta.get('format_version')!r}"
        )
    for name, expected in meta["checksums"].items():
        path = directory / name
        if not path.exists():
            raise StatsError(f"missing {path}")
        actual = _sha256(path)
        if actual != expected:
            raise StatsError(f"checksum mismatch for {path}")
    stats = KbStatistics(epsilon=float(meta["epsilon"]), smoothing=float(meta["smoothing"]))
    with open(directory / _ENTITY_FILE, encoding="utf-8") as fh:
        for line in fh:
            entity, count = line.rstrip("\n").split("\t")
            stats.entity_count[entity] = int(count)
    with open(directory / _PAIR_FILE, encoding="utf-8") as fh:
        for line in fh:
            a, b, count = line.rstrip("\n").split("\t")
            stats.pair_count[(a, b)] = int(count)
    with open(directory / _OUTLINK_FILE, encoding="utf-8") as fh:
        for line in fh:
            page, target, count = line.rstrip("\n").split("\t")
            stats.outlinks.setdefault(page, {})[target] = int(count)
    stats.total_anchor_count = int(meta["total_anchor_count"])
    stats.total_pair_count = int(meta["total_pair_count"])
    stats.check()
    return stats


@dataclass(frozen=True)
class BilingualMap:
    """Partial map from source-language entity titles to English titles."""

    entries: dict[str, str]

    def get(self, source_entity: str) -> str | None:
        return self.entries.get(source_entity)

    @classmethod
    def read_tsv(cls, path: str | Path) -> "BilingualMap":
        entries: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise StatsError(f"{path}:{lineno}: expected 2 tab-separated fields")
                entries[normalize_entity(parts[0])] = normalize_entity(parts[1])
        return cls(entries=entries)
