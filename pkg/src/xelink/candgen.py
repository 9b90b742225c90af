"""Candidate generation: surface dictionary, calibration, and list fusion.

The dictionary maps a normalized surface string to entity counts gathered
from source-language anchor text, redirected into the English KB through a
bilingual entity map. Lookup returns the top-K entities by empirical prior
p(entity | surface). Scores from non-probabilistic sources are first
pushed onto the zero-one simplex with a temperature softmax; calibrated
lists from several sources are then fused by arithmetic mean, treating
absence from a source as probability zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from xelink.corpus import normalize_entity
from xelink.kbstats import AnchorPage, BilingualMap

DEFAULT_GAMMA = 1.0
DEFAULT_TOP_K = 30


class CandGenError(ValueError):
    """Invalid candidate-generation input."""


def normalize_surface(surface: str) -> str:
    """Lowercase and collapse whitespace; applied to dictionary keys and lookups."""
    return " ".join(surface.split()).lower()


@dataclass
class MentionEntityMap:
    """Surface -> [(entity, count)] table with derived priors.

    `dropped_anchors` counts source anchors whose entity had no bilingual
    entry and therefore never reached the table.
    """

    table: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    lowercase: bool = True
    dropped_anchors: int = 0

    def priors(self, surface: str) -> list[tuple[str, float]]:
        """All entities for a surface with p(e|m), summing to 1; [] if unknown."""
        entries = self.table.get(normalize_surface(surface))
        if not entries:
            return []
        total = sum(c for _, c in entries)
        return [(e, c / total) for e, c in entries]

    def entities(self) -> set[str]:
        return {e for entries in self.table.values() for e, _ in entries}


def build_wikimention(
    src_pages: Iterable[AnchorPage], bimap: BilingualMap
) -> MentionEntityMap:
    """Count (surface, English entity) anchor pairs through the bilingual map."""
    counts: dict[str, dict[str, int]] = {}
    dropped = 0
    for page in src_pages:
        for surface, src_entity in page.links:
            english = bimap.get(src_entity)
            if english is None:
                dropped += 1
                continue
            per_surface = counts.setdefault(normalize_surface(surface), {})
            per_surface[english] = per_surface.get(english, 0) + 1
    table = {
        surface: sorted(per_surface.items())
        for surface, per_surface in counts.items()
    }
    return MentionEntityMap(table=table, dropped_anchors=dropped)


def lookup(
    mention_map: MentionEntityMap, surface: str, k: int = DEFAULT_TOP_K
) -> list[tuple[str, float]]:
    """Top-k entities by prior, descending; ties broken by entity id.

    Probabilities are the full-surface priors and are not renormalized
    after truncation. Unknown surfaces yield an empty list.
    """
    if k < 1:
        raise CandGenError(f"k must be >= 1, got {k}")
    scored = mention_map.priors(surface)
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def calibrate(
    scores: Sequence[tuple[str, float]], gamma: float = DEFAULT_GAMMA
) -> list[tuple[str, float]]:
    """Temperature softmax over a top-n list: p_j = exp(g*s_j) / sum exp(g*s_k).

    Larger gamma sharpens the distribution; ranking is preserved.
    """
    if not scores:
        raise CandGenError("cannot calibrate an empty candidate list")
    if gamma <= 0:
        raise CandGenError(f"gamma must be positive, got {gamma}")
    raw = [gamma * s for _, s in scores]
    if not all(math.isfinite(s) for s in raw):
        raise CandGenError("non-finite score in candidate list")
    peak = max(raw)
    exps = [math.exp(s - peak) for s in raw]
    total = sum(exps)
    return [(e, x / total) for (e, _), x in zip(scores, exps)]


def combine(
    lists: Sequence[Sequence[tuple[str, float]]], k: int = DEFAULT_TOP_K
) -> list[tuple[str, float]]:
    """Fuse calibrated per-source lists by mean probability over all sources.

    An entity absent from a source contributes 0 for that source, so
    single-source candidates are penalized but never dropped before the
    final top-k cut. Ties break by entity id ascending.
    """
    if not lists:
        raise CandGenError("combine requires at least one source")
    if k < 1:
        raise CandGenError(f"k must be >= 1, got {k}")
    sums: dict[str, float] = {}
    for source in lists:
        for entity, p in source:
            sums[entity] = sums.get(entity, 0.0) + p
    n = len(lists)
    fused = [(entity, total / n) for entity, total in sums.items()]
    fused.sort(key=lambda item: (-item[1], item[0]))
    return fused[:k]


def write_dictionary_tsv(mention_map: MentionEntityMap, path: str | Path) -> None:
    """Persist as sorted "surface\\tentity\\tcount" lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for surface in sorted(mention_map.table):
            for entity, count in sorted(mention_map.table[surface]):
                fh.write(f"{surface}\t{entity}\t{count}\n")


def read_dictionary_tsv(path: str | Path) -> MentionEntityMap:
    table: dict[str, list[tuple[str, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise CandGenError(f"{path}:{lineno}: expected 3 tab-separated fields")
            surface, entity, count = parts
            count = int(count)
            if count <= 0:
                raise CandGenError(f"{path}:{lineno}: count must be positive")
            table.setdefault(surface, []).append((normalize_entity(entity), count))
    for entries in table.values():
        entries.sort()
    return MentionEntityMap(table=table)


@dataclass(frozen=True)
class ExternalScores:
    """Candidate scores from an external generator, keyed by mention.

    If `probabilistic` is false the raw scores must pass through
    `calibrate` before fusion.
    """

    scores: dict[tuple[str, str], list[tuple[str, float]]]
    probabilistic: bool

    def get(self, doc_id: str, mention_id: str) -> list[tuple[str, float]]:
        return self.scores.get((doc_id, mention_id), [])


def read_external_scores(path: str | Path) -> ExternalScores:
    """Read external scores JSONL: {"doc_id", "mention_id", "candidates", "probabilistic"}."""
    scores: dict[tuple[str, str], list[tuple[str, float]]] = {}
    probabilistic: bool | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                key = (obj["doc_id"], obj["mention_id"])
                cands = [
                    (normalize_entity(c["entity"]), float(c["score"]))
                    for c in obj["candidates"]
                ]
                flag = bool(obj["probabilistic"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CandGenError(f"{path}:{lineno}: {exc}") from exc
            if probabilistic is None:
                probabilistic = flag
            elif probabilistic != flag:
                raise CandGenError(f"{path}:{lineno}: inconsistent probabilistic flag")
            scores[key] = cands
    return ExternalScores(scores=scores, probabilistic=bool(probabilistic))


def generate_candidates(
    doc_id: str,
    mention_id: str,
    surface: str,
    mention_map: MentionEntityMap | None,
    externals: Sequence[ExternalScores] = (),
    k: int = DEFAULT_TOP_K,
    gamma: float = DEFAULT_GAMMA,
) -> list[tuple[str, float]]:
    """Assemble one mention's fused candidate list from all configured sources.

    Dictionary priors are already probabilities and are never re-calibrated;
    non-probabilistic external scores are calibrated per mention first.
    """
    sources: list[list[tuple[str, float]]] = []
    if mention_map is not None:
        sources.append(lookup(mention_map, surface, k))
    for ext in externals:
        raw = sorted(ext.get(doc_id, mention_id), key=lambda item: (-item[1], item[0]))[:k]
        if not raw:
            sources.append([])
        elif ext.probabilistic:
            sources.append(list(raw))
        else:
            sources.append(calibrate(raw, gamma))
    if not sources:
        raise CandGenError("no candidate sources configured")
    return combine(sources, k)
