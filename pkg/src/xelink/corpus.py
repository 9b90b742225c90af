"""Document and mention data model plus JSONL corpus I/O.

A corpus file holds one document per line:

    {"doc_id": str, "tokens": [str], "mentions": [{"id": str, "start": int,
     "end": int, "surface": str, "gold": str|null,
     "candidates": [{"entity": str, "p": float}]}]}

Predictions files hold one line per document:

    {"doc_id": str, "mentions": [{"id": str, "prediction": str|null}]}

Documents are immutable after load and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class CorpusError(ValueError):
    """Malformed corpus data or a violated document invariant."""


def normalize_entity(title: str) -> str:
    """Canonical entity title: whitespace runs collapsed, case preserved."""
    norm = " ".join(title.split())
    if not norm:
        raise CorpusError(f"entity title empty after normalization: {title!r}")
    return norm


@dataclass(frozen=True)
class Mention:
    """A mention span with optional gold label and scored candidate list.

    Token indices are half-open: the span covers tokens[start:end].
    Candidate entities are unique; probabilities lie in [0, 1].
    """

    mention_id: str
    start: int
    end: int
    surface: str
    gold: str | None = None
    candidates: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if not self.mention_id:
            raise CorpusError("mention id must be non-empty")
        if not (0 <= self.start < self.end):
            raise CorpusError(
                f"mention {self.mention_id!r}: invalid span [{self.start}, {self.end})"
            )
        norm_gold = normalize_entity(self.gold) if self.gold is not None else None
        object.__setattr__(self, "gold", norm_gold)
        cands = []
        seen: set[str] = set()
        for entity, p in self.candidates:
            entity = normalize_entity(entity)
            if entity in seen:
                raise CorpusError(
                    f"mention {self.mention_id!r}: duplicate candidate {entity!r}"
                )
            seen.add(entity)
            p = float(p)
            if not 0.0 <= p <= 1.0:
                raise CorpusError(
                    f"mention {self.mention_id!r}: candidate probability {p} outside [0, 1]"
                )
            cands.append((entity, p))
        object.__setattr__(self, "candidates", tuple(cands))

    def candidate_entities(self) -> tuple[str, ...]:
        return tuple(e for e, _ in self.candidates)


@dataclass(frozen=True)
class Document:
    """A tokenized document with its mentions sorted by span.

    Mentions may overlap; each span must fit inside the token list. The
    sort key (start, end, mention_id) makes ordering independent of the
    order mentions appeared in the input.
    """

    doc_id: str
    tokens: tuple[str, ...] = ()
    mentions: tuple[Mention, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        ids = set()
        for m in self.mentions:
            if m.mention_id in ids:
                raise CorpusError(
                    f"doc {self.doc_id!r}: duplicate mention id {m.mention_id!r}"
                )
            ids.add(m.mention_id)
            if m.end > len(self.tokens):
                raise CorpusError(
                    f"doc {self.doc_id!r} mention {m.mention_id!r}: span "
                    f"[{m.start}, {m.end}) exceeds {len(self.tokens)} tokens"
                )
        ordered = sorted(self.mentions, key=lambda m: (m.start, m.end, m.mention_id))
        object.__setattr__(self, "mentions", tuple(ordered))

    def mention_by_id(self, mention_id: str) -> Mention:
        for m in self.mentions:
            if m.mention_id == mention_id:
                return m
        raise KeyError(mention_id)


def _mention_from_json(obj: dict) -> Mention:
    cands = tuple(
        (c["entity"], float(c["p"])) for c in obj.get("candidates") or ()
    )
    return Mention(
        mention_id=obj["id"],
        start=int(obj["start"]),
        end=int(obj["end"]),
        surface=obj["surface"],
        gold=obj.get("gold"),
        candidates=cands,
    )


def _document_from_json(obj: dict) -> Document:
    mentions = tuple(_mention_from_json(m) for m in obj.get("mentions", ()))
    return Document(doc_id=obj["doc_id"], tokens=tuple(obj["tokens"]), mentions=mentions)


def read_corpus(path: str | Path) -> list[Document]:
    """Read a corpus JSONL file; documents come back in file order."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                docs.append(_document_from_json(obj))
            except (CorpusError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return docs


def _document_to_json(doc: Document) -> dict:
    mentions = []
    for m in doc.mentions:
        rec = {
            "id": m.mention_id,
            "start": m.start,
            "end": m.end,
            "surface": m.surface,
            "gold": m.gold,
        }
        if m.candidates:
            rec["candidates"] = [{"entity": e, "p": p} for e, p in m.candidates]
        mentions.append(rec)
    return {"doc_id": doc.doc_id, "tokens": list(doc.tokens), "mentions": mentions}


def write_corpus(docs: list[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(_document_to_json(doc), ensure_ascii=False) + "\n")


def write_linked(
    docs: list[Document],
    predictions: dict[tuple[str, str], str],
    path: str | Path,
) -> None:
    """Write predictions JSONL; mentions without a prediction get null.

    Keys are (doc_id, mention_id) pairs and every key must name a mention
    in `docs`.
    """
    known = {(d.doc_id, m.mention_id) for d in docs for m in d.mentions}
    unknown = set(predictions) - known
    if unknown:
        doc_id, mention_id = sorted(unknown)[0]
        raise CorpusError(
            f"prediction for unknown mention {mention_id!r} in doc {doc_id!r}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            rec = {
                "doc_id": doc.doc_id,
                "mentions": [
                    {
                        "id": m.mention_id,
                        "prediction": predictions.get((doc.doc_id, m.mention_id)),
                    }
                    for m in doc.mentions
                ],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_predictions(path: str | Path) -> dict[tuple[str, str], str]:
    """Read a predictions JSONL file; null predictions are omitted."""
    preds: dict[tuple[str, str], str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                for m in obj["mentions"]:
                    if m["prediction"] is not None:
                        preds[(obj["doc_id"], m["id"])] = normalize_entity(m["prediction"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return preds
