"""Linking metrics: gold candidate recall and in-KB accuracy.

Both metrics run over "evaluable" mentions only: those with a gold label
whose entity is inside the KB entity set (when one is supplied; without a
KB set every labeled mention counts). Gold candidate recall upper-bounds
accuracy whenever predictions come from the candidate lists, and the
report builder asserts exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from xelink.corpus import Document


class EvalError(ValueError):
    """No evaluable mention, or an inconsistent predictions map."""


def _evaluable(doc: Document, kb_entities: set[str] | None):
    for mention in doc.mentions:
        if mention.gold is None:
            continue
        if kb_entities is not None and mention.gold not in kb_entities:
            continue
        yield mention


def gold_candidate_recall(
    docs: list[Document], kb_entities: set[str] | None = None
) -> float:
    """Fraction of evaluable mentions whose candidate list holds the gold entity."""
    hit = 0
    total = 0
    for doc in docs:
        for mention in _evaluable(doc, kb_entities):
            total += 1
            if mention.gold in mention.candidate_entities():
                hit += 1
    if total == 0:
        raise EvalError("no evaluable mentions")
    return hit / total


def accuracy(
    docs: list[Document],
    predictions: dict[tuple[str, str], str],
    kb_entities: set[str] | None = None,
) -> float:
    """Fraction of evaluable mentions predicted correctly; null counts as wrong."""
    correct = 0
    total = 0
    for doc in docs:
        for mention in _evaluable(doc, kb_entities):
            total += 1
            if predictions.get((doc.doc_id, mention.mention_id)) == mention.gold:
                correct += 1
    if total == 0:
        raise EvalError("no evaluable mentions")
    return correct / total


@dataclass
class DocumentBreakdown:
    doc_id: str
    n_mentions: int
    n_evaluable: int
    n_gold_in_candidates: int
    n_correct: int


@dataclass
class EvalReport:
    n_mentions: int
    n_in_kb: int
    gold_recall: float
    accuracy: float
    per_document: list[DocumentBreakdown] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n_mentions": self.n_mentions,
            "n_in_kb": self.n_in_kb,
            "gold_recall": self.gold_recall,
            "accuracy": self.accuracy,
            "per_document": [
                {
                    "doc_id": d.doc_id,
                    "n_mentions": d.n_mentions,
                    "n_evaluable": d.n_evaluable,
                    "n_gold_in_candidates": d.n_gold_in_candidates,
                    "n_correct": d.n_correct,
                }
                for d in self.per_document
            ],
        }


def document_counts(
    doc: Document,
    predictions: dict[tuple[str, str], str],
    kb_entities: set[str] | None = None,
) -> DocumentBreakdown:
    """Exact integer counts for one document (the parallel reduction unit)."""
    n_eval = 0
    n_hit = 0
    n_correct = 0
    for mention in _evaluable(doc, kb_entities):
        n_eval += 1
        if mention.gold in mention.candidate_entities():
            n_hit += 1
        if predictions.get((doc.doc_id, mention.mention_id)) == mention.gold:
            n_correct += 1
    return DocumentBreakdown(
        doc_id=doc.doc_id,
        n_mentions=len(doc.mentions),
        n_evaluable=n_eval,
        n_gold_in_candidates=n_hit,
        n_correct=n_correct,
    )


def evaluate(
    docs: list[Document],
    predictions: dict[tuple[str, str], str],
    kb_entities: set[str] | None = None,
    per_doc_counts: list[DocumentBreakdown] | None = None,
) -> EvalReport:
    """Build the full report; asserts accuracy <= recall when predictions
    are drawn from the candidate lists."""
    if per_doc_counts is None:
        per_doc_counts = [document_counts(d, predictions, kb_entities) for d in docs]
    n_mentions = sum(c.n_mentions for c in per_doc_counts)
    n_eval = sum(c.n_evaluable for c in per_doc_counts)
    if n_eval == 0:
        raise EvalError("no evaluable mentions")
    n_hit = sum(c.n_gold_in_candidates for c in per_doc_counts)
    n_correct = sum(c.n_correct for c in per_doc_counts)
    from_candidates = all(
        predictions.get((doc.doc_id, m.mention_id)) in m.candidate_entities()
        for doc in docs
        for m in doc.mentions
        if predictions.get((doc.doc_id, m.mention_id)) is not None
    )
    if from_candidates:
        assert n_correct <= n_hit, "accuracy exceeded gold recall"
    return EvalReport(
        n_mentions=n_mentions,
        n_in_kb=n_eval,
        gold_recall=n_hit / n_eval,
        accuracy=n_correct / n_eval,
        per_document=per_doc_counts,
    )
