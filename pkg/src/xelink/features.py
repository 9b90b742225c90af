"""Unary and binary disambiguation features over KB statistics.

Feature layout (fixed order; BASE is the one-feature prefix of FEAT):

  unary   0  log mention-entity prior          ln(max(p(e|m), eps))
          1  log entity prior                  ln(max(c(e)/total, eps))
          2  related mention number            #{m_k : some candidate of m_k co-occurs with e}
          3  exact match number                #{m_k : e in candidates(m_k)}
  binary  0  log co-occurrence probability     ln(max(c(a,b)/c(a), eps))   (denominator = first arg)
          1  smoothed PPMI                     max(log2(p(a,b)/(p'(a) p'(b))), 0)
          2  entity embedding cosine           0 if either vector missing
          3  log hyperlink fraction            ln(max(mult(b in H_a)/|H_a|, eps))

All logs are clamped by eps so every feature value is finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from xelink.corpus import Document
from xelink.kbstats import KbStatistics

FEATURE_DIMS = {"BASE": (1, 1), "FEAT": (4, 4)}


class FeatureError(ValueError):
    """Invalid feature-extraction input."""


def feature_dims(feature_set: str) -> tuple[int, int]:
    try:
        return FEATURE_DIMS[feature_set]
    except KeyError:
        raise FeatureError(
            f"unknown feature set {feature_set!r}; expected one of {sorted(FEATURE_DIMS)}"
        ) from None


@dataclass
class EmbeddingStore:
    """Entity id -> dense vector, all of one dimension."""

    dim: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        if self.dim < 1:
            raise FeatureError("embedding dimension must be >= 1")
        for entity, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise FeatureError(
                    f"embedding for {entity!r} has shape {vec.shape}, expected ({self.dim},)"
                )

    @classmethod
    def empty(cls, dim: int = 300) -> "EmbeddingStore":
        return cls(dim=dim, vectors={})

    @classmethod
    def read_text(cls, path: str | Path) -> "EmbeddingStore":
        """Read "N dim" header then "entity<TAB>f1 f2 ... f_dim" lines."""
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise FeatureError(f"{path}: header must be 'N dim'")
            n, dim = int(header[0]), int(header[1])
            vectors: dict[str, np.ndarray] = {}
            for line in fh:
                if not line.strip():
                    continue
                entity, _, rest = line.rstrip("\n").partition("\t")
                vec = np.array(rest.split(), dtype=np.float64)
                if vec.shape != (dim,):
                    raise FeatureError(f"{path}: bad vector length for {entity!r}")
                vectors[entity] = vec
        if len(vectors) != n:
            raise FeatureError(f"{path}: header claims {n} rows, found {len(vectors)}")
        return cls(dim=dim, vectors=vectors)

    def write_text(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vectors)} {self.dim}\n")
            for entity in sorted(self.vectors):
                values = " ".join(repr(float(v)) for v in self.vectors[entity])
                fh.write(f"{entity}\t{values}\n")

    def cosine(self, a: str, b: str) -> float:
        """Cosine similarity; 0.0 when either vector is missing or zero."""
        va = self.vectors.get(a)
        vb = self.vectors.get(b)
        if va is None or vb is None:
            return 0.0
        na = float(np.linalg.norm(va))
        nb = float(np.linalg.norm(vb))
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(np.dot(va, vb) / (na * nb))


def _clamped_log(ratio: float, eps: float) -> float:
    return math.log(max(ratio, eps))


def unary_features(
    doc: Document,
    mention_index: int,
    candidate: str,
    prior: float,
    stats: KbStatistics,
    feature_set: str = "FEAT",
) -> np.ndarray:
    """Unary feature vector for one candidate of a mention."""
    d_l, _ = feature_dims(feature_set)
    eps = stats.epsilon
    out = np.empty(d_l, dtype=np.float64)
    out[0] = _clamped_log(prior, eps)
    if d_l == 1:
        return out
    total = stats.total_anchor_count
    entity_ratio = stats.count(candidate) / total if total > 0 else 0.0
    out[1] = _clamped_log(entity_ratio, eps)
    related = 0
    exact = 0
    for k, other in enumerate(doc.mentions):
        if k == mention_index:
            continue
        entities = other.candidate_entities()
        if candidate in entities:
            exact += 1
        if any(stats.pair(candidate, e) > 0 for e in entities):
            related += 1
    out[2] = float(related)
    out[3] = float(exact)
    return out


def binary_features(
    e_a: str,
    e_b: str,
    stats: KbStatistics,
    embeddings: EmbeddingStore | None = None,
    feature_set: str = "FEAT",
) -> np.ndarray:
    """Binary feature vector for an ordered entity pair (first = scored entity)."""
    _, d_g = feature_dims(feature_set)
    eps = stats.epsilon
    out = np.empty(d_g, dtype=np.float64)
    c_a = stats.count(e_a)
    cooc = stats.pair(e_a, e_b)
    out[0] = _clamped_log(cooc / c_a if c_a > 0 else 0.0, eps)
    if d_g == 1:
        return out
    out[1] = _ppmi(e_a, e_b, stats)
    out[2] = embeddings.cosine(e_a, e_b) if embeddings is not None else 0.0
    h_total = stats.outlink_total(e_a)
    mult = stats.outlink_multiplicity(e_a, e_b)
    out[3] = _clamped_log(mult / h_total if h_total > 0 else 0.0, eps)
    return out


def _ppmi(e_a: str, e_b: str, stats: KbStatistics) -> float:
    """Positive pointwise mutual information with smoothed unigram marginals."""
    pair = stats.pair(e_a, e_b)
    if pair == 0 or stats.total_pair_count == 0:
        return 0.0
    p_pair = pair / stats.total_pair_count
    pa = stats.smoothed_prob(e_a)
    pb = stats.smoothed_prob(e_b)
    if pa == 0.0 or pb == 0.0:
        return 0.0
    return max(math.log2(p_pair / (pa * pb)), 0.0)


@dataclass
class FeatureTensors:
    """Dense per-document feature pack consumed by the disambiguators.

    Candidate axis is padded to the document's widest list; slot j of
    mention i is valid iff j < n_candidates[i]. gold_index holds the
    candidate-list position of the gold entity, or -1 when the mention has
    no gold label or the gold entity is missing from the list.
    """

    doc_id: str
    feature_set: str
    unary: np.ndarray  # (M, K, d_l)
    binary: np.ndarray  # (M, K, M, K, d_g)
    n_candidates: np.ndarray  # (M,) int64
    gold_index: np.ndarray  # (M,) int64
    distances: np.ndarray  # (M, M) int64 token gaps
    candidate_entities: list[list[str]]
    gold_entities: list[str | None]

    @property
    def n_mentions(self) -> int:
        return int(self.unary.shape[0])

    def predictions(self, scores: np.ndarray) -> list[str | None]:
        """Argmax over valid candidates; earlier list position wins ties."""
        preds: list[str | None] = []
        for i in range(self.n_mentions):
            n = int(self.n_candidates[i])
            if n == 0:
                preds.append(None)
                continue
            j = int(np.argmax(scores[i, :n]))
            preds.append(self.candidate_entities[i][j])
        return preds


def token_distance(start_a: int, end_a: int, start_b: int, end_b: int) -> int:
    """Number of tokens strictly between two spans; 0 when they touch or overlap."""
    return max(0, max(start_a, start_b) - min(end_a, end_b))


def featurize(
    doc: Document,
    stats: KbStatistics,
    embeddings: EmbeddingStore | None = None,
    feature_set: str = "FEAT",
) -> FeatureTensors:
    """Extract the full unary/binary tensor pack for one document.

    Mention-entity priors are taken from the candidate list probabilities
    as produced by candidate generation (fused scores are used as-is).
    """
    d_l, d_g = feature_dims(feature_set)
    mentions = doc.mentions
    m = len(mentions)
    k_max = max((len(mn.candidates) for mn in mentions), default=0)
    k_max = max(k_max, 1)
    unary = np.zeros((m, k_max, d_l), dtype=np.float64)
    binary = np.zeros((m, k_max, m, k_max, d_g), dtype=np.float64)
    n_cands = np.zeros(m, dtype=np.int64)
    gold_idx = np.full(m, -1, dtype=np.int64)
    cand_entities: list[list[str]] = []
    gold_entities: list[str | None] = []

    for i, mention in enumerate(mentions):
        entities = [e for e, _ in mention.candidates]
        cand_entities.append(entities)
        gold_entities.append(mention.gold)
        n_cands[i] = len(entities)
        if mention.gold is not None and mention.gold in entities:
            gold_idx[i] = entities.index(mention.gold)
        for j, (entity, prior) in enumerate(mention.candidates):
            unary[i, j] = unary_features(doc, i, entity, prior, stats, feature_set)

    pair_cache: dict[tuple[str, str], np.ndarray] = {}
    for i, m_i in enumerate(mentions):
        for j, (e_i, _) in enumerate(m_i.candidates):
            for k, m_k in enumerate(mentions):
                if k == i:
                    continue
                for w, (e_k, _) in enumerate(m_k.candidates):
                    key = (e_i, e_k)
                    vec = pair_cache.get(key)
                    if vec is None:
                        vec = binary_features(e_i, e_k, stats, embeddings, feature_set)
                        pair_cache[key] = vec
                    binary[i, j, k, w] = vec

    distances = np.zeros((m, m), dtype=np.int64)
    for i in range(m):
        for k in range(i + 1, m):
            d = token_distance(
                mentions[i].start, mentions[i].end, mentions[k].start, mentions[k].end
            )
            distances[i, k] = d
            distances[k, i] = d

    return FeatureTensors(
        doc_id=doc.doc_id,
        feature_set=feature_set,
        unary=unary,
        binary=binary,
        n_candidates=n_cands,
        gold_index=gold_idx,
        distances=distances,
        candidate_entities=cand_entities,
        gold_entities=gold_entities,
    )
