"""Linear baseline disambiguator with greedy mention evidence.

Scores one candidate as s = s_l + s_g where s_l = w_local . unary
features, pair scores s_e = w_pair . binary features, mention evidence
s_m(k, e) = max over mention k's candidates of s_e, and the global score
averages the evidence of the other mentions with a 1/M normalizer over
all document mentions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xelink import kernels
from xelink.features import FeatureTensors, feature_dims


class ModelError(ValueError):
    """Parameter/feature dimension mismatch."""


@dataclass
class LinearParams:
    w_local: np.ndarray
    w_pair: np.ndarray

    def __post_init__(self):
        self.w_local = np.asarray(self.w_local, dtype=np.float64)
        self.w_pair = np.asarray(self.w_pair, dtype=np.float64)
        if self.w_local.ndim != 1 or self.w_pair.ndim != 1:
            raise ModelError("linear weights must be vectors")
        if not (np.isfinite(self.w_local).all() and np.isfinite(self.w_pair).all()):
            raise ModelError("linear weights must be finite")

    @classmethod
    def for_feature_set(cls, feature_set: str, fill: float = 1.0) -> "LinearParams":
        d_l, d_g = feature_dims(feature_set)
        return cls(w_local=np.full(d_l, fill), w_pair=np.full(d_g, fill))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w_local": self.w_local, "w_pair": self.w_pair}


def local_score(phi: np.ndarray, w_local: np.ndarray) -> float:
    """Dot product of a unary feature vector with the local weights."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != w_local.shape:
        raise ModelError(f"local dimension mismatch: {phi.shape} vs {w_local.shape}")
    return float(phi @ w_local)


def pair_score(psi: np.ndarray, w_pair: np.ndarray) -> float:
    """Dot product of a binary feature vector with the pair weights."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != w_pair.shape:
        raise ModelError(f"pair dimension mismatch: {psi.shape} vs {w_pair.shape}")
    return float(psi @ w_pair)


@dataclass
class GreedyResult:
    """Final scores (padded slots zero) and per-mention predictions."""

    scores: np.ndarray  # (M, K)
    argmax_w: np.ndarray  # (M, K, M) evidence argmax, kept for training
    predictions: list[str | None]


def _check_dims(tensors: FeatureTensors, params: LinearParams) -> None:
    d_l, d_g = feature_dims(tensors.feature_set)
    if params.w_local.shape != (d_l,) or params.w_pair.shape != (d_g,):
        raise ModelError(
            f"params sized for ({params.w_local.shape[0]}, {params.w_pair.shape[0]}) "
            f"features but tensors use {tensors.feature_set} ({d_l}, {d_g})"
        )


def score_tensors(
    tensors: FeatureTensors, params: LinearParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear local and pair score tensors: s_l (M, K) and s_e (M, K, M, K)."""
    _check_dims(tensors, params)
    m, k, d_l = tensors.unary.shape
    s_l = (tensors.unary.reshape(m * k, d_l) @ params.w_local).reshape(m, k)
    d_g = tensors.binary.shape[-1]
    s_e = (tensors.binary.reshape(-1, d_g) @ params.w_pair).reshape(m, k, m, k)
    return s_l, s_e, tensors.n_candidates


def greedy_link(tensors: FeatureTensors, params: LinearParams) -> GreedyResult:
    """Score every candidate and pick the per-mention argmax.

    Ties go to the earlier candidate-list position; mentions with no
    candidates predict None.
    """
    s_l, s_e, n_cands = score_tensors(tensors, params)
    scores, argmax_w = kernels.greedy_forward(s_l, s_e, n_cands)
    return GreedyResult(
        scores=scores,
        argmax_w=argmax_w,
        predictions=tensors.predictions(scores),
    )
