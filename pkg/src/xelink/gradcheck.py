"""Finite-difference verification of the analytic belief-network gradient.

Builds random small documents directly as feature packs, compares every
parameter coordinate of the analytic gradient against central differences
of the loss, and reports the worst relative error. Instances are resampled
when any hidden pre-activation sits near the leaky-ReLU kink, where finite
differences are meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xelink.burn import (
    BurnGrads,
    BurnParams,
    GatingTable,
    InferenceConfig,
    N_DISTANCE_BINS,
    grad,
    loss,
)
from xelink.features import FeatureTensors, feature_dims

REL_ERR_LIMIT = 1e-4
DEFAULT_STEP = 1e-5


@dataclass
class GradCheckResult:
    max_rel_err: float
    n_instances: int
    n_coordinates: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= REL_ERR_LIMIT


def random_instance(
    rng: np.random.Generator,
    max_mentions: int = 3,
    max_candidates: int = 3,
    feature_set: str = "FEAT",
) -> FeatureTensors:
    """A random dense feature pack shaped like a featurized document."""
    d_l, d_g = feature_dims(feature_set)
    m = int(rng.integers(1, max_mentions + 1))
    k = int(rng.integers(1, max_candidates + 1))
    n_cands = rng.integers(1, k + 1, size=m)
    unary = np.zeros((m, k, d_l))
    binary = np.zeros((m, k, m, k, d_g))
    for i in range(m):
        unary[i, : n_cands[i]] = rng.normal(size=(n_cands[i], d_l))
        for kk in range(m):
            if kk == i:
                continue
            binary[i, : n_cands[i], kk, : n_cands[kk]] = rng.normal(
                size=(n_cands[i], n_cands[kk], d_g)
            )
    gold = np.array([rng.integers(0, n) for n in n_cands], dtype=np.int64)
    positions = np.sort(rng.integers(0, 80, size=m))
    distances = np.abs(positions[:, None] - positions[None, :]).astype(np.int64)
    return FeatureTensors(
        doc_id="random",
        feature_set=feature_set,
        unary=unary,
        binary=binary,
        n_candidates=n_cands.astype(np.int64),
        gold_index=gold,
        distances=distances,
        candidate_entities=[[f"E{i}_{j}" for j in range(k)] for i in range(m)],
        gold_entities=[f"E{i}_{g}" for i, g in enumerate(gold)],
    )


def random_params(
    rng: np.random.Generator, feature_set: str = "FEAT", hidden: int = 4
) -> BurnParams:
    d_l, d_g = feature_dims(feature_set)
    return BurnParams(
        w_l1=rng.normal(scale=0.7, size=(d_l, hidden)),
        w_l2=rng.normal(scale=0.7, size=hidden),
        w_l3=rng.normal(scale=0.7, size=d_l),
        w_g1=rng.normal(scale=0.7, size=(d_g, hidden)),
        w_g2=rng.normal(scale=0.7, size=hidden),
        w_g3=rng.normal(scale=0.7, size=d_g),
        gating=GatingTable(values=rng.normal(scale=0.5, size=N_DISTANCE_BINS)),
    )


def _min_preactivation(tensors: FeatureTensors, params: BurnParams) -> float:
    """Smallest |z| over hidden pre-activations of non-zero feature rows.

    All-zero (padded) rows keep z = 0 under any weight perturbation, so
    they cannot straddle the kink and are ignored.
    """
    d_l, d_g = feature_dims(tensors.feature_set)
    mins = []
    for x, w1 in (
        (tensors.unary.reshape(-1, d_l), params.w_l1),
        (tensors.binary.reshape(-1, d_g), params.w_g1),
    ):
        live = np.abs(x).sum(axis=1) > 0
        if live.any():
            mins.append(float(np.abs(x[live] @ w1).min()))
    return min(mins) if mins else 1.0


def finite_difference_grad(
    tensors: FeatureTensors,
    params: BurnParams,
    cfg: InferenceConfig,
    step: float = DEFAULT_STEP,
) -> BurnGrads:
    """Central differences of the document loss over every coordinate."""
    out = BurnGrads.zeros_like(params)
    arrays = params.arrays()
    for name, arr in arrays.items():
        target = out.arrays()[name]
        flat = arr.reshape(-1)
        grad_flat = target.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            hi, _, _ = loss([tensors], params, cfg)
            flat[idx] = orig - step
            lo, _, _ = loss([tensors], params, cfg)
            flat[idx] = orig
            grad_flat[idx] = (hi - lo) / (2.0 * step)
    return out


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise |a-b| / max(|a|, |b|, floor)."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def run_gradcheck(
    seed: int = 0,
    n_instances: int = 50,
    step: float = DEFAULT_STEP,
    hidden: int = 4,
    feature_set: str = "FEAT",
    kink_margin: float = 1e-3,
) -> GradCheckResult:
    """Compare analytic and finite-difference gradients on random instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    n_coords = 0
    produced = 0
    while produced < n_instances:
        tensors = random_instance(rng)
        params = random_params(rng, feature_set=feature_set, hidden=hidden)
        if _min_preactivation(tensors, params) < kink_margin:
            continue
        produced += 1
        cfg = InferenceConfig(max_iterations=int(rng.integers(1, 4)))
        analytic, _ = grad([tensors], params, cfg)
        numeric = finite_difference_grad(tensors, params, cfg, step)
        for name, a in analytic.arrays().items():
            b = numeric.arrays()[name]
            worst = max(worst, relative_error(a, b))
            n_coords += a.size
    return GradCheckResult(
        max_rel_err=worst, n_instances=n_instances, n_coordinates=n_coords
    )
