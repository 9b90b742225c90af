"""Iterative belief-update disambiguator with end-to-end gradients.

Local and pair scores come from two-layer scorers with a linear residual:
score(x) = w2 . leaky_relu(w1' x) + w3 . x. Mention evidence weights each
pair score by the context mention's current candidate probability, a
distance-binned gating table scales each context mention's evidence, and
beliefs are re-normalized with a per-mention softmax every iteration.
Training backpropagates through the whole unrolled recurrence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from xelink import kernels
from xelink.features import FeatureTensors, feature_dims
from xelink.greedy import ModelError

DISTANCE_CLAMP = 50
DISTANCE_BIN_SIZE = 4
N_DISTANCE_BINS = DISTANCE_CLAMP // DISTANCE_BIN_SIZE + 1  # 13
DEFAULT_HIDDEN = 128
DEFAULT_LEAKY_SLOPE = 0.01
DEFAULT_GATING_INIT = 1.0 / 30.0


@dataclass
class GatingTable:
    """One learned scalar per token-distance bin.

    Distances clamp at 50 tokens and bin with width 4, so 13 bins cover
    everything.
    """

    values: np.ndarray = field(
        default_factory=lambda: np.full(N_DISTANCE_BINS, DEFAULT_GATING_INIT)
    )
    clamp: int = DISTANCE_CLAMP
    bin_size: int = DISTANCE_BIN_SIZE

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = self.clamp // self.bin_size + 1
        if self.values.shape != (expected,):
            raise ModelError(
                f"gating table needs {expected} bins, got shape {self.values.shape}"
            )
        if not np.isfinite(self.values).all():
            raise ModelError("gating values must be finite")

    def bin_index(self, distance_tokens: int) -> int:
        if distance_tokens < 0:
            raise ModelError(f"distance must be >= 0, got {distance_tokens}")
        return min(distance_tokens, self.clamp) // self.bin_size

    def gate(self, distance_tokens: int) -> float:
        return float(self.values[self.bin_index(distance_tokens)])


@dataclass
class BurnParams:
    """Weights of both two-layer scorers plus the gating table."""

    w_l1: np.ndarray  # (d_l, h)
    w_l2: np.ndarray  # (h,)
    w_l3: np.ndarray  # (d_l,)
    w_g1: np.ndarray  # (d_g, h)
    w_g2: np.ndarray  # (h,)
    w_g3: np.ndarray  # (d_g,)
    gating: GatingTable = field(default_factory=GatingTable)
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        for name in ("w_l1", "w_l2", "w_l3", "w_g1", "w_g2", "w_g3"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, arr)
            if not np.isfinite(arr).all():
                raise ModelError(f"{name} contains non-finite entries")
        if self.w_l1.shape != (self.w_l3.shape[0], self.w_l2.shape[0]):
            raise ModelError("local scorer shapes are inconsistent")
        if self.w_g1.shape != (self.w_g3.shape[0], self.w_g2.shape[0]):
            raise ModelError("pair scorer shapes are inconsistent")
        if self.w_l2.shape != self.w_g2.shape:
            raise ModelError("both scorers must share the hidden size")

    @property
    def d_l(self) -> int:
        return self.w_l1.shape[0]

    @property
    def d_g(self) -> int:
        return self.w_g1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_l1.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "w_l1": self.w_l1,
            "w_l2": self.w_l2,
            "w_l3": self.w_l3,
            "w_g1": self.w_g1,
            "w_g2": self.w_g2,
            "w_g3": self.w_g3,
            "gating": self.gating.values,
        }


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_burn_params(
    feature_set: str,
    hidden: int = DEFAULT_HIDDEN,
    seed: int = 0,
    leaky_slope: float = DEFAULT_LEAKY_SLOPE,
    rng: np.random.Generator | None = None,
) -> BurnParams:
    """Seeded uniform-fan initialization; gating starts at 1/30 so the
    initial aggregation approximates averaging a 30-mention context."""
    d_l, d_g = feature_dims(feature_set)
    if rng is None:
        rng = np.random.default_rng(seed)
    return BurnParams(
        w_l1=_glorot(rng, d_l, hidden, (d_l, hidden)),
        w_l2=_glorot(rng, hidden, 1, (hidden,)),
        w_l3=_glorot(rng, d_l, 1, (d_l,)),
        w_g1=_glorot(rng, d_g, hidden, (d_g, hidden)),
        w_g2=_glorot(rng, hidden, 1, (hidden,)),
        w_g3=_glorot(rng, d_g, 1, (d_g,)),
        gating=GatingTable(),
        leaky_slope=leaky_slope,
    )


@dataclass
class InferenceConfig:
    max_iterations: int = 20
    convergence_tol: float = 1e-6
    context_window: int = 30

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ModelError("max_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ModelError("convergence_tol must be positive")
        if self.context_window < 1:
            raise ModelError("context_window must be >= 1")


@dataclass
class BeliefState:
    """Per-mention candidate probabilities after iterative updates.

    A mention without candidates carries the placeholder vector [1.0] and
    a None prediction.
    """

    probabilities: list[np.ndarray]
    iterations: int
    converged: bool
    predictions: list[str | None]


def mlp_score(
    x: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
    w3: np.ndarray,
    slope: float = DEFAULT_LEAKY_SLOPE,
) -> float:
    """Two-layer score with residual for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (w1.shape[0],) or w2.shape != (w1.shape[1],) or w3.shape != x.shape:
        raise ModelError(
            f"mlp shape mismatch: x {x.shape}, w1 {w1.shape}, w2 {w2.shape}, w3 {w3.shape}"
        )
    drop = np.ones((1, w1.shape[1]))
    return float(kernels.mlp_forward(x[None, :], w1, w2, w3, slope, drop)[0])


def gate(distance_tokens: int, table: GatingTable) -> float:
    """Gating value for a token distance (clamped and binned)."""
    return table.gate(distance_tokens)


def context_gates(
    tensors: FeatureTensors, gating: GatingTable, context_window: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair gate weights (M, M) and distance-bin indices (M, M).

    Row i holds gating values for the up-to-`context_window` nearest other
    mentions (ties to the earlier mention); every other entry is zero with
    bin index -1.
    """
    m = tensors.n_mentions
    gate_w = np.zeros((m, m), dtype=np.float64)
    bins = np.full((m, m), -1, dtype=np.int64)
    for i in range(m):
        others = sorted(
            (k for k in range(m) if k != i),
            key=lambda k: (tensors.distances[i, k], k),
        )
        for k in others[:context_window]:
            b = gating.bin_index(int(tensors.distances[i, k]))
            bins[i, k] = b
            gate_w[i, k] = gating.values[b]
    return gate_w, bins


def _score_tensors(
    tensors: FeatureTensors,
    params: BurnParams,
    drop_l: np.ndarray | None = None,
    drop_g: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """MLP local scores (M, K) and pair scores (M, K, M, K)."""
    d_l, d_g = feature_dims(tensors.feature_set)
    if params.d_l != d_l or params.d_g != d_g:
        raise ModelError(
            f"params sized for ({params.d_l}, {params.d_g}) features but tensors "
            f"use {tensors.feature_set} ({d_l}, {d_g})"
        )
    m, k, _ = tensors.unary.shape
    h = params.hidden
    phi = np.ascontiguousarray(tensors.unary.reshape(m * k, d_l))
    psi = np.ascontiguousarray(tensors.binary.reshape(m * k * m * k, d_g))
    if drop_l is None:
        drop_l = np.ones((phi.shape[0], h))
    if drop_g is None:
        drop_g = np.ones((psi.shape[0], h))
    s_l = kernels.mlp_forward(
        phi, params.w_l1, params.w_l2, params.w_l3, params.leaky_slope, drop_l
    ).reshape(m, k)
    s_e = kernels.mlp_forward(
        psi, params.w_g1, params.w_g2, params.w_g3, params.leaky_slope, drop_g
    ).reshape(m, k, m, k)
    return s_l, s_e, phi, psi


def infer(
    tensors: FeatureTensors, params: BurnParams, cfg: InferenceConfig | None = None
) -> BeliefState:
    """Run belief updates until convergence or the iteration cap."""
    cfg = cfg or InferenceConfig()
    s_l, s_e, _, _ = _score_tensors(tensors, params)
    gate_w, _ = context_gates(tensors, params.gating, cfg.context_window)
    beliefs, n_iter, converged = kernels.burn_iterate(
        s_l,
        s_e,
        tensors.n_candidates,
        gate_w,
        cfg.max_iterations,
        cfg.convergence_tol,
        False,
    )
    final = beliefs[n_iter]
    probs = []
    for i in range(tensors.n_mentions):
        n = int(tensors.n_candidates[i])
        probs.append(final[i, :n].copy() if n > 0 else np.array([1.0]))
    return BeliefState(
        probabilities=probs,
        iterations=n_iter,
        converged=converged,
        predictions=tensors.predictions(final),
    )


@dataclass
class BurnGrads:
    """Gradient structure mirroring BurnParams."""

    w_l1: np.ndarray
    w_l2: np.ndarray
    w_l3: np.ndarray
    w_g1: np.ndarray
    w_g2: np.ndarray
    w_g3: np.ndarray
    gating: np.ndarray

    @classmethod
    def zeros_like(cls, params: BurnParams) -> "BurnGrads":
        return cls(
            **{name: np.zeros_like(arr) for name, arr in params.arrays().items()}
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "w_l1": self.w_l1,
            "w_l2": self.w_l2,
            "w_l3": self.w_l3,
            "w_g1": self.w_g1,
            "w_g2": self.w_g2,
            "w_g3": self.w_g3,
            "gating": self.gating,
        }

    def add_(self, other: "BurnGrads") -> None:
        for name, arr in self.arrays().items():
            arr += other.arrays()[name]


def document_loss(
    tensors: FeatureTensors,
    params: BurnParams,
    cfg: InferenceConfig,
    drop_l: np.ndarray | None = None,
    drop_g: np.ndarray | None = None,
    want_grad: bool = False,
) -> tuple[float, int, BurnGrads | None, np.ndarray]:
    """Loss (and optional gradient) for one document over exactly T iterations.

    Returns (loss, number of counted mentions, grads or None, final
    beliefs). Mentions whose gold entity is absent from the candidate list
    are excluded from the loss.
    """
    s_l, s_e, phi, psi = _score_tensors(tensors, params, drop_l, drop_g)
    gate_w, bins = context_gates(tensors, params.gating, cfg.context_window)
    beliefs, n_iter, _ = kernels.burn_iterate(
        s_l,
        s_e,
        tensors.n_candidates,
        gate_w,
        cfg.max_iterations,
        cfg.convergence_tol,
        True,
    )
    final = beliefs[n_iter]
    loss = 0.0
    counted = 0
    m, k = s_l.shape
    d_final = np.zeros((m, k))
    for i in range(m):
        g = int(tensors.gold_index[i])
        if g < 0:
            continue
        counted += 1
        loss -= float(np.log(final[i, g]))
        d_final[i] += final[i]
        d_final[i, g] -= 1.0
    if not want_grad:
        return loss, counted, None, final
    ds_l, ds_e, d_gate = kernels.burn_belief_backward(
        s_e, gate_w, beliefs, n_iter, d_final
    )
    h = params.hidden
    if drop_l is None:
        drop_l = np.ones((phi.shape[0], h))
    if drop_g is None:
        drop_g = np.ones((psi.shape[0], h))
    dw_l1, dw_l2, dw_l3 = kernels.mlp_backward(
        phi, params.w_l1, params.w_l2, params.w_l3, params.leaky_slope, drop_l,
        np.ascontiguousarray(ds_l.reshape(-1)),
    )
    dw_g1, dw_g2, dw_g3 = kernels.mlp_backward(
        psi, params.w_g1, params.w_g2, params.w_g3, params.leaky_slope, drop_g,
        np.ascontiguousarray(ds_e.reshape(-1)),
    )
    d_gating = np.zeros_like(params.gating.values)
    valid = bins >= 0
    np.add.at(d_gating, bins[valid], d_gate[valid])
    grads = BurnGrads(
        w_l1=dw_l1, w_l2=dw_l2, w_l3=dw_l3,
        w_g1=dw_g1, w_g2=dw_g2, w_g3=dw_g3,
        gating=d_gating,
    )
    return loss, counted, grads, final


def loss(
    docs: list[FeatureTensors], params: BurnParams, cfg: InferenceConfig | None = None
) -> tuple[float, int, int]:
    """Corpus negative log-likelihood of gold entities under final beliefs.

    Returns (loss, counted mentions, skipped gold mentions whose entity is
    missing from the candidate list).
    """
    cfg = cfg or InferenceConfig()
    total = 0.0
    counted = 0
    skipped = 0
    for tensors in docs:
        doc_loss, doc_counted, _, _ = document_loss(tensors, params, cfg)
        total += doc_loss
        counted += doc_counted
        skipped += sum(
            1
            for i, gold in enumerate(tensors.gold_entities)
            if gold is not None and tensors.gold_index[i] < 0
        )
    return total, counted, skipped


def grad(
    docs: list[FeatureTensors], params: BurnParams, cfg: InferenceConfig | None = None
) -> tuple[BurnGrads, float]:
    """Analytic gradient of the corpus loss through all unrolled iterations."""
    cfg = cfg or InferenceConfig()
    total = BurnGrads.zeros_like(params)
    total_loss = 0.0
    for tensors in docs:
        doc_loss, _, doc_grads, _ = document_loss(tensors, params, cfg, want_grad=True)
        total_loss += doc_loss
        total.add_(doc_grads)
    return total, total_loss
