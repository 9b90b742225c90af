"""End-to-end training for both disambiguators.

One loop serves both model kinds: per-document gradients are summed in
document order (full batch by default, seeded mini-batch shuffling on
request) and applied with Adam. The linear greedy model trains with the
same softmax-over-scores negative log-likelihood as the belief network;
its gradient flows through the evidence argmax. Dropout (belief network
only) masks hidden activations of both scorers with inverted scaling and
draws from the run's seeded generator, so identical seed and corpus give
bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xelink import kernels
from xelink.burn import BurnGrads, BurnParams, InferenceConfig, document_loss
from xelink.features import FeatureTensors
from xelink.greedy import LinearParams, score_tensors
from xelink.optim import Adam


class TrainingError(ValueError):
    """Unusable training corpus or configuration."""


@dataclass
class TrainConfig:
    epochs: int = 1
    lr: float = 1e-3
    dropout: float = 0.5
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainingError("epochs must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise TrainingError("dropout must lie in [0, 1)")


@dataclass
class EpochLog:
    epoch: int
    loss: float
    accuracy: float  # over gold-labeled mentions, from the epoch's forward passes


def greedy_document_loss(
    tensors: FeatureTensors, params: LinearParams, want_grad: bool = False
) -> tuple[float, int, dict[str, np.ndarray] | None, np.ndarray]:
    """Softmax NLL of gold entities under greedy scores, with gradient."""
    s_l, s_e, n_cands = score_tensors(tensors, params)
    scores, argmax_w = kernels.greedy_forward(s_l, s_e, n_cands)
    probs = kernels.masked_softmax(scores, n_cands)
    m, k = scores.shape
    loss = 0.0
    counted = 0
    ds = np.zeros((m, k))
    for i in range(m):
        g = int(tensors.gold_index[i])
        if g < 0:
            continue
        counted += 1
        loss -= float(np.log(probs[i, g]))
        ds[i] += probs[i]
        ds[i, g] -= 1.0
    if not want_grad:
        return loss, counted, None, scores
    ds_e = kernels.greedy_backward(ds, argmax_w, n_cands)
    d_l = tensors.unary.shape[-1]
    d_g = tensors.binary.shape[-1]
    grads = {
        "w_local": tensors.unary.reshape(-1, d_l).T @ ds.reshape(-1),
        "w_pair": tensors.binary.reshape(-1, d_g).T @ ds_e.reshape(-1),
    }
    return loss, counted, grads, scores


def _count_trainable(docs: list[FeatureTensors]) -> int:
    return int(sum((tensors.gold_index >= 0).sum() for tensors in docs))


def _doc_hits(tensors: FeatureTensors, scores: np.ndarray) -> tuple[int, int]:
    """(correct, labeled) prediction counts for one document's score table."""
    correct = 0
    total = 0
    preds = tensors.predictions(scores)
    for gold, pred in zip(tensors.gold_entities, preds):
        if gold is None:
            continue
        total += 1
        if pred == gold:
            correct += 1
    return correct, total


def _batches(n_docs: int, batch_size: int | None, rng: np.random.Generator):
    if batch_size is None or batch_size >= n_docs:
        yield list(range(n_docs))
        return
    order = rng.permutation(n_docs)
    for start in range(0, n_docs, batch_size):
        yield [int(i) for i in order[start : start + batch_size]]


def train_burn(
    docs: list[FeatureTensors],
    params: BurnParams,
    infer_cfg: InferenceConfig | None = None,
    cfg: TrainConfig | None = None,
) -> tuple[BurnParams, list[EpochLog]]:
    """Adam over the summed per-document gradients of the belief network."""
    infer_cfg = infer_cfg or InferenceConfig()
    cfg = cfg or TrainConfig()
    if _count_trainable(docs) == 0:
        raise TrainingError(
            "nothing to train on: no mention has its gold entity in candidates"
        )
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(params.arrays(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    keep = 1.0 - cfg.dropout
    h = params.hidden
    log: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        correct = 0
        labeled = 0
        for batch in _batches(len(docs), cfg.batch_size, rng):
            total = BurnGrads.zeros_like(params)
            for idx in batch:
                tensors = docs[idx]
                m, k, _ = tensors.unary.shape
                if cfg.dropout > 0.0:
                    drop_l = (rng.random((m * k, h)) < keep) / keep
                    drop_g = (rng.random((m * k * m * k, h)) < keep) / keep
                else:
                    drop_l = drop_g = None
                doc_loss, _, doc_grads, final = document_loss(
                    tensors, params, infer_cfg, drop_l, drop_g, want_grad=True
                )
                epoch_loss += doc_loss
                total.add_(doc_grads)
                c, n = _doc_hits(tensors, final)
                correct += c
                labeled += n
            opt.step(total.arrays())
        log.append(
            EpochLog(epoch=epoch, loss=epoch_loss, accuracy=correct / labeled if labeled else 0.0)
        )
    return params, log


def train_linear(
    docs: list[FeatureTensors],
    params: LinearParams,
    cfg: TrainConfig | None = None,
) -> tuple[LinearParams, list[EpochLog]]:
    """Same trainer for the linear greedy baseline (no dropout: no hidden units)."""
    cfg = cfg or TrainConfig()
    if _count_trainable(docs) == 0:
        raise TrainingError(
            "nothing to train on: no mention has its gold entity in candidates"
        )
    rng = np.random.default_rng(cfg.seed)
    arrays = params.arrays()
    opt = Adam(arrays, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    log: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        correct = 0
        labeled = 0
        for batch in _batches(len(docs), cfg.batch_size, rng):
            total = {name: np.zeros_like(arr) for name, arr in arrays.items()}
            for idx in batch:
                doc_loss, _, doc_grads, scores = greedy_document_loss(
                    docs[idx], params, want_grad=True
                )
                epoch_loss += doc_loss
                for name in total:
                    total[name] += doc_grads[name]
                c, n = _doc_hits(docs[idx], scores)
                correct += c
                labeled += n
            opt.step(total)
        log.append(
            EpochLog(epoch=epoch, loss=epoch_loss, accuracy=correct / labeled if labeled else 0.0)
        )
    return params, log
