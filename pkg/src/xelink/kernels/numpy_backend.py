"""Vectorized numpy implementation of the hot kernels.

Shared array conventions (M mentions, K padded candidate slots):

  s_l     (M, K)        local candidate scores
  s_e     (M, K, M, K)  pair scores s_e[i, j, k, w] between candidate j of
                        mention i and candidate w of mention k
  n_cands (M,) int64    slot j of mention i is valid iff j < n_cands[i]
  gate_w  (M, M)        gating weight per ordered mention pair; zero on the
                        diagonal and outside the context window
  drop    (N, h)        hidden keep mask, pre-scaled by 1/keep_rate
                        (all ones when dropout is off)
"""

import numpy as np


def _valid_mask(n_cands, k):
    return np.arange(k)[None, :] < n_cands[:, None]


def mlp_forward(x, w1, w2, w3, slope, drop):
    """Two-layer scorer with linear residual: w2' leaky(w1' x) * drop + w3' x."""
    z = x @ w1
    a = np.where(z > 0.0, z, slope * z) * drop
    return a @ w2 + x @ w3


def mlp_backward(x, w1, w2, w3, slope, drop, gout):
    """Gradients of sum(gout * mlp_forward(x)) w.r.t. w1, w2, w3."""
    z = x @ w1
    a = np.where(z > 0.0, z, slope * z) * drop
    dw2 = a.T @ gout
    dz = (gout[:, None] * w2[None, :]) * drop * np.where(z > 0.0, 1.0, slope)
    dw1 = x.T @ dz
    dw3 = x.T @ gout
    return dw1, dw2, dw3


def masked_softmax(s, n_cands):
    """Row softmax over valid slots; rows with no valid slot come back zero."""
    m, k = s.shape
    mask = _valid_mask(n_cands, k)
    neg = np.where(mask, s, -np.inf)
    peak = np.max(neg, axis=1, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(invalid="ignore"):
        e = np.where(mask, np.exp(neg - peak), 0.0)
    total = e.sum(axis=1, keepdims=True)
    total = np.where(total > 0.0, total, 1.0)
    return e / total


def burn_iterate(s_l, s_e, n_cands, gate_w, max_iter, tol, run_all):
    """Unrolled belief updates.

    p^0 = softmax(s_l); p^t = softmax(s_l + sum_k gate_w[i,k] *
    sum_w s_e[i,j,k,w] p^{t-1}[k,w]). Returns the belief history
    (max_iter+1, M, K), the number of update iterations performed, and
    whether the last update moved less than tol. With run_all set, exactly
    max_iter updates run (training mode); otherwise iteration stops at
    convergence.
    """
    m, k = s_l.shape
    beliefs = np.zeros((max_iter + 1, m, k), dtype=np.float64)
    beliefs[0] = masked_softmax(s_l, n_cands)
    n_iter = 0
    converged = False
    for t in range(1, max_iter + 1):
        evidence = np.einsum("ijkw,kw->ijk", s_e, beliefs[t - 1])
        s_g = np.einsum("ijk,ik->ij", evidence, gate_w)
        beliefs[t] = masked_softmax(s_l + s_g, n_cands)
        n_iter = t
        delta = float(np.max(np.abs(beliefs[t] - beliefs[t - 1]))) if s_l.size else 0.0
        converged = delta < tol
        if converged and not run_all:
            break
    return beliefs, n_iter, converged


def _softmax_vjp(dp, p):
    return p * (dp - np.sum(dp * p, axis=1, keepdims=True))


def burn_belief_backward(s_e, gate_w, beliefs, n_iter, d_final):
    """Backpropagate d_final = dL/ds^T through the unrolled recurrence.

    Returns gradients w.r.t. the local scores (M, K), the pair scores
    (M, K, M, K) and the gating weights (M, M); the caller pushes these
    through the MLPs and the gating table.
    """
    ds = d_final.copy()
    ds_l = np.zeros_like(d_final)
    ds_e = np.zeros_like(s_e)
    d_gate = np.zeros_like(gate_w)
    for t in range(n_iter, 0, -1):
        ds_l += ds
        p_prev = beliefs[t - 1]
        evidence = np.einsum("ijkw,kw->ijk", s_e, p_prev)
        d_gate += np.einsum("ij,ijk->ik", ds, evidence)
        d_evidence = ds[:, :, None] * gate_w[:, None, :]
        ds_e += d_evidence[:, :, :, None] * p_prev[None, None, :, :]
        dp_prev = np.einsum("ijk,ijkw->kw", d_evidence, s_e)
        ds_prev = _softmax_vjp(dp_prev, p_prev)
        if t == 1:
            ds_l += ds_prev
        else:
            ds = ds_prev
    return ds_l, ds_e, d_gate


def greedy_forward(s_l, s_e, n_cands):
    """Greedy mention evidence: s = s_l + (1/M) sum_{k != i} max_w s_e[i,j,k,w].

    Mentions without candidates contribute no evidence but still count in
    the 1/M normalizer. Also returns the argmax slot per (i, j, k) for the
    backward pass.
    """
    m, k = s_l.shape
    w_valid = _valid_mask(n_cands, k)  # (M, K) for the w axis of mention k
    se_masked = np.where(w_valid[None, None, :, :], s_e, -np.inf)
    argmax_w = np.argmax(se_masked, axis=3)
    s_m = np.take_along_axis(se_masked, argmax_w[..., None], axis=3)[..., 0]
    s_m = np.where(np.isfinite(s_m), s_m, 0.0)
    context = np.repeat((n_cands > 0)[None, :].astype(np.float64), m, axis=0)
    np.fill_diagonal(context, 0.0)
    s_g = np.einsum("ijk,ik->ij", s_m, context) / m
    # zero padded slots and unused argmax entries so backends agree elementwise
    scores = np.where(w_valid, s_l + s_g, 0.0)
    argmax_w = np.where((context > 0.0)[:, None, :] & w_valid[:, :, None], argmax_w, 0)
    return scores, argmax_w


def greedy_backward(ds, argmax_w, n_cands):
    """Scatter dL/ds back onto the pair scores through the max and the mean."""
    m, k = ds.shape
    context = np.repeat((n_cands > 0)[None, :].astype(np.float64), m, axis=0)
    np.fill_diagonal(context, 0.0)
    d_sm = ds[:, :, None] * context[:, None, :] / m  # (M, K, M)
    ds_e = np.zeros((m, k, m, k), dtype=np.float64)
    np.put_along_axis(ds_e, argmax_w[..., None], d_sm[..., None], axis=3)
    return ds_e
