"""Numba @njit implementation of the hot kernels.

Loop bodies mirror numpy_backend exactly; array conventions are documented
there. Padded (invalid) candidate slots stay zero in every output so the
two backends agree elementwise.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def mlp_forward(x, w1, w2, w3, slope, drop):
    z = np.dot(x, w1)
    out = np.dot(x, w3)
    n, h = z.shape
    for i in range(n):
        acc = 0.0
        for j in range(h):
            zz = z[i, j]
            a = zz if zz > 0.0 else slope * zz
            acc += a * drop[i, j] * w2[j]
        out[i] += acc
    return out


@njit(cache=True)
def mlp_backward(x, w1, w2, w3, slope, drop, gout):
    n, d = x.shape
    h = w1.shape[1]
    z = np.dot(x, w1)
    dw1 = np.zeros((d, h))
    dw2 = np.zeros(h)
    dw3 = np.zeros(d)
    for i in range(n):
        g = gout[i]
        for j in range(h):
            zz = z[i, j]
            a = zz if zz > 0.0 else slope * zz
            dw2[j] += a * drop[i, j] * g
            dz = g * w2[j] * drop[i, j] * (1.0 if zz > 0.0 else slope)
            for q in range(d):
                dw1[q, j] += x[i, q] * dz
        for q in range(d):
            dw3[q] += x[i, q] * g
    return dw1, dw2, dw3


@njit(cache=True)
def masked_softmax(s, n_cands):
    m, k = s.shape
    out = np.zeros((m, k))
    for i in range(m):
        n = n_cands[i]
        if n == 0:
            continue
        peak = s[i, 0]
        for j in range(1, n):
            if s[i, j] > peak:
                peak = s[i, j]
        total = 0.0
        for j in range(n):
            e = math.exp(s[i, j] - peak)
            out[i, j] = e
            total += e
        for j in range(n):
            out[i, j] /= total
    return out


@njit(cache=True)
def burn_iterate(s_l, s_e, n_cands, gate_w, max_iter, tol, run_all):
    m, k = s_l.shape
    beliefs = np.zeros((max_iter + 1, m, k))
    beliefs[0] = masked_softmax(s_l, n_cands)
    s_t = np.zeros((m, k))
    n_iter = 0
    converged = False
    for t in range(1, max_iter + 1):
        p_prev = beliefs[t - 1]
        for i in range(m):
            for j in range(n_cands[i]):
                s_g = 0.0
                for kk in range(m):
                    g = gate_w[i, kk]
                    if g == 0.0:
                        continue
                    ev = 0.0
                    for w in range(n_cands[kk]):
                        ev += s_e[i, j, kk, w] * p_prev[kk, w]
                    s_g += g * ev
                s_t[i, j] = s_l[i, j] + s_g
        beliefs[t] = masked_softmax(s_t, n_cands)
        n_iter = t
        delta = 0.0
        for i in range(m):
            for j in range(k):
                d = abs(beliefs[t, i, j] - beliefs[t - 1, i, j])
                if d > delta:
                    delta = d
        converged = delta < tol
        if converged and not run_all:
            break
    return beliefs, n_iter, converged


@njit(cache=True)
def burn_belief_backward(s_e, gate_w, beliefs, n_iter, d_final):
    m, k = d_final.shape
    ds = d_final.copy()
    ds_l = np.zeros((m, k))
    ds_e = np.zeros((m, k, m, k))
    d_gate = np.zeros((m, m))
    dp_prev = np.zeros((m, k))
    ds_prev = np.zeros((m, k))
    for t in range(n_iter, 0, -1):
        p_prev = beliefs[t - 1]
        dp_prev[:] = 0.0
        for i in range(m):
            for j in range(k):
                dsij = ds[i, j]
                ds_l[i, j] += dsij
                if dsij == 0.0:
                    continue
                for kk in range(m):
                    g = gate_w[i, kk]
                    ev = 0.0
                    for w in range(k):
                        sev = s_e[i, j, kk, w]
                        pw = p_prev[kk, w]
                        ev += sev * pw
                        ds_e[i, j, kk, w] += dsij * g * pw
                        dp_prev[kk, w] += dsij * g * sev
                    d_gate[i, kk] += dsij * ev
        for i in range(m):
            dot = 0.0
            for j in range(k):
                dot += dp_prev[i, j] * p_prev[i, j]
            for j in range(k):
                ds_prev[i, j] = p_prev[i, j] * (dp_prev[i, j] - dot)
        if t == 1:
            for i in range(m):
                for j in range(k):
                    ds_l[i, j] += ds_prev[i, j]
        else:
            ds[:] = ds_prev
    return ds_l, ds_e, d_gate


@njit(cache=True)
def greedy_forward(s_l, s_e, n_cands):
    m, k = s_l.shape
    scores = np.zeros((m, k))
    argmax_w = np.zeros((m, k, m), dtype=np.int64)
    for i in range(m):
        for j in range(n_cands[i]):
            acc = 0.0
            for kk in range(m):
                if kk == i or n_cands[kk] == 0:
                    continue
                best = s_e[i, j, kk, 0]
                best_w = 0
                for w in range(1, n_cands[kk]):
                    v = s_e[i, j, kk, w]
                    if v > best:
                        best = v
                        best_w = w
                argmax_w[i, j, kk] = best_w
                acc += best
            scores[i, j] = s_l[i, j] + acc / m
    return scores, argmax_w


@njit(cache=True)
def greedy_backward(ds, argmax_w, n_cands):
    m, k = ds.shape
    ds_e = np.zeros((m, k, m, k))
    for i in range(m):
        for j in range(n_cands[i]):
            dsij = ds[i, j]
            if dsij == 0.0:
                continue
            for kk in range(m):
                if kk == i or n_cands[kk] == 0:
                    continue
                ds_e[i, j, kk, argmax_w[i, j, kk]] += dsij / m
    return ds_e
