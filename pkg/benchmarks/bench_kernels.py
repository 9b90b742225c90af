#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the belief-update forward/backward pair and the greedy scorer on
random dense documents of a few sizes. Both backends are imported
directly, so XELINK_BACKEND has no effect here.

Usage: python3 benchmarks/bench_kernels.py [--repeats 50]
"""

import argparse
import time

import numpy as np

from xelink.kernels import numba_backend, numpy_backend

SIZES = [
    # (mentions, candidate slots, features, hidden, iterations)
    (4, 3, 4, 16, 5),
    (8, 10, 4, 128, 10),
    (20, 30, 4, 128, 20),
]


def make_case(rng, m, k, d, h):
    n_cands = np.full(m, k, dtype=np.int64)
    s_l = rng.normal(size=(m, k))
    s_e = rng.normal(size=(m, k, m, k))
    gate_w = np.abs(rng.normal(size=(m, m))) / 30.0
    np.fill_diagonal(gate_w, 0.0)
    d_final = rng.normal(size=(m, k))
    phi = rng.normal(size=(m * k, d))
    w1 = rng.normal(size=(d, h))
    w2 = rng.normal(size=h)
    w3 = rng.normal(size=d)
    drop = np.ones((m * k, h))
    return n_cands, s_l, s_e, gate_w, d_final, phi, w1, w2, w3, drop


def time_backend(backend, case, t_iter, repeats):
    n_cands, s_l, s_e, gate_w, d_final, phi, w1, w2, w3, drop = case
    timings = {}

    def clock(label, fn):
        fn()  # warm (JIT compile on the numba side)
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        timings[label] = (time.perf_counter() - t0) / repeats

    clock("mlp_forward", lambda: backend.mlp_forward(phi, w1, w2, w3, 0.01, drop))
    clock(
        "mlp_backward",
        lambda: backend.mlp_backward(phi, w1, w2, w3, 0.01, drop, d_final.reshape(-1)[: phi.shape[0]]),
    )
    beliefs, n_iter, _ = backend.burn_iterate(s_l, s_e, n_cands, gate_w, t_iter, 1e-6, True)
    clock(
        "burn_iterate",
        lambda: backend.burn_iterate(s_l, s_e, n_cands, gate_w, t_iter, 1e-6, True),
    )
    clock(
        "burn_backward",
        lambda: backend.burn_belief_backward(s_e, gate_w, beliefs, n_iter, d_final),
    )
    clock("greedy_forward", lambda: backend.greedy_forward(s_l, s_e, n_cands))
    return timings


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    for m, k, d, h, t_iter in SIZES:
        case = make_case(rng, m, k, d, h)
        t_np = time_backend(numpy_backend, case, t_iter, args.repeats)
        t_nb = time_backend(numba_backend, case, t_iter, args.repeats)
        print(f"\nM={m} K={k} d={d} h={h} T={t_iter}  ({args.repeats} repeats)")
        print(f"  {'kernel':<15} {'numpy':>10} {'numba':>10} {'speedup':>8}")
        for label in t_np:
            ratio = t_np[label] / t_nb[label] if t_nb[label] > 0 else float("inf")
            print(
                f"  {label:<15} {t_np[label] * 1e6:>8.1f}us {t_nb[label] * 1e6:>8.1f}us "
                f"{ratio:>7.1f}x"
            )


if __name__ == "__main__":
    main()
