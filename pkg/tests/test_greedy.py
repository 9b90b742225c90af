"""Linear greedy disambiguator against a naive nested-loop reference."""

import numpy as np
import pytest

from xelink.features import FeatureTensors
from xelink.greedy import (
    LinearParams,
    ModelError,
    greedy_link,
    local_score,
    pair_score,
)


def make_tensors(unary, binary, n_cands, feature_set="BASE", gold=None):
    unary = np.asarray(unary, dtype=np.float64)
    binary = np.asarray(binary, dtype=np.float64)
    m, k = unary.shape[:2]
    n_cands = np.asarray(n_cands, dtype=np.int64)
    return FeatureTensors(
        doc_id="t",
        feature_set=feature_set,
        unary=unary,
        binary=binary,
        n_candidates=n_cands,
        gold_index=np.asarray(gold, dtype=np.int64) if gold is not None else np.full(m, -1, dtype=np.int64),
        distances=np.zeros((m, m), dtype=np.int64),
        candidate_entities=[[f"E{i}_{j}" for j in range(k)] for i in range(m)],
        gold_entities=[None] * m,
    )


def reference_greedy(tensors, params):
    """Independent O(M^2 K^2) scalar-loop implementation of the final scores."""
    m, k_max = tensors.unary.shape[:2]
    n = tensors.n_candidates
    scores = np.zeros((m, k_max))
    for i in range(m):
        for j in range(int(n[i])):
            s_l = float(tensors.unary[i, j] @ params.w_local)
            s_g = 0.0
            for kk in range(m):
                if kk == i or n[kk] == 0:
                    continue
                best = -np.inf
                for w in range(int(n[kk])):
                    best = max(best, float(tensors.binary[i, j, kk, w] @ params.w_pair))
                s_g += best
            scores[i, j] = s_l + s_g / m
    return scores


def random_instance(rng, max_m=4, max_k=3, d=4):
    m = int(rng.integers(1, max_m + 1))
    k = int(rng.integers(1, max_k + 1))
    n_cands = rng.integers(1, k + 1, size=m).astype(np.int64)
    unary = np.zeros((m, k, d))
    binary = np.zeros((m, k, m, k, d))
    for i in range(m):
        unary[i, : n_cands[i]] = rng.normal(size=(n_cands[i], d))
        for kk in range(m):
            if kk != i:
                binary[i, : n_cands[i], kk, : n_cands[kk]] = rng.normal(
                    size=(n_cands[i], n_cands[kk], d)
                )
    return make_tensors(unary, binary, n_cands, feature_set="FEAT")


class TestDotProducts:
    def test_local_first_component(self):
        assert local_score([-0.2877, 5.0, 1.0, 2.0], np.array([1.0, 0, 0, 0])) == -0.2877

    def test_zero_weights(self):
        assert local_score([3.0, 1.0], np.zeros(2)) == 0.0
        assert pair_score([4.0], np.zeros(1)) == 0.0

    def test_scalar_product(self):
        assert local_score([3.0], np.array([2.0])) == 6.0

    def test_unit_weights_sum(self):
        assert pair_score([1.0, 2.0, 3.0, 4.0], np.ones(4)) == 10.0

    def test_random_vectors_match_loop(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = rng.normal(size=4)
            x = rng.normal(size=4)
            expected = sum(float(a * b) for a, b in zip(w, x))
            assert pair_score(x, w) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ModelError):
            local_score([1.0, 2.0], np.ones(3))


class TestGreedyLink:
    def test_hand_worked_two_mention_case(self):
        # pair scores: s_e(a1,b1)=1, s_e(a1,b2)=3, s_e(a2,*)=0; zero local scores
        binary = np.zeros((2, 2, 2, 2, 1))
        binary[0, 0, 1, 0, 0] = 1.0
        binary[0, 0, 1, 1, 0] = 3.0
        # symmetric direction left at zero on purpose
        tensors = make_tensors(np.zeros((2, 2, 1)), binary, [2, 2])
        params = LinearParams(w_local=np.zeros(1), w_pair=np.ones(1))
        result = greedy_link(tensors, params)
        assert result.scores[0, 0] == pytest.approx(3.0 / 2.0)  # s_m(m2, a1)=3, s_g=3/2
        assert result.scores[0, 1] == pytest.approx(0.0)
        assert result.predictions[0] == "E0_0"

    def test_single_mention_document(self):
        unary = np.array([[[2.0], [5.0]]])
        tensors = make_tensors(unary, np.zeros((1, 2, 1, 2, 1)), [2])
        result = greedy_link(tensors, LinearParams(np.ones(1), np.ones(1)))
        assert result.scores[0, 1] == 5.0  # s_g = 0, argmax by s_l
        assert result.predictions[0] == "E0_1"

    def test_all_zero_params_tie_breaks_to_first(self):
        rng = np.random.default_rng(1)
        tensors = random_instance(rng)
        result = greedy_link(tensors, LinearParams(np.zeros(4), np.zeros(4)))
        for i, pred in enumerate(result.predictions):
            assert pred == tensors.candidate_entities[i][0]

    def test_empty_candidate_mention_predicts_none(self):
        unary = np.zeros((2, 1, 1))
        tensors = make_tensors(unary, np.zeros((2, 1, 2, 1, 1)), [1, 0])
        result = greedy_link(tensors, LinearParams(np.ones(1), np.ones(1)))
        assert result.predictions == ["E0_0", None]

    def test_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            tensors = random_instance(rng)
            params = LinearParams(rng.normal(size=4), rng.normal(size=4))
            result = greedy_link(tensors, params)
            expected = reference_greedy(tensors, params)
            m, k = expected.shape
            for i in range(m):
                n = int(tensors.n_candidates[i])
                np.testing.assert_allclose(
                    result.scores[i, :n], expected[i, :n], atol=1e-12
                )

    def test_constant_pair_shift_preserves_argmax(self):
        # s_e + c shifts each mention's s_g by (#context mentions) * c / M,
        # identically across its candidates, so argmaxes cannot move.
        rng = np.random.default_rng(7)
        for _ in range(20):
            tensors = random_instance(rng, max_m=4, max_k=3)
            params = LinearParams(rng.normal(size=4), rng.normal(size=4))
            if params.w_pair[0] == 0.0:
                continue
            base = greedy_link(tensors, params)
            shift = float(rng.normal())
            m = tensors.n_mentions
            bump = np.zeros_like(tensors.binary)
            for i in range(m):
                for kk in range(m):
                    if kk != i:
                        bump[
                            i, : tensors.n_candidates[i], kk, : tensors.n_candidates[kk], 0
                        ] = shift / params.w_pair[0]
            out = greedy_link(
                make_tensors(tensors.unary, tensors.binary + bump, tensors.n_candidates, "FEAT"),
                params,
            )
            n_active = int((tensors.n_candidates > 0).sum())
            for i in range(m):
                n = int(tensors.n_candidates[i])
                if n == 0:
                    continue
                expected_shift = (n_active - 1) * shift / m
                np.testing.assert_allclose(
                    out.scores[i, :n] - base.scores[i, :n], expected_shift, atol=1e-9
                )
                assert np.argmax(out.scores[i, :n]) == np.argmax(base.scores[i, :n])

    def test_other_mention_permutation_invariance(self):
        rng = np.random.default_rng(9)
        tensors = random_instance(rng, max_m=4, max_k=3)
        params = LinearParams(rng.normal(size=4), rng.normal(size=4))
        base = greedy_link(tensors, params)
        m = tensors.n_mentions
        if m < 3:
            return
        perm = np.array([0] + list(1 + rng.permutation(m - 1)))
        permuted = make_tensors(
            tensors.unary[perm],
            tensors.binary[perm][:, :, perm],
            tensors.n_candidates[perm],
            "FEAT",
        )
        out = greedy_link(permuted, params)
        n0 = int(tensors.n_candidates[0])
        np.testing.assert_allclose(out.scores[0, :n0], base.scores[0, :n0], atol=1e-12)
