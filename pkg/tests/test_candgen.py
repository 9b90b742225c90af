"""Dictionary building, lookup, calibration, and fusion tests."""

import json
import math

import numpy as np
import pytest

from xelink.candgen import (
    CandGenError,
    MentionEntityMap,
    build_wikimention,
    calibrate,
    combine,
    generate_candidates,
    lookup,
    read_dictionary_tsv,
    read_external_scores,
    write_dictionary_tsv,
)
from xelink.kbstats import AnchorPage, BilingualMap


class TestBuildWikimention:
    def test_anchor_redirected_through_bilingual_map(self):
        pages = [AnchorPage("Itoophiyaa", (("Itoophiyaatti", "Itoophiyaa"),))]
        bimap = BilingualMap({"Itoophiyaa": "Ethiopia"})
        mm = build_wikimention(pages, bimap)
        assert mm.table == {"itoophiyaatti": [("Ethiopia", 1)]}
        assert mm.dropped_anchors == 0

    def test_unmapped_anchor_dropped_and_counted(self):
        pages = [AnchorPage("X", (("foo", "NoSuchEntity"),))]
        mm = build_wikimention(pages, BilingualMap({}))
        assert mm.table == {}
        assert mm.dropped_anchors == 1

    def test_priors_from_counts(self):
        pages = [
            AnchorPage("P", (("s", "E1src"), ("s", "E1src"), ("s", "E1src"), ("s", "E2src")))
        ]
        bimap = BilingualMap({"E1src": "E1", "E2src": "E2"})
        mm = build_wikimention(pages, bimap)
        assert dict(mm.priors("s")) == {"E1": 0.75, "E2": 0.25}

    def test_priors_sum_to_one(self):
        rng = np.random.default_rng(5)
        links = tuple(("surf", f"S{int(i)}") for i in rng.integers(0, 8, size=200))
        bimap = BilingualMap({f"S{i}": f"E{i}" for i in range(8)})
        mm = build_wikimention([AnchorPage("P", links)], bimap)
        assert abs(sum(p for _, p in mm.priors("surf")) - 1.0) < 1e-12

    def test_surface_normalization(self):
        pages = [AnchorPage("P", (("New  YORK", "NY"),))]
        mm = build_wikimention(pages, BilingualMap({"NY": "New York City"}))
        assert "new york" in mm.table
        assert mm.priors(" new   york ") == [("New York City", 1.0)]


class TestLookup:
    def make_map(self):
        return MentionEntityMap(table={"s": [("E1", 3), ("E2", 1)]})

    def test_top_1(self):
        assert lookup(self.make_map(), "s", 1) == [("E1", 0.75)]

    def test_unknown_surface(self):
        assert lookup(self.make_map(), "nope", 5) == []

    def test_k_larger_than_list(self):
        assert lookup(self.make_map(), "s", 10) == [("E1", 0.75), ("E2", 0.25)]

    def test_ties_break_by_entity_id(self):
        mm = MentionEntityMap(table={"s": [("B", 1), ("A", 1), ("C", 2)]})
        assert lookup(mm, "s", 3) == [("C", 0.5), ("A", 0.25), ("B", 0.25)]

    def test_k_must_be_positive(self):
        with pytest.raises(CandGenError):
            lookup(self.make_map(), "s", 0)


class TestCalibrate:
    def test_singleton(self):
        assert calibrate([("E", -123.0)]) == [("E", 1.0)]

    def test_two_scores_direct_evaluation(self):
        out = dict(calibrate([("A", 1.0), ("B", 0.0)], gamma=1.0))
        assert out["A"] == pytest.approx(0.73106, abs=1e-5)
        assert out["B"] == pytest.approx(0.26894, abs=1e-5)

    def test_equal_scores_uniform(self):
        out = calibrate([(f"E{i}", 2.5) for i in range(7)])
        for _, p in out:
            assert p == pytest.approx(1 / 7, abs=1e-15)

    def test_gamma_sharpens(self):
        soft = dict(calibrate([("A", 1.0), ("B", 0.0)], gamma=1.0))
        sharp = dict(calibrate([("A", 1.0), ("B", 0.0)], gamma=5.0))
        assert sharp["A"] > soft["A"]

    def test_empty_rejected(self):
        with pytest.raises(CandGenError):
            calibrate([])

    def test_non_finite_rejected(self):
        with pytest.raises(CandGenError):
            calibrate([("A", float("nan")), ("B", 0.0)])

    def test_rank_preserved_and_sums_to_one(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            n = int(rng.integers(1, 40))
            scores = [(f"E{i}", float(s)) for i, s in enumerate(rng.normal(scale=10, size=n))]
            out = calibrate(scores, gamma=float(rng.uniform(0.1, 4.0)))
            assert abs(sum(p for _, p in out) - 1.0) < 1e-12
            in_order = np.argsort([-s for _, s in scores], kind="stable")
            out_order = np.argsort([-p for _, p in out], kind="stable")
            assert list(in_order) == list(out_order)

    def test_large_list_sum(self):
        rng = np.random.default_rng(2)
        scores = [(f"E{i}", float(s)) for i, s in enumerate(rng.normal(size=10_000))]
        out = calibrate(scores)
        assert abs(sum(p for _, p in out) - 1.0) < 1e-12

    def test_extreme_scores_stable(self):
        out = dict(calibrate([("A", 1000.0), ("B", -1000.0)]))
        assert out["A"] == pytest.approx(1.0)
        assert out["B"] >= 0.0


class TestCombine:
    def test_mean_of_two_sources(self):
        fused = dict(combine([[("E", 0.6)], [("E", 0.4)]], k=5))
        assert fused["E"] == pytest.approx(0.5, abs=1e-15)

    def test_absent_source_counts_as_zero(self):
        fused = dict(combine([[("E", 0.6)], []], k=5))
        assert fused["E"] == pytest.approx(0.3, abs=1e-15)

    def test_single_source_identity(self):
        src = [("A", 0.7), ("B", 0.3)]
        assert combine([src], k=5) == src

    def test_order_independent(self):
        a = [("A", 0.5), ("B", 0.5)]
        b = [("B", 0.9), ("C", 0.1)]
        assert combine([a, b], k=5) == combine([b, a], k=5)

    def test_top_k_with_tie_break(self):
        fused = combine([[("B", 0.4), ("A", 0.4), ("C", 0.6)]], k=2)
        assert fused == [("C", 0.6), ("A", 0.4)]

    def test_no_sources_rejected(self):
        with pytest.raises(CandGenError):
            combine([], k=3)


class TestDictionaryTsv:
    def test_round_trip(self, tmp_path):
        mm = MentionEntityMap(table={"s1": [("A", 2), ("B", 1)], "s2": [("C", 5)]})
        path = tmp_path / "d.tsv"
        write_dictionary_tsv(mm, path)
        loaded = read_dictionary_tsv(path)
        assert loaded.table == mm.table

    def test_bad_count(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("s\tE\t0\n")
        with pytest.raises(CandGenError, match="positive"):
            read_dictionary_tsv(path)


class TestExternalScores:
    def write(self, tmp_path, records):
        path = tmp_path / "ext.jsonl"
        path.write_text("".join(json.dumps(r) + "\n" for r in records))
        return path

    def test_read(self, tmp_path):
        path = self.write(
            tmp_path,
            [
                {
                    "doc_id": "d1",
                    "mention_id": "m0",
                    "candidates": [{"entity": "A", "score": 2.0}],
                    "probabilistic": False,
                }
            ],
        )
        ext = read_external_scores(path)
        assert ext.get("d1", "m0") == [("A", 2.0)]
        assert not ext.probabilistic
        assert ext.get("d1", "missing") == []

    def test_inconsistent_flag_rejected(self, tmp_path):
        path = self.write(
            tmp_path,
            [
                {"doc_id": "d", "mention_id": "a", "candidates": [], "probabilistic": False},
                {"doc_id": "d", "mention_id": "b", "candidates": [], "probabilistic": True},
            ],
        )
        with pytest.raises(CandGenError, match="inconsistent"):
            read_external_scores(path)


class TestGenerateCandidates:
    def test_dictionary_plus_calibrated_external(self, tmp_path):
        mm = MentionEntityMap(table={"s": [("A", 3), ("B", 1)]})
        ext_path = tmp_path / "e.jsonl"
        ext_path.write_text(
            json.dumps(
                {
                    "doc_id": "d",
                    "mention_id": "m",
                    "candidates": [{"entity": "B", "score": 1.0}, {"entity": "C", "score": 0.0}],
                    "probabilistic": False,
                }
            )
            + "\n"
        )
        ext = read_external_scores(ext_path)
        fused = dict(generate_candidates("d", "m", "s", mm, [ext], k=10, gamma=1.0))
        sb = 1.0 / (1.0 + math.e)  # calibrated score of the lower external candidate
        assert fused["A"] == pytest.approx(0.75 / 2)
        assert fused["B"] == pytest.approx((0.25 + 1 - sb) / 2)
        assert fused["C"] == pytest.approx(sb / 2)

    def test_union_never_below_single_source_recall(self):
        # fused list with k >= |union| contains every source's candidates
        rng = np.random.default_rng(23)
        for _ in range(50):
            a = [(f"E{i}", float(p)) for i, p in enumerate(rng.random(4))]
            b = [(f"E{i}", float(p)) for i, p in enumerate(rng.random(4), start=2)]
            fused = combine([a, b], k=10)
            entities = {e for e, _ in fused}
            assert {e for e, _ in a} <= entities
            assert {e for e, _ in b} <= entities
