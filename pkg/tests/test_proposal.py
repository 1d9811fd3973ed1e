import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bapg.core import SimilarityMatrix, ValidationError
from bapg.proposal import (
    FeatureSequence,
    Proposal,
    format_proposals,
    generate_proposals,
    map_time_to_feature_index,
    parse_proposals,
    refine_features,
    score_proposal,
    truncate_features,
)

from conftest import block_similarity, gram_similarity


class TestGenerateProposals:
    def test_zero_change_points(self):
        (p,) = generate_proposals(block_similarity([2, 3], interval=0.5), {0})
        assert (p.t_s, p.t_e, p.source_m) == (0.0, 2.5, 0)

    def test_two_blocks(self):
        props = generate_proposals(block_similarity([2, 2]), {1})
        assert sorted((p.t_s, p.t_e) for p in props) == [(0.0, 2.0), (2.0, 4.0)]
        assert all(p.score == 1.0 for p in props)

    def test_count_bound_and_dedup(self, rng):
        for _ in range(30):
            S = gram_similarity(rng, 6)
            props = generate_proposals(S, {1, 2})
            assert len(props) <= 5
            spans = [(p.t_s, p.t_e) for p in props]
            assert len(spans) == len(set(spans))

    def test_duplicate_keeps_smaller_m(self):
        # all-ones: m=1 and m=2 both start with [0,1); equal scores keep the smaller m
        S = SimilarityMatrix("v", np.ones((4, 4)), 1.0)
        props = generate_proposals(S, {1, 2})
        first = [p for p in props if (p.t_s, p.t_e) == (0.0, 1.0)]
        assert len(first) == 1 and first[0].source_m == 1

    def test_sorted_by_descending_score(self, rng):
        props = generate_proposals(gram_similarity(rng, 12), {1, 2, 3})
        scores = [p.score for p in props]
        assert scores == sorted(scores, reverse=True)

    def test_empty_m_values(self, rng):
        with pytest.raises(ValidationError):
            generate_proposals(gram_similarity(rng, 5), set())

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 20), st.sampled_from([0.1, 0.5, 1.0]), st.integers(0, 2**31))
    def test_partition_and_grid(self, l, T, seed):
        r = np.random.default_rng(seed)
        x = r.normal(size=(l, 3))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        vals = np.clip(x @ x.T, -1, 1)
        np.fill_diagonal(vals, 1.0)
        S = SimilarityMatrix("v", (vals + vals.T) / 2, T)
        ms = sorted({int(m) for m in r.integers(0, l, size=3)})
        props = generate_proposals(S, ms)
        assert len(props) <= sum(m + 1 for m in ms)
        for p in props:
            assert -1.0 <= p.score <= 1.0
            for t in (p.t_s, p.t_e):
                assert abs(t / T - round(t / T)) < 1e-9
        for m in ms:
            spans = sorted((p.t_s, p.t_e) for p in generate_proposals(S, [m]))
            assert spans[0][0] == 0.0 and spans[-1][1] == pytest.approx(l * T)
            assert all(a[1] == b[0] for a, b in zip(spans, spans[1:]))


class TestScoreProposal:
    def test_all_ones(self):
        S = SimilarityMatrix("v", np.ones((5, 5)), 1.0)
        assert score_proposal(S, 1, 3) == 1.0

    def test_single_frame(self, rng):
        assert score_proposal(gram_similarity(rng, 5), 2, 2) == 1.0

    def test_two_blocks(self):
        assert score_proposal(block_similarity([2, 2]), 0, 3) == pytest.approx(0.5)

    def test_bad_range(self):
        with pytest.raises(ValidationError):
            score_proposal(block_similarity([3]), 2, 1)


class TestFeatureMapping:
    def test_examples(self):
        assert map_time_to_feature_index(2.5, 0.5, 100) == 5
        assert map_time_to_feature_index(0.0, 0.7, 3) == 0
        assert map_time_to_feature_index(9.99, 1.0, 10) == 9

    def test_overshoot_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert map_time_to_feature_index(50.0, 1.0, 10) == 9
        assert "past" in caplog.text

    def test_negative(self):
        with pytest.raises(ValidationError):
            map_time_to_feature_index(-0.1, 1.0, 10)

    def test_truncate(self):
        F = FeatureSequence("v", 1.0, np.arange(20.0).reshape(10, 2))
        out = truncate_features(F, Proposal("v", 3.0, 6.0, 1.0, 1))
        np.testing.assert_array_equal(out.rows, F.rows[3:7])

    def test_truncate_whole_video(self):
        F = FeatureSequence("v", 1.0, np.arange(20.0).reshape(10, 2))
        np.testing.assert_array_equal(truncate_features(F, Proposal("v", 0.0, 10.0, 1.0, 0)).rows, F.rows)

    def test_partition_reconstruction(self, rng):
        F = FeatureSequence("v", 0.5, rng.normal(size=(12, 3)))
        # inclusive row mapping: a partition into [a, b) pieces rebuilds F_v from rows a..b-1
        edges = [0, 3, 4, 9, 12]
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            p = Proposal("v", a * 0.5, (b - 1) * 0.5 + 0.25, 1.0, 3)
            pieces.append(truncate_features(F, p).rows)
        np.testing.assert_array_equal(np.vstack(pieces), F.rows)


class TestRefineFeatures:
    def test_top_k_zero_is_identity(self, rng):
        F = FeatureSequence("v", 1.0, rng.normal(size=(8, 3)))
        out = refine_features(F, [Proposal("v", 1.0, 4.0, 0.9, 1)], top_k=0)
        np.testing.assert_array_equal(out.rows, F.rows)

    def test_constant_rows_double(self):
        F = FeatureSequence("v", 1.0, np.tile([1.0, -2.0, 3.0], (6, 1)))
        out = refine_features(F, [Proposal("v", 0.0, 6.0, 1.0, 0)], top_k=1, alpha=1.0)
        np.testing.assert_array_equal(out.rows, 2 * F.rows)

    def test_rows_outside_untouched(self, rng):
        F = FeatureSequence("v", 1.0, rng.normal(size=(10, 3)))
        props = [Proposal("v", 2.0, 4.0, 0.9, 1), Proposal("v", 6.0, 7.0, 0.8, 1), Proposal("v", 0.0, 9.0, 0.1, 0)]
        out = refine_features(F, props, top_k=2, alpha=0.5)
        for i in (0, 1, 5, 8, 9):
            np.testing.assert_array_equal(out.rows[i], F.rows[i])
        np.testing.assert_allclose(out.rows[3], F.rows[3] + 0.5 * F.rows[2:5].mean(axis=0))
        assert out.rows.shape == F.rows.shape

    def test_other_video_ignored(self, rng):
        F = FeatureSequence("v", 1.0, rng.normal(size=(5, 2)))
        out = refine_features(F, [Proposal("w", 0.0, 5.0, 1.0, 0)])
        np.testing.assert_array_equal(out.rows, F.rows)

    def test_negative_top_k(self, rng):
        with pytest.raises(ValidationError):
            refine_features(FeatureSequence("v", 1.0, np.ones((2, 2))), [], top_k=-1)


class TestProposalFormat:
    def test_round_trip(self, rng):
        props = generate_proposals(gram_similarity(rng, 10, video_id="clip_1"), {1, 3})
        text = format_proposals(props)
        assert parse_proposals(text) == props

    def test_invalid_proposal(self):
        with pytest.raises(ValidationError):
            Proposal("v", 3.0, 3.0, 1.0, 0)
        with pytest.raises(ValidationError):
            parse_proposals("v 0 1 0.5\n")
