import numpy as np
import pytest

from conftest import make_collection, make_query
from oracles import decode_codes, gated_late_score, random_orthogonal, random_unit_rows, topk_ids

from multivec.builder import build_index
from multivec.late import (
    build_adc_tables,
    final_topk,
    late_score,
    make_adc_lookup,
    make_exact_lookup,
    residual_score,
)
from multivec.model import QUERY_SLOTS, CompressedCorpus, PQCodebook, QueryMatrix


def _random_pq(rng, m, sub_dim, rotation=None):
    cw = (0.2 * rng.standard_normal((m, 256, sub_dim))).astype(np.float32)
    return PQCodebook(codewords=cw, rotation=rotation)


def _corpus_with_codes(rng, pq, n_tokens):
    codes = rng.integers(0, 256, (n_tokens, pq.m)).astype(np.uint8)
    return CompressedCorpus(
        token_centroid_ids=np.zeros(n_tokens, dtype=np.uint32),
        pq_codes=codes,
        passage_offsets=np.array([0, n_tokens], dtype=np.uint64),
        pq=pq,
    )


def _mask(n):
    mask = np.zeros(QUERY_SLOTS, dtype=bool)
    mask[:n] = True
    return mask


class TestBuildADCTables:
    def test_zero_query_gives_zero_tables(self):
        rng = np.random.default_rng(0)
        pq = _random_pq(rng, 4, 4)
        q = QueryMatrix.from_embeddings(np.zeros((3, 16), dtype=np.float32))
        adc = build_adc_tables(q, pq)
        assert not adc.tables.any()

    def test_self_codeword_dot_is_one(self):
        rng = np.random.default_rng(1)
        q0 = random_unit_rows(rng, 1, 8)
        cw = np.zeros((1, 256, 8), dtype=np.float32)
        cw[0, 0] = q0[0]
        pq = PQCodebook(codewords=cw)
        adc = build_adc_tables(QueryMatrix.from_embeddings(q0), pq)
        assert abs(adc.tables[0, 0, 0] - 1.0) < 1e-6

    def test_entries_match_direct_subvector_dots(self):
        rng = np.random.default_rng(2)
        pq = _random_pq(rng, 4, 4)
        q = make_query(16, 5, seed=3)
        adc = build_adc_tables(q, pq)
        for i in (0, 4):
            for s in range(4):
                for c in (0, 17, 255):
                    direct = float(
                        np.dot(
                            q.terms[i, s * 4 : (s + 1) * 4].astype(np.float64),
                            pq.codewords[s, c].astype(np.float64),
                        )
                    )
                    assert abs(float(adc.tables[i, s, c]) - direct) < 1e-6

    def test_inactive_terms_zeroed(self):
        rng = np.random.default_rng(3)
        pq = _random_pq(rng, 2, 8)
        q = make_query(16, 2, seed=4)
        adc = build_adc_tables(q, pq)
        assert not adc.tables[2:].any()

    def test_dim_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        pq = _random_pq(rng, 2, 8)
        q = make_query(32, 2, seed=5)
        with pytest.raises(ValueError, match="dim"):
            build_adc_tables(q, pq)

    @pytest.mark.parametrize("with_rotation", [False, True])
    def test_table_sums_equal_dot_with_decode(self, with_rotation):
        rng = np.random.default_rng(5)
        rot = random_orthogonal(rng, 16) if with_rotation else None
        pq = _random_pq(rng, 4, 4, rotation=rot)
        q = make_query(16, 6, seed=6)
        adc = build_adc_tables(q, pq)
        for _ in range(100):
            codes = rng.integers(0, 256, 4).astype(np.uint8)
            for i in range(6):
                table_sum = float(adc.tables[i, np.arange(4), codes].sum())
                direct = float(
                    np.dot(
                        q.terms[i].astype(np.float64),
                        decode_codes(pq.codewords, codes, rotation=rot),
                    )
                )
                assert abs(table_sum - direct) < 1e-5


class TestResidualScore:
    def test_zero_residual_with_zero_codeword(self):
        pq = PQCodebook(codewords=np.zeros((2, 256, 4), dtype=np.float32))
        rng = np.random.default_rng(6)
        corpus = _corpus_with_codes(rng, pq, 3)
        q = make_query(8, 2, seed=7)
        adc = build_adc_tables(q, pq)
        assert residual_score(0, 1, adc, corpus) == 0.0

    def test_in_codebook_residual_exact(self):
        rng = np.random.default_rng(7)
        pq = _random_pq(rng, 2, 4)
        corpus = _corpus_with_codes(rng, pq, 5)
        q = make_query(8, 3, seed=8)
        adc = build_adc_tables(q, pq)
        token = 2
        r = decode_codes(pq.codewords, corpus.pq_codes[token])
        direct = float(np.dot(q.terms[1].astype(np.float64), r))
        assert abs(residual_score(1, token, adc, corpus) - direct) < 1e-5

    def test_matches_decode_then_dot_oracle(self):
        rng = np.random.default_rng(8)
        pq = _random_pq(rng, 4, 2)
        corpus = _corpus_with_codes(rng, pq, 200)
        q = make_query(8, 8, seed=9)
        adc = build_adc_tables(q, pq)
        for token in range(0, 200, 7):
            i = int(rng.integers(0, 8))
            expected = float(
                np.dot(
                    q.terms[i].astype(np.float64),
                    decode_codes(pq.codewords, corpus.pq_codes[token]),
                )
            )
            assert abs(residual_score(i, token, adc, corpus) - expected) < 1e-5


class TestLateScore:
    def _instance(self, seed, n_tokens=9, n_active=7):
        rng = np.random.default_rng(seed)
        gathered = rng.uniform(-1, 1, (n_tokens, QUERY_SLOTS)).astype(np.float32)
        pq = _random_pq(rng, 4, 2)
        codes = rng.integers(0, 256, (n_tokens, pq.m)).astype(np.uint8)
        q = make_query(8, n_active, seed=seed + 1)
        adc = build_adc_tables(q, pq)
        lookup = make_adc_lookup(adc, codes)
        # full per-(token, term) residual matrix for the oracle
        res = np.zeros((n_tokens, QUERY_SLOTS), dtype=np.float32)
        for i in range(QUERY_SLOTS):
            res[:, i] = adc.tables[i][np.arange(pq.m)[None, :], codes].sum(
                axis=1, dtype=np.float32
            )
        return gathered, lookup, res, _mask(n_active)

    def test_gate_disabled_equals_full_decomposition(self):
        gathered, lookup, res, mask = self._instance(0)
        got, evals = late_score(gathered, lookup, -2.0, mask)
        expected, _ = gated_late_score(gathered, res, -2.0, mask)
        assert abs(got - expected) < 1e-5
        assert evals == gathered.shape[0] * mask.sum()

    def test_total_fallback_identical_to_gate_disabled(self):
        gathered, lookup, res, mask = self._instance(1)
        full, _ = late_score(gathered, lookup, -2.0, mask)
        fallback, evals = late_score(gathered, lookup, 2.0, mask)
        assert fallback == full  # exact equality: same arithmetic path
        assert evals == gathered.shape[0] * mask.sum()

    def test_matches_gated_oracle_with_eval_count(self):
        for seed in range(10):
            gathered, lookup, res, mask = self._instance(seed, n_tokens=8)
            got, evals = late_score(gathered, lookup, 0.5, mask)
            expected, expected_evals = gated_late_score(gathered, res, 0.5, mask)
            assert abs(got - expected) < 1e-5
            assert evals == expected_evals

    def test_eval_count_is_sum_of_gate_sizes_when_all_nonempty(self):
        rng = np.random.default_rng(11)
        gathered = rng.uniform(0.6, 1.0, (6, QUERY_SLOTS)).astype(np.float32)
        gathered[3:, :] = rng.uniform(-1.0, 0.4, (3, QUERY_SLOTS)).astype(np.float32)
        _, lookup, res, mask = self._instance(12, n_tokens=6)
        got, evals = late_score(gathered, lookup, 0.5, mask)
        expected = sum(
            int((gathered[:, i] > 0.5).sum()) for i in np.flatnonzero(mask)
        )
        assert evals == expected

    def test_filter_soundness(self):
        # gated per-term max never exceeds the ungated one; equal when the
        # ungated argmax clears the gate
        for seed in range(8):
            gathered, lookup, res, mask = self._instance(seed + 20)
            for th_r in (-0.5, 0.0, 0.5, 0.9):
                for i in np.flatnonzero(mask):
                    col = gathered[:, i]
                    combined = col + res[:, i]
                    unfiltered = float(combined.max())
                    sel = np.flatnonzero(col > th_r)
                    if sel.size == 0:
                        continue
                    filtered = float(combined[sel].max())
                    assert filtered <= unfiltered + 1e-7
                    if col[int(np.argmax(combined))] > th_r:
                        assert filtered == unfiltered


class TestExactModeEquivalence:
    def test_decomposed_score_equals_exhaustive_maxsim(self):
        from oracles import maxsim_score

        coll = make_collection(6, 5, 16, seed=13)
        index = build_index(coll, num_centroids=4, m=4, iters=2, seed=0, pq_iters=1)
        tokens, offsets = coll.stacked()
        residuals = tokens - index.centroid_index.centroids[
            index.corpus.token_centroid_ids
        ]
        q = make_query(16, 6, seed=14)
        cs = q.terms @ index.centroid_index.centroids.T
        cs_t = np.ascontiguousarray(cs.T)
        off = offsets.astype(np.int64)
        for pid in range(coll.num_passages):
            s, e = off[pid], off[pid + 1]
            gathered = cs_t[index.corpus.token_centroid_ids[s:e]]
            rdots = residuals[s:e] @ q.terms.T
            got, _ = late_score(gathered, make_exact_lookup(rdots), -2.0, q.active_mask)
            expected = maxsim_score(q.terms, q.active_mask, coll.passages[pid])
            assert abs(got - expected) <= 1e-4 * max(abs(expected), 1e-6)


class TestFinalTopk:
    def test_returns_all_when_k_large(self):
        scored = [(2, 0.1), (0, 0.9)]
        assert final_topk(scored, 5) == [(0, 0.9), (2, 0.1)]

    def test_ties_prefer_low_ids(self):
        scored = [(9, 0.5), (1, 0.5), (4, 0.7)]
        assert [pid for pid, _ in final_topk(scored, 2)] == [4, 1]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(15)
        scored = [(pid, float(rng.uniform(-1, 1))) for pid in range(40)]
        assert [pid for pid, _ in final_topk(scored, 9)] == topk_ids(scored, 9)

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            final_topk([(0, 1.0)], 0)
