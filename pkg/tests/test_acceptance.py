"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import time

import numpy as np
import pytest

from conftest import make_collection, make_query
from oracles import brute_force_ranking, decode_codes, term_hit_count

from multivec.bench import bench_membership, bench_select, write_csv
from multivec.builder import build_index
from multivec.engine import ScoreScratch, SearchEngine
from multivec.interaction import centroid_score, transpose_scores
from multivec.late import build_adc_tables, residual_score
from multivec.metrics import mrr_at_k, recall_at_k
from multivec.model import (
    QUERY_SLOTS,
    CompressedCorpus,
    PQCodebook,
    QueryMatrix,
    SearchConfig,
)
from multivec.prefilter import build_stacked_bitvectors, prefilter_score
from multivec.select import VARIANTS, select_above_threshold
from multivec.storage import index_bytes_per_token, save_index
from multivec.synthetic import SyntheticSpec, generate


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _exact_engine(coll, index) -> SearchEngine:
    tokens, _ = coll.stacked()
    residuals = tokens - index.centroid_index.centroids[
        index.corpus.token_centroid_ids
    ]
    return SearchEngine(index, exact_residuals=residuals)


def _open_config(index, k=None) -> SearchConfig:
    n = index.num_passages
    return SearchConfig(
        k=k or n,
        nprobe=index.num_centroids,
        th=-1.1,
        n_filter=n,
        ndocs=n,
        th_r=-2.0,
    )


# ---------------------------------------------------------------------------
# shared planted-relevance corpus for criteria 7 and 8
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def planted():
    spec = SyntheticSpec(
        passages=10_000,
        tokens_per_passage=16,
        dim=64,
        queries=128,
        seed=42,
        topics=64,
        topics_per_passage=4,
        query_terms=8,
        within_cos=0.86,
        query_cos=0.95,
    )
    coll, qcoll, qrels = generate(spec)
    index = build_index(
        coll, num_centroids=160, m=16, iters=5, seed=7, pq_iters=4,
        pq_train_sample=32_768,
    )
    engine = SearchEngine(index)
    queries = [QueryMatrix.from_embeddings(p) for p in qcoll.passages]
    return engine, queries, qrels


def _run_queries(engine, queries, cfg):
    scratch = ScoreScratch.for_index(engine.index)
    run, stats = {}, []
    for qid, q in enumerate(queries):
        result = engine.search(q, cfg, scratch=scratch)
        run[str(qid)] = [str(pid) for pid, _ in result.ranking]
        stats.append(result.stats)
    return run, stats


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_c01_oracle_equivalence_with_filters_disabled():
    started = time.perf_counter()
    corpora = 0
    rng = np.random.default_rng(1001)
    for trial in range(20):
        dim = 16 if trial % 2 == 0 else 128
        n_passages = int(rng.integers(30, 90))
        tokens = int(rng.integers(3, 8))
        m = 16 if dim == 16 else (32 if trial % 4 == 1 else 16)
        coll = make_collection(n_passages, tokens, dim, seed=2000 + trial, ragged=True)
        index = build_index(
            coll, num_centroids=int(rng.integers(6, 14)), m=m, iters=2,
            seed=trial, pq_iters=1,
        )
        engine = _exact_engine(coll, index)
        cfg = _open_config(index)
        for qseed in range(3):
            q = make_query(dim, int(rng.integers(2, 9)), seed=3000 + trial * 7 + qseed)
            got = engine.search(q, cfg).ranking
            expected = brute_force_ranking(coll, q, coll.num_passages)
            assert [p for p, _ in got] == [p for p, _ in expected], (
                f"ranking mismatch on corpus {trial}"
            )
            # relative tolerance floored at one term's unit contribution,
            # so near-zero sums of cancelling maxima stay comparable
            for (_, a), (_, b) in zip(got, expected):
                assert abs(a - b) <= 1e-4 * max(abs(b), 1.0)
        corpora += 1
    elapsed = time.perf_counter() - started
    _report(
        1,
        corpora == 20 and elapsed < 60.0,
        f"exact ranking equality on {corpora} corpora (d in {{16,128}}), "
        f"{elapsed:.1f}s < 60s",
    )


def test_c02_kernel_equivalence_bit_identical():
    rng = np.random.default_rng(77)
    cases = 0
    out = np.empty(1 << 18, dtype=np.int64)
    for case in range(10_000):
        if case < 20:
            length = 1 << 18
        else:
            length = int(2 ** rng.uniform(0, 14))
        row = rng.uniform(-1, 1, length).astype(np.float32)
        th = float(rng.uniform(-1.05, 1.05))
        expected = np.flatnonzero(row > np.float32(th))
        for variant in VARIANTS:
            got = select_above_threshold(row, th, variant=variant, out=out)
            assert np.array_equal(got, expected), f"{variant} at L={length} th={th}"
        cases += 1
    _report(2, cases == 10_000, f"4 variants bit-identical on {cases} cases, L up to 2^18")


def test_c03_prefilter_count_matches_double_loop():
    rng = np.random.default_rng(78)
    n_centroids = 512
    checked = 0
    repeated_hit_cases = 0
    for case in range(10_000):
        if case % 50 == 0:
            cs = rng.uniform(-1, 1, (QUERY_SLOTS, n_centroids)).astype(np.float32)
            th = float(rng.uniform(0.0, 0.8))
            mask = np.zeros(QUERY_SLOTS, dtype=bool)
            mask[: int(rng.integers(1, QUERY_SLOTS + 1))] = True
            bv = build_stacked_bitvectors(cs, th, mask)
            close_sets = [
                set(np.flatnonzero(cs[i] > np.float32(th)).tolist()) if mask[i] else set()
                for i in range(QUERY_SLOTS)
            ]
        n_tokens = int(rng.integers(1, 10))
        ids = rng.integers(0, n_centroids, n_tokens).astype(np.uint32)
        if case % 2 == 0 and n_tokens > 1:
            ids[n_tokens // 2 :] = ids[0]  # force repeated membership hits
            repeated_hit_cases += 1
        got = prefilter_score(ids, bv)
        expected = term_hit_count(ids, close_sets, np.flatnonzero(mask))
        assert got == expected, f"case {case}"
        checked += 1
    _report(
        3,
        checked == 10_000 and repeated_hit_cases > 4000,
        f"existential term count exact on {checked} instances "
        f"({repeated_hit_cases} with repeated hits)",
    )


def test_c04_centroid_interaction_matches_naive():
    rng = np.random.default_rng(79)
    checked = 0
    for case in range(10_000):
        if case % 100 == 0:
            n_centroids = int(rng.integers(32, 257))
            cs = rng.uniform(-1, 1, (QUERY_SLOTS, n_centroids)).astype(np.float32)
            cs_t = transpose_scores(cs)
            cs64 = cs.astype(np.float64)
        mask = np.zeros(QUERY_SLOTS, dtype=bool)
        mask[: int(rng.integers(1, QUERY_SLOTS + 1))] = True
        ids = rng.integers(0, cs.shape[1], int(rng.integers(1, 13))).astype(np.uint32)
        got, _ = centroid_score(ids, cs_t, mask)
        expected = float(cs64[:, ids].max(axis=1)[mask].sum())
        assert abs(got - expected) <= 1e-5 * max(abs(expected), 1e-8), f"case {case}"
        checked += 1
    _report(4, checked == 10_000, f"approximated scores within 1e-5 of naive on {checked} instances")


def test_c05_adc_matches_decode_then_dot():
    rng = np.random.default_rng(80)
    dim = 64
    total_checked = 0
    for m in (16, 32):
        sub = dim // m
        cw = (0.2 * rng.standard_normal((m, 256, sub))).astype(np.float32)
        pq = PQCodebook(codewords=cw)
        codes = rng.integers(0, 256, (5000, m)).astype(np.uint8)
        corpus = CompressedCorpus(
            token_centroid_ids=np.zeros(5000, dtype=np.uint32),
            pq_codes=codes,
            passage_offsets=np.array([0, 5000], dtype=np.uint64),
            pq=pq,
        )
        q = make_query(dim, QUERY_SLOTS, seed=81 + m)
        adc = build_adc_tables(q, pq)
        terms = rng.integers(0, QUERY_SLOTS, 5000)
        for token in range(5000):
            i = int(terms[token])
            got = residual_score(i, token, adc, corpus)
            expected = float(
                np.dot(
                    q.terms[i].astype(np.float64),
                    decode_codes(cw, codes[token]),
                )
            )
            assert abs(got - expected) <= 1e-5 * max(abs(expected), 1e-8)
            total_checked += 1
    _report(5, total_checked == 10_000, f"ADC lookups within 1e-5 of decode-then-dot on {total_checked} tokens (m=16, m=32)")


def test_c06_gate_degeneracies_reproduce_full_decomposition():
    checked = 0
    for seed in range(5):
        coll = make_collection(20, 5, 16, seed=90 + seed, ragged=True)
        index = build_index(coll, num_centroids=6, m=4, iters=2, seed=seed, pq_iters=1)
        engine = SearchEngine(index)
        base = _open_config(index)
        for qseed in range(3):
            q = make_query(16, 6, seed=95 + seed * 3 + qseed)
            off = engine.search(q, base).ranking
            for th_r in (-2.0, 2.0):
                cfg = SearchConfig(
                    k=base.k, nprobe=base.nprobe, th=base.th,
                    n_filter=base.n_filter, ndocs=base.ndocs, th_r=th_r,
                )
                got = engine.search(q, cfg).ranking
                assert got == off, f"th_r={th_r} diverged"  # exact float equality
            checked += 1
    _report(6, checked == 15, "th_r=-2 and th_r=+2 both reproduce ungated scores exactly")


def test_c07_prefilter_preserves_recall(planted):
    engine, queries, qrels = planted
    base = dict(k=100, nprobe=4, ndocs=400, th_r=0.5)
    run_on, _ = _run_queries(engine, queries, SearchConfig(**base, th=0.4, n_filter=1000))
    run_off, _ = _run_queries(
        engine, queries, SearchConfig(**base, th=-1.1, n_filter=engine.index.num_passages)
    )
    r_on = recall_at_k(run_on, qrels, 100)
    r_off = recall_at_k(run_off, qrels, 100)
    diff = abs(r_on - r_off)
    _report(
        7,
        diff <= 0.01,
        f"recall@100 {r_on:.4f} with prefilter (th=0.4, n_filter=1000) vs "
        f"{r_off:.4f} without; |diff| = {diff:.4f} <= 0.01",
    )


def test_c08_residual_gate_cuts_work_without_quality_loss(planted):
    engine, queries, qrels = planted
    base = dict(k=10, nprobe=4, ndocs=40, th=0.4, n_filter=1000)
    run_gate, stats_gate = _run_queries(engine, queries, SearchConfig(**base, th_r=0.5))
    run_full, _ = _run_queries(engine, queries, SearchConfig(**base, th_r=-2.0))
    evals = sum(s.residual_evals for s in stats_gate)
    full = sum(s.full_token_evals for s in stats_gate)
    ratio = evals / full
    mrr_gate = mrr_at_k(run_gate, qrels, 10)
    mrr_full = mrr_at_k(run_full, qrels, 10)
    rel_change = abs(mrr_gate - mrr_full) / max(mrr_full, 1e-9)
    _report(
        8,
        ratio <= 0.70 and rel_change < 0.005,
        f"residual evaluations {ratio:.3f} of ungated count (<= 0.70); "
        f"MRR@10 {mrr_gate:.4f} vs {mrr_full:.4f}, rel change {rel_change:.5f} < 0.005",
    )


def test_c09_performance_shape(tmp_path):
    select_rows = bench_select(
        length=262_144,
        thresholds=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7),
        reps=15,
        seed=5,
    )
    write_csv(tmp_path / "select.csv", select_rows)

    def variation(variant):
        times = [r["ns_per_element"] for r in select_rows if r["variant"] == variant]
        return (max(times) - min(times)) / min(times)

    branchless_var = variation("branchless")
    naive_var = variation("naive_if")

    membership_rows = bench_membership(num_centroids=1 << 18, seed=5)
    write_csv(tmp_path / "membership.csv", membership_rows)
    stacked = next(r for r in membership_rows if r["method"] == "stacked")
    speedup = stacked["speedup_vs_per_set"]

    ok = branchless_var < 0.15 and naive_var > 0.15 and speedup >= 3.0
    _report(
        9,
        ok,
        f"branchless latency varies {branchless_var:.1%} (< 15%), naive-if "
        f"{naive_var:.1%} (> 15%); stacked membership {speedup:.1f}x over "
        f"per-set baseline (>= 3x) at |C| = 2^18",
    )


def test_c10_byte_accounting(tmp_path):
    coll = make_collection(12, 5, 128, seed=99)
    sizes = {}
    for m in (16, 32):
        index = build_index(coll, num_centroids=8, m=m, iters=2, seed=0, pq_iters=1)
        out = tmp_path / f"idx{m}"
        save_index(out, index)
        sizes[m] = index_bytes_per_token(out)
    ok = sizes[16] == 20.0 and sizes[32] == 36.0
    _report(
        10,
        ok,
        f"bytes per embedding: {sizes[16]:.0f} at m=16 (expect 20), "
        f"{sizes[32]:.0f} at m=32 (expect 36), fixed overheads excluded",
    )
