#!/usr/bin/env python3
"""End-to-end experiment on a planted-relevance corpus.

Generates the corpus, builds an index, then sweeps the prefilter threshold
and the residual gate, reporting latency, residual work, and MRR/recall for
each setting. Useful for reproducing the filtering-vs-quality trade-off at
desk scale.
"""

import argparse
import time

from multivec.bench import write_csv
from multivec.builder import build_index
from multivec.engine import ScoreScratch, SearchEngine
from multivec.metrics import mrr_at_k, recall_at_k
from multivec.model import QueryMatrix, SearchConfig
from multivec.synthetic import SyntheticSpec, generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--passages", type=int, default=10_000)
    ap.add_argument("--tokens-per-passage", type=int, default=16)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--queries", type=int, default=128)
    ap.add_argument("--centroids", type=int, default=160)
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--csv", default="synthetic_e2e.csv")
    args = ap.parse_args()

    spec = SyntheticSpec(
        passages=args.passages,
        tokens_per_passage=args.tokens_per_passage,
        dim=args.dim,
        queries=args.queries,
        seed=args.seed,
    )
    print("generating corpus ...")
    coll, qcoll, qrels = generate(spec)
    print(f"building index ({args.centroids} centroids, m={args.m}) ...")
    t0 = time.perf_counter()
    index = build_index(
        coll, num_centroids=args.centroids, m=args.m, iters=5,
        seed=args.seed, pq_iters=4, pq_train_sample=1 << 16,
    )
    print(f"  built in {time.perf_counter() - t0:.1f}s")

    engine = SearchEngine(index)
    scratch = ScoreScratch.for_index(index)
    queries = [QueryMatrix.from_embeddings(p) for p in qcoll.passages]

    settings = [
        {"label": "no_prefilter_no_gate", "th": -1.1, "n_filter": args.passages, "th_r": -2.0},
        {"label": "prefilter_only", "th": 0.4, "n_filter": 1000, "th_r": -2.0},
        {"label": "prefilter_and_gate", "th": 0.4, "n_filter": 1000, "th_r": 0.5},
    ]
    rows = []
    for s in settings:
        cfg = SearchConfig(
            k=args.k, nprobe=4, th=s["th"], n_filter=s["n_filter"],
            ndocs=4 * args.k, th_r=s["th_r"],
        )
        run = {}
        latencies = []
        evals = full = 0
        for qid, q in enumerate(queries):
            result = engine.search(q, cfg, scratch=scratch)
            run[str(qid)] = [str(pid) for pid, _ in result.ranking]
            latencies.append(result.timings.total * 1e3)
            evals += result.stats.residual_evals
            full += result.stats.full_token_evals
        row = {
            "setting": s["label"],
            "mean_ms": sum(latencies) / len(latencies),
            "mrr@10": mrr_at_k(run, qrels, 10),
            f"recall@{args.k}": recall_at_k(run, qrels, args.k),
            "residual_work_ratio": evals / max(full, 1),
        }
        rows.append(row)
        print(
            f"{row['setting']:22s} {row['mean_ms']:7.2f} ms  "
            f"mrr@10={row['mrr@10']:.4f}  residual_work={row['residual_work_ratio']:.3f}"
        )
    write_csv(args.csv, rows)
    print(f"rows -> {args.csv}")


if __name__ == "__main__":
    main()
