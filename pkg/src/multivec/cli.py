"""Command-line entry points: index building, search, evaluation, benchmarks,
and synthetic corpus generation."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

def _parse_grid_spec(spec: str) -> list[float]:
    """Parse 'start:stop:step' into an inclusive grid."""
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError as exc:
        raise SystemExit(f"bad grid spec {spec!r}; expected start:stop:step") from exc
    if step <= 0:
        raise SystemExit("grid step must be positive")
    values = []
    v = start
    while v <= stop + 1e-9:
        values.append(round(v, 10))
        v += step
    return values


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    from .storage import write_embeddings
    from .synthetic import SyntheticSpec, generate, write_qrels

    spec = SyntheticSpec(
        passages=args.passages,
        tokens_per_passage=args.tokens_per_passage,
        dim=args.dim,
        queries=args.queries,
        seed=args.seed,
        topics=args.topics,
        topics_per_passage=args.topics_per_passage,
        query_terms=args.query_terms,
        within_cos=args.within_cos,
        query_cos=args.query_cos,
    )
    coll, query_coll, qrels = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_embeddings(out / "passages.emb", coll)
    write_embeddings(out / "queries.emb", query_coll)
    write_qrels(out / "qrels.tsv", qrels)
    print(
        f"wrote {coll.num_passages} passages ({coll.total_tokens} tokens), "
        f"{query_coll.num_passages} queries -> {out}"
    )
    return 0


def _cmd_build_index(args: argparse.Namespace) -> int:
    from .builder import build_index
    from .storage import load_embeddings, save_index

    coll = load_embeddings(args.embeddings)
    rotation = None
    if args.rotation:
        rot = np.fromfile(args.rotation, dtype="<f4")
        rotation = rot.reshape(coll.dim, coll.dim)
    index = build_index(
        coll,
        num_centroids=args.centroids,
        m=args.m,
        iters=args.iters,
        seed=args.seed,
        rotation=rotation,
        pq_iters=args.pq_iters,
        pq_train_sample=args.pq_sample,
    )
    save_index(args.out, index)
    print(
        f"index written to {args.out}: {index.num_centroids} centroids, "
        f"{index.total_tokens} tokens, {index.corpus.bytes_per_token} bytes/token"
    )
    return 0


def _cmd_search(args: argparse.Namespace) -> int:
    from .engine import ScoreScratch, SearchEngine
    from .metrics import write_run
    from .model import SearchConfig
    from .storage import load_index, load_queries

    index = load_index(args.index)
    queries = load_queries(args.queries, expected_dim=index.dim)
    cfg = SearchConfig(
        k=args.k,
        nprobe=args.nprobe,
        th=args.th,
        n_filter=args.n_filter,
        ndocs=args.ndocs,
        th_r=args.th_r,
        variant=args.variant,
    )
    engine = SearchEngine(index)
    scratch = ScoreScratch.for_index(index)
    run = {}
    for qid, q in enumerate(queries):
        result = engine.search(q, cfg, scratch=scratch)
        run[str(qid)] = [(str(pid), score) for pid, score in result.ranking]
    write_run(args.out, run, tag=args.tag)
    print(f"wrote {len(run)} ranked queries -> {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    from . import metrics as M

    run = M.read_run(args.run)
    qrels = M.read_qrels(args.qrels)
    fns = {"mrr": M.mrr_at_k, "recall": M.recall_at_k, "success": M.success_at_k}
    for item in args.metrics.split(","):
        name, _, depth = item.strip().partition("@")
        if name not in fns or not depth.isdigit():
            raise SystemExit(f"unknown metric {item!r}; use e.g. mrr@10")
        value = fns[name](run, qrels, int(depth))
        print(f"{item}\t{value:.4f}")
    return 0


def _cmd_bench_select(args: argparse.Namespace) -> int:
    from .bench import bench_select, write_csv
    from .select import VARIANTS

    variants = VARIANTS if args.variants == "all" else tuple(args.variants.split(","))
    rows = bench_select(
        length=args.len,
        thresholds=tuple(_parse_grid_spec(args.th_grid)),
        variants=variants,
        reps=args.reps,
        seed=args.seed,
    )
    write_csv(args.csv, rows)
    for r in rows:
        print(f"{r['variant']:22s} th={r['th']:.2f}  {r['ns_per_element']:8.3f} ns/elem")
    print(f"wrote {len(rows)} rows -> {args.csv}")
    return 0


def _cmd_bench_membership(args: argparse.Namespace) -> int:
    from .bench import bench_membership, write_csv

    rows = bench_membership(
        num_centroids=args.num_centroids,
        n_passages=args.passages,
        tokens_per_passage=args.tokens,
        close_fraction=args.close_fraction,
        reps=args.reps,
        seed=args.seed,
    )
    write_csv(args.csv, rows)
    for r in rows:
        print(
            f"{r['method']:8s} {r['us_per_passage']:8.3f} us/passage  "
            f"(x{r['speedup_vs_per_set']:.1f} vs per-set)"
        )
    return 0


def _cmd_bench_e2e(args: argparse.Namespace) -> int:
    from .bench import bench_e2e, load_grid, write_csv
    from .engine import SearchEngine
    from .storage import load_index, load_queries

    index = load_index(args.index)
    queries = load_queries(args.queries, expected_dim=index.dim)
    grid = load_grid(args.grid)
    if not grid:
        raise SystemExit("empty config grid")
    engine = SearchEngine(index)
    rows = bench_e2e(engine, queries, grid, k=args.k)
    write_csv(args.csv, rows)
    for r in rows:
        print(
            f"config {r['config']}: total mean {r['total_mean_ms']:.2f} ms, "
            f"p99 {r['total_p99_ms']:.2f} ms"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multivec",
        description="Multi-vector late-interaction retrieval engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a planted-relevance corpus")
    p.add_argument("--passages", type=int, default=1000)
    p.add_argument("--tokens-per-passage", type=int, default=16)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--queries", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--topics", type=int, default=64)
    p.add_argument("--topics-per-passage", type=int, default=4)
    p.add_argument("--query-terms", type=int, default=8)
    p.add_argument("--within-cos", type=float, default=0.86)
    p.add_argument("--query-cos", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("build-index", help="build an index from an embeddings file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--centroids", type=int, required=True)
    p.add_argument("--m", type=int, default=16, choices=(1, 2, 4, 8, 16, 32))
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rotation", help="optional raw f32 (dim x dim) rotation file")
    p.add_argument("--pq-iters", type=int, default=None)
    p.add_argument("--pq-sample", type=int, default=1 << 20)
    p.set_defaults(func=_cmd_build_index)

    p = sub.add_parser("search", help="run queries, write a TREC run file")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--nprobe", type=int, default=4)
    p.add_argument("--th", type=float, default=0.4)
    p.add_argument("--n-filter", type=int, default=1000)
    p.add_argument("--ndocs", type=int, default=None)
    p.add_argument("--th-r", type=float, default=0.5)
    p.add_argument("--variant", default="vectorized_if")
    p.add_argument("--tag", default="multivec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metrics", default="mrr@10,recall@100,success@5")
    p.set_defaults(func=_cmd_evaluate)

    bench = sub.add_parser("bench", help="benchmark harnesses")
    bsub = bench.add_subparsers(dest="bench_command", required=True)

    p = bsub.add_parser("select", help="threshold-selection kernel variants")
    p.add_argument("--len", type=int, default=262144)
    p.add_argument("--th-grid", default="0.1:0.7:0.1")
    p.add_argument("--variants", default="all")
    p.add_argument("--reps", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_bench_select)

    p = bsub.add_parser("membership", help="stacked vs per-set membership")
    p.add_argument("--num-centroids", type=int, default=1 << 18)
    p.add_argument("--passages", type=int, default=2000)
    p.add_argument("--tokens", type=int, default=32)
    p.add_argument("--close-fraction", type=float, default=0.002)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_bench_membership)

    p = bsub.add_parser("e2e", help="end-to-end latency over a config grid")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--grid", required=True, help="JSON list of SearchConfig overrides")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_bench_e2e)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
