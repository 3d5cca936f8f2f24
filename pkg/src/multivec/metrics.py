"""Retrieval quality metrics and TREC-style run/qrels IO.

A run maps qid -> ranked passage ids (best first). Qrels map qid -> the
set of relevant passage ids (grade > 0). All ids are strings so real
qrels files plug in unchanged.
"""

from __future__ import annotations

import warnings
from pathlib import Path

Run = dict[str, list[str]]
Qrels = dict[str, set[str]]


def write_run(path: str | Path, run: dict[str, list[tuple[str, float]]], tag: str = "multivec") -> None:
    """Write ranked (pid, score) lists in TREC run format."""
    with open(path, "w") as f:
        for qid, ranked in run.items():
            for rank, (pid, score) in enumerate(ranked, start=1):
                f.write(f"{qid}\tQ0\t{pid}\t{rank}\t{score:.6f}\t{tag}\n")


def read_run(path: str | Path) -> Run:
    by_query: dict[str, list[tuple[int, str]]] = {}
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            qid, _, pid, rank = parts[0], parts[1], parts[2], int(parts[3])
            by_query.setdefault(qid, []).append((rank, pid))
    return {
        qid: [pid for _, pid in sorted(pairs)] for qid, pairs in by_query.items()
    }


def read_qrels(path: str | Path) -> Qrels:
    """TSV rows ``qid <tab> pid <tab> grade``; grade > 0 marks relevance."""
    qrels: Qrels = {}
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            qid, pid, grade = parts[0], parts[1], int(parts[2])
            if grade > 0:
                qrels.setdefault(qid, set()).add(pid)
    return qrels


def _judged_queries(run: Run, qrels: Qrels) -> list[str]:
    judged = []
    for qid in run:
        if qid in qrels:
            judged.append(qid)
        else:
            warnings.warn(f"query {qid} missing from qrels; skipped", stacklevel=3)
    return judged


def mrr_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Mean reciprocal rank of the first relevant passage within top-k."""
    judged = _judged_queries(run, qrels)
    if not judged:
        return 0.0
    total = 0.0
    for qid in judged:
        relevant = qrels[qid]
        for rank, pid in enumerate(run[qid][:k], start=1):
            if pid in relevant:
                total += 1.0 / rank
                break
    return total / len(judged)


def recall_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Mean fraction of each query's relevant passages found in top-k."""
    judged = _judged_queries(run, qrels)
    if not judged:
        return 0.0
    total = 0.0
    for qid in judged:
        relevant = qrels[qid]
        hits = sum(1 for pid in run[qid][:k] if pid in relevant)
        total += hits / len(relevant)
    return total / len(judged)


def success_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Fraction of queries with at least one relevant passage in top-k."""
    judged = _judged_queries(run, qrels)
    if not judged:
        return 0.0
    hits = sum(
        1 for qid in judged if any(pid in qrels[qid] for pid in run[qid][:k])
    )
    return hits / len(judged)
