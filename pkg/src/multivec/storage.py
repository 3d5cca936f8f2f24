"""Binary persistence: token-embedding files and the index directory.

Everything on disk is little-endian. The embeddings file is:

    magic  b"MVEC" | version u32 | dim u32 | n_passages u32
    token counts   n_passages * u32
    embeddings     total_tokens * dim * f32, row-major, corpus order

The index directory holds ``meta.json`` plus raw arrays:

    centroids.f32   row-major (num_centroids, dim)
    ivf.bin         per-centroid list length (u32) then that list's ids (u32)
    token_cids.u32  one closest-centroid id per token, corpus order
    pq_codes.u8     token-major, m bytes per token
    offsets.u64     passage id -> token range prefix array (n_passages + 1)
    codebook.f32    row-major (m, 256, sub_dim)
    rotation.f32    optional row-major (dim, dim)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import (
    CentroidIndex,
    CompressedCorpus,
    Index,
    PQCodebook,
    TokenEmbeddingCollection,
)

EMBEDDINGS_MAGIC = b"MVEC"
EMBEDDINGS_VERSION = 1
INDEX_VERSION = 1
_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """Raised for malformed or truncated binary inputs."""


def write_embeddings(path: str | Path, coll: TokenEmbeddingCollection) -> None:
    tokens, offsets = coll.stacked()
    counts = np.diff(offsets).astype("<u4")
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(
                EMBEDDINGS_MAGIC, EMBEDDINGS_VERSION, coll.dim, coll.num_passages
            )
        )
        f.write(counts.tobytes())
        f.write(np.ascontiguousarray(tokens, dtype="<f4").tobytes())


def load_embeddings(
    path: str | Path, expected_dim: int | None = None
) -> TokenEmbeddingCollection:
    """Read and validate a token-embedding file."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, dim, n_passages = _HEADER.unpack_from(raw)
    if magic != EMBEDDINGS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != EMBEDDINGS_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if n_passages == 0:
        raise FormatError(f"{path}: empty corpus")
    if expected_dim is not None and dim != expected_dim:
        raise FormatError(f"{path}: dim {dim}, expected {expected_dim}")
    counts_end = _HEADER.size + 4 * n_passages
    if len(raw) < counts_end:
        raise FormatError(f"{path}: truncated passage counts")
    counts = np.frombuffer(raw, dtype="<u4", count=n_passages, offset=_HEADER.size)
    total = int(counts.sum())
    expected_size = counts_end + 4 * total * dim
    if len(raw) != expected_size:
        raise FormatError(
            f"{path}: expected {expected_size} bytes for {total} tokens, "
            f"got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f4", count=total * dim, offset=counts_end)
    tokens = flat.reshape(total, dim).astype(np.float32)
    offsets = np.zeros(n_passages + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    passages = [tokens[offsets[i] : offsets[i + 1]] for i in range(n_passages)]
    return TokenEmbeddingCollection(dim=dim, passages=passages, total_tokens=total)


def _write_raw(path: Path, arr: np.ndarray, dtype: str) -> None:
    path.write_bytes(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def save_index(out_dir: str | Path, index: Index) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ci, corpus = index.centroid_index, index.corpus
    meta = {
        "dim": index.dim,
        "m": corpus.pq.m,
        "num_centroids": ci.num_centroids,
        "num_passages": corpus.num_passages,
        "total_tokens": corpus.total_tokens,
        "version": INDEX_VERSION,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    _write_raw(out / "centroids.f32", ci.centroids, "<f4")
    with open(out / "ivf.bin", "wb") as f:
        lengths = np.array([len(l) for l in ci.inverted_lists], dtype="<u4")
        f.write(lengths.tobytes())
        for lst in ci.inverted_lists:
            f.write(np.ascontiguousarray(lst, dtype="<u4").tobytes())
    _write_raw(out / "token_cids.u32", corpus.token_centroid_ids, "<u4")
    _write_raw(out / "pq_codes.u8", corpus.pq_codes, "u1")
    _write_raw(out / "offsets.u64", corpus.passage_offsets, "<u8")
    _write_raw(out / "codebook.f32", corpus.pq.codewords, "<f4")
    if corpus.pq.rotation is not None:
        _write_raw(out / "rotation.f32", corpus.pq.rotation, "<f4")


def load_index(in_dir: str | Path) -> Index:
    src = Path(in_dir)
    meta = json.loads((src / "meta.json").read_text())
    if meta["version"] != INDEX_VERSION:
        raise FormatError(f"unsupported index version {meta['version']}")
    dim, m = meta["dim"], meta["m"]
    n_c, n_p, total = meta["num_centroids"], meta["num_passages"], meta["total_tokens"]

    centroids = _read_raw(src / "centroids.f32", "<f4", n_c * dim).reshape(n_c, dim)
    ivf_raw = np.frombuffer((src / "ivf.bin").read_bytes(), dtype="<u4")
    lengths = ivf_raw[:n_c].astype(np.int64)
    if lengths.sum() + n_c != ivf_raw.shape[0]:
        raise FormatError("ivf.bin size does not match its list lengths")
    bounds = np.zeros(n_c + 1, dtype=np.int64)
    np.cumsum(lengths, out=bounds[1:])
    body = ivf_raw[n_c:]
    inverted = [
        body[bounds[c] : bounds[c + 1]].astype(np.uint32) for c in range(n_c)
    ]

    token_cids = _read_raw(src / "token_cids.u32", "<u4", total)
    pq_codes = _read_raw(src / "pq_codes.u8", "u1", total * m).reshape(total, m)
    offsets = _read_raw(src / "offsets.u64", "<u8", n_p + 1)
    if dim % m != 0:
        raise FormatError(f"dim {dim} not divisible by m {m}")
    sub = dim // m
    codewords = _read_raw(src / "codebook.f32", "<f4", m * 256 * sub).reshape(
        m, 256, sub
    )
    rotation = None
    rot_path = src / "rotation.f32"
    if rot_path.exists():
        rotation = _read_raw(rot_path, "<f4", dim * dim).reshape(dim, dim)
    pq = PQCodebook(codewords=codewords, rotation=rotation)
    corpus = CompressedCorpus(
        token_centroid_ids=token_cids,
        pq_codes=pq_codes,
        passage_offsets=offsets,
        pq=pq,
    )
    return Index(
        centroid_index=CentroidIndex(centroids=centroids, inverted_lists=inverted),
        corpus=corpus,
    )


def _read_raw(path: Path, dtype: str, count: int) -> np.ndarray:
    raw = path.read_bytes()
    arr = np.frombuffer(raw, dtype=dtype)
    if arr.shape[0] != count:
        raise FormatError(f"{path}: expected {count} items, got {arr.shape[0]}")
    return arr.copy()


def index_bytes_per_token(in_dir: str | Path) -> float:
    """On-disk bytes per token embedding, excluding fixed overheads.

    Counts only the per-token payload files (centroid ids and PQ codes);
    centroids, codebook, offsets and metadata amortize to zero at scale.
    """
    src = Path(in_dir)
    meta = json.loads((src / "meta.json").read_text())
    payload = (src / "token_cids.u32").stat().st_size + (
        src / "pq_codes.u8"
    ).stat().st_size
    return payload / meta["total_tokens"]


def load_queries(path: str | Path, expected_dim: int | None = None):
    """Read a query file (same embedding format) into QueryMatrix objects."""
    from .model import QueryMatrix

    coll = load_embeddings(path, expected_dim=expected_dim)
    return [QueryMatrix.from_embeddings(p) for p in coll.passages]


__all__ = [
    "FormatError",
    "write_embeddings",
    "load_embeddings",
    "load_queries",
    "save_index",
    "load_index",
    "index_bytes_per_token",
]
