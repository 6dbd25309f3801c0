"""Synthetic index benchmark: build time, query latency, recall vs flat.

Used by the CLI ``bench`` subcommand and by the acceptance suite, so both
measure exactly the same experiment: n unit vectors uniform on the sphere,
``queries`` independent unit-vector queries, flat search as the in-run
oracle for hnsw recall.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .vecstore import IndexConfig, VectorStore


@dataclass
class BenchResult:
    n: int
    dim: int
    kind: str
    k: int
    queries: int
    seed: int
    build_seconds: float
    mean_query_ms: float
    recall_at_k: Optional[float]
    latencies_ms: list[float] = field(default_factory=list)
    sweep: list[dict] = field(default_factory=list)
    store: Optional[VectorStore] = None
    flat_store: Optional[VectorStore] = None
    query_vectors: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "dim": self.dim,
            "k": self.k,
            "queries": self.queries,
            "seed": self.seed,
            "build_seconds": round(self.build_seconds, 3),
            "mean_query_ms": round(self.mean_query_ms, 3),
            "recall_at_k": None if self.recall_at_k is None else round(self.recall_at_k, 4),
        }


def random_unit_vectors(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    vectors = rng.standard_normal((count, dim)).astype(np.float32)
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return vectors


def run_bench(
    n: int,
    dim: int = 512,
    kind: str = "hnsw",
    queries: int = 100,
    k: int = 5,
    seed: int = 0,
    ef_sweep: list[int] | None = None,
    keep_store: bool = False,
) -> BenchResult:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    data = random_unit_vectors(n, dim, rng)
    query_vectors = random_unit_vectors(queries, dim, rng)
    ids = [f"v{i:06d}" for i in range(n)]

    config = IndexConfig(dimension=dim, kind=kind)
    t0 = time.perf_counter()
    store = VectorStore(config)
    for i in range(n):
        store.upsert(ids[i], data[i])
    build_seconds = time.perf_counter() - t0

    flat = store
    if kind == "hnsw":
        flat = VectorStore(IndexConfig(dimension=dim, kind="flat"))
        for i in range(n):
            flat.upsert(ids[i], data[i])
    truth = [[m.id for m in flat.search(q, k)] for q in query_vectors]

    latencies_ms: list[float] = []
    hits = 0
    possible = 0
    for qi, q in enumerate(query_vectors):
        t0 = time.perf_counter()
        results = store.search(q, k)
        latencies_ms.append((time.perf_counter() - t0) * 1000.0)
        hits += len(set(truth[qi]) & {m.id for m in results})
        possible += len(truth[qi])
    recall = hits / possible if possible else 1.0

    sweep_rows: list[dict] = []
    for ef in ef_sweep or []:
        ef_hits = 0
        ef_possible = 0
        t0 = time.perf_counter()
        for qi, q in enumerate(query_vectors):
            results = store.search(q, k, ef_search=ef)
            ef_hits += len(set(truth[qi]) & {m.id for m in results})
            ef_possible += len(truth[qi])
        elapsed_ms = (time.perf_counter() - t0) * 1000.0 / max(1, queries)
        sweep_rows.append(
            {
                "ef_search": ef,
                "recall_at_k": ef_hits / ef_possible if ef_possible else 1.0,
                "mean_query_ms": elapsed_ms,
            }
        )

    return BenchResult(
        n=n,
        dim=dim,
        kind=kind,
        k=k,
        queries=queries,
        seed=seed,
        build_seconds=build_seconds,
        mean_query_ms=float(np.mean(latencies_ms)) if latencies_ms else 0.0,
        recall_at_k=recall if kind == "hnsw" else None,
        latencies_ms=latencies_ms,
        sweep=sweep_rows,
        store=store if keep_store else None,
        flat_store=flat if keep_store and kind == "hnsw" else None,
        query_vectors=query_vectors if keep_store else None,
    )
