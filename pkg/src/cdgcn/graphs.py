"""Affinity graphs over speech-segment embeddings.

Everything downstream (linkage refinement, community detection, overlap
assignment) runs on the structures built here: the dense cosine affinity
matrix, the union-of-top-k sparsified graph, pivot-centered sub-graphs for
the linkage predictor, and the max-merge of refined sub-graph edges.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EMBEDDING_MAGIC = b"EMB1"


@dataclass
class EmbeddingSet:
    """Per-segment speaker embeddings with their timestamps.

    vectors: (N, D) float array, one row per speech segment.
    segments: (N, 2) float array of (start_seconds, duration_seconds).
    """

    vectors: np.ndarray
    segments: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.segments = np.asarray(self.segments, dtype=np.float64).reshape(-1, 2)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        if self.segments.shape[0] != self.vectors.shape[0]:
            raise ValueError(
                f"{self.segments.shape[0]} segments do not match "
                f"{self.vectors.shape[0]} embedding rows"
            )
        starts = self.segments[:, 0]
        durations = self.segments[:, 1]
        if starts.size:
            if (starts < 0).any() or (durations <= 0).any():
                raise ValueError("segments need start >= 0 and duration > 0")
            if (np.diff(starts) < 0).any():
                raise ValueError("segment start times must be non-decreasing")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def write_embeddings(path, emb: EmbeddingSet) -> None:
    """Serialize an EmbeddingSet (vectors as float32, timestamps as float64)."""
    header = struct.pack("<4sII", EMBEDDING_MAGIC, emb.count, emb.dim)
    body = emb.vectors.astype("<f4").tobytes() + emb.segments.astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_embeddings(path) -> EmbeddingSet:
    """Load an embedding file written by :func:`write_embeddings`."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ValueError(f"{path}: truncated embedding file")
    magic, n, d = struct.unpack_from("<4sII", data, 0)
    if magic != EMBEDDING_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {EMBEDDING_MAGIC!r}")
    expected = 12 + n * d * 4 + n * 16
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    vectors = np.frombuffer(data, dtype="<f4", count=n * d, offset=12).reshape(n, d)
    segments = np.frombuffer(data, dtype="<f8", count=n * 2, offset=12 + n * d * 4)
    return EmbeddingSet(vectors.astype(np.float64), segments.reshape(n, 2).copy())


def cosine_affinity(emb: EmbeddingSet) -> np.ndarray:
    """Dense cosine similarity between all segment pairs.

    Returns an (N, N) matrix that is exactly symmetric with a unit
    diagonal and values clipped to [-1, 1]. Zero-norm rows are rejected
    because cosine similarity is undefined for them.
    """
    norms = np.linalg.norm(emb.vectors, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ValueError(f"segment {bad[0]} has a zero-norm embedding")
    unit = emb.vectors / norms[:, None]
    scores = unit @ unit.T
    scores = np.clip((scores + scores.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(scores, 1.0)
    return scores


class SpeakerGraph:
    """Weighted undirected graph over segment nodes.

    Pair edges are stored per node for O(1) weight lookup. Self-loops only
    appear on aggregated graphs and live in a separate array, so ordinary
    graphs stay loop-free; a self-loop counts twice in a node's weighted
    degree.
    """

    def __init__(self, node_count: int, self_loops=None):
        if node_count < 0:
            raise ValueError("node_count must be non-negative")
        self.node_count = node_count
        self._adj: list[dict[int, float]] = [{} for _ in range(node_count)]
        self._edge_count = 0
        if self_loops is None:
            self.self_loops = np.zeros(node_count)
        else:
            self.self_loops = np.asarray(self_loops, dtype=np.float64).copy()
            if self.self_loops.shape != (node_count,):
                raise ValueError("self_loops must have one entry per node")

    @classmethod
    def from_edges(cls, node_count: int, edges) -> "SpeakerGraph":
        g = cls(node_count)
        for i, j, w in edges:
            g.add_edge(i, j, w)
        return g

    def add_edge(self, i: int, j: int, weight: float) -> None:
        if i == j:
            raise ValueError(f"self-loop on node {i} not allowed as a pair edge")
        if not (0 <= i < self.node_count and 0 <= j < self.node_count):
            raise ValueError(f"edge ({i}, {j}) outside graph of {self.node_count} nodes")
        if j not in self._adj[i]:
            self._edge_count += 1
        self._adj[i][j] = float(weight)
        self._adj[j][i] = float(weight)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self._adj[i]

    def edge_weight(self, i: int, j: int, default: float = 0.0) -> float:
        return self._adj[i].get(j, default)

    def neighbors(self, i: int):
        """(neighbor, weight) pairs in insertion order."""
        return self._adj[i].items()

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def edges(self):
        """Yield (i, j, weight) once per pair edge with i < j."""
        for i, nbrs in enumerate(self._adj):
            for j, w in nbrs.items():
                if i < j:
                    yield i, j, w

    @property
    def edge_count(self) -> int:
        return self._edge_count

    def weighted_degrees(self) -> np.ndarray:
        k = 2.0 * self.self_loops
        for i, nbrs in enumerate(self._adj):
            k[i] += sum(nbrs.values())
        return k

    def total_weight(self) -> float:
        pair = sum(w for _, _, w in self.edges())
        return float(pair + self.self_loops.sum())

    def edge_dict(self) -> dict[tuple[int, int], float]:
        return {(i, j): w for i, j, w in self.edges()}


def _top_neighbors(aff: np.ndarray, node: int, k: int) -> np.ndarray:
    """Indices of the top-k affinities of `node`, ties going to lower ids."""
    row = aff[node].copy()
    row[node] = -np.inf
    order = np.lexsort((np.arange(row.size), -row))
    return order[:k]


def knn_graph(aff: np.ndarray, k: int) -> SpeakerGraph:
    """Sparsify an affinity matrix to the union-of-top-k neighbor graph.

    An edge (i, j) survives when j ranks among i's top-k affinities or i
    among j's; its weight is the raw (signed) affinity. k is clamped to
    N - 1, so k = N - 1 reproduces the full graph minus the diagonal.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = aff.shape[0]
    g = SpeakerGraph(n)
    if n <= 1:
        return g
    k_eff = min(k, n - 1)
    for i in range(n):
        for j in _top_neighbors(aff, i, k_eff):
            g.add_edge(i, int(j), aff[i, j])
    return g


@dataclass
class SubGraph:
    """Pivot-centered local graph fed to the linkage predictor.

    members lists the pivot first, then its nearest neighbors. features
    holds the member embeddings with the pivot's embedding subtracted
    (row 0 is therefore zero); adjacency is the members' pairwise affinity
    clamped at zero with a zero diagonal.
    """

    pivot: int
    members: np.ndarray
    features: np.ndarray
    adjacency: np.ndarray

    @property
    def neighbor_count(self) -> int:
        return len(self.members) - 1


def build_subgraph(aff: np.ndarray, emb: EmbeddingSet, pivot: int, k: int) -> SubGraph:
    """Build the sub-graph of `pivot` and its top-min(k, N-1) neighbors."""
    n = aff.shape[0]
    if not 0 <= pivot < n:
        raise ValueError(f"pivot {pivot} outside graph of {n} nodes")
    if k < 1:
        raise ValueError("k must be >= 1")
    neighbors = _top_neighbors(aff, pivot, min(k, n - 1))
    members = np.concatenate(([pivot], neighbors)).astype(np.int64)
    features = emb.vectors[members] - emb.vectors[pivot]
    adjacency = np.maximum(aff[np.ix_(members, members)], 0.0)
    np.fill_diagonal(adjacency, 0.0)
    return SubGraph(pivot=pivot, members=members, features=features, adjacency=adjacency)


def merge_subgraphs(refined, node_count: int) -> SpeakerGraph:
    """Combine per-pivot linkage probabilities into one refined graph.

    refined: iterable of (pivot, neighbor ids, edge probabilities), one
    entry per sub-graph. A pair predicted by several sub-graphs keeps its
    largest probability. Probabilities must lie in [0, 1].
    """
    g = SpeakerGraph(node_count)
    for pivot, neighbors, probs in refined:
        probs = np.asarray(probs, dtype=np.float64)
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise ValueError(f"sub-graph of pivot {pivot}: edge probability outside [0, 1]")
        for j, p in zip(neighbors, probs):
            j = int(j)
            a, b = (pivot, j) if pivot < j else (j, pivot)
            current = g.edge_weight(a, b, default=-1.0)
            if p > current:
                g.add_edge(a, b, p)
    return g
