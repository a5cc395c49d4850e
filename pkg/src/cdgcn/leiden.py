"""Community detection on weighted speaker graphs.

Greedy optimization of a resolution-scaled quality function through the
classic three phases: queue-driven local moving of single nodes, a
refinement pass that splits communities into well-connected parts, and
aggregation of refined communities into super-nodes, iterated until the
quality stops improving.

For a partition into communities c the quality is

    Q = sum_c ( m_c - gamma * K_c**2 / (4 * m) )

where m_c is the total edge weight inside community c, K_c the summed
weighted degree of its nodes, m the total edge weight of the graph and
gamma the resolution. Degrees, m and m_c are all weighted; self-loops
(from aggregation) count once in m_c and twice in a node's degree. An
edgeless graph has Q defined as 0.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graphs import SpeakerGraph

#: Quality gains at or below this threshold are treated as noise.
GAIN_TOLERANCE = 1e-12


@dataclass
class LeidenConfig:
    gamma: float = 0.6
    seed: int = 0
    max_iterations: int = 100
    theta: float = 0.0
    restarts: int = 4

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass
class Partition:
    """Node-to-community assignment with per-community bookkeeping.

    labels are contiguous in 0..C-1 with no empty community.
    internal_weight[c] caches m_c, community_degree[c] caches K_c.
    """

    labels: np.ndarray
    internal_weight: np.ndarray
    community_degree: np.ndarray
    total_edges: int
    total_weight: float

    @property
    def community_count(self) -> int:
        return len(self.internal_weight)

    @classmethod
    def from_labels(cls, graph: SpeakerGraph, labels) -> "Partition":
        """Build a partition from arbitrary labels, compacting them to
        0..C-1 by first appearance and recomputing the caches from scratch."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (graph.node_count,):
            raise ValueError(
                f"{labels.size} labels do not cover a graph of {graph.node_count} nodes"
            )
        seen: dict[int, int] = {}
        compact = np.empty_like(labels)
        for i, lab in enumerate(labels.tolist()):
            compact[i] = seen.setdefault(lab, len(seen))
        c = len(seen)
        internal = np.zeros(c)
        for i, j, w in graph.edges():
            if compact[i] == compact[j]:
                internal[compact[i]] += w
        if c:
            internal += np.bincount(compact, weights=graph.self_loops, minlength=c)
        degree = np.bincount(compact, weights=graph.weighted_degrees(), minlength=c)
        return cls(compact, internal, degree, graph.edge_count, graph.total_weight())


def quality(graph: SpeakerGraph, partition: Partition, gamma: float) -> float:
    """Evaluate Q from scratch (independent of the partition's caches)."""
    labels = partition.labels
    if labels.shape != (graph.node_count,):
        raise ValueError("partition does not cover the graph")
    m = graph.total_weight()
    if m == 0.0:
        return 0.0
    c = int(labels.max()) + 1 if labels.size else 0
    internal = np.zeros(c)
    for i, j, w in graph.edges():
        if labels[i] == labels[j]:
            internal[labels[i]] += w
    if c:
        internal += np.bincount(labels, weights=graph.self_loops, minlength=c)
    degree = np.bincount(labels, weights=graph.weighted_degrees(), minlength=c)
    return float(internal.sum() - gamma * np.sum(degree**2) / (4.0 * m))


def singleton_partition(graph: SpeakerGraph) -> Partition:
    """One community per node; m_c is the node's self-loop (zero on plain graphs)."""
    n = graph.node_count
    return Partition(
        labels=np.arange(n, dtype=np.int64),
        internal_weight=graph.self_loops.copy(),
        community_degree=graph.weighted_degrees(),
        total_edges=graph.edge_count,
        total_weight=graph.total_weight(),
    )


def local_move(graph: SpeakerGraph, partition: Partition, gamma: float, seed: int = 0) -> Partition:
    """Queue-driven single-node moves to the neighboring community (or a
    fresh singleton) with maximal quality gain.

    Nodes start queued in seeded random order; an accepted move re-queues
    the moved node's neighbors outside its new community. Gains must
    exceed GAIN_TOLERANCE, so the quality is non-decreasing and the queue
    drains in finite time. Ties go to the smallest community label, with a
    fresh singleton considered last. Labels are compacted on return.
    """
    n = graph.node_count
    if n == 0:
        return partition
    m = graph.total_weight()
    if m == 0.0:
        return Partition.from_labels(graph, partition.labels)

    labels = partition.labels.copy()
    k = graph.weighted_degrees()
    loops = graph.self_loops
    # Community slots: at most n communities can be live at any point.
    comm_degree = np.zeros(n)
    comm_internal = np.zeros(n)
    c = partition.community_count
    comm_degree[:c] = partition.community_degree
    comm_internal[:c] = partition.internal_weight
    comm_size = np.bincount(labels, minlength=n)
    free_ids: list[int] = []
    next_fresh = c

    rng = np.random.default_rng(seed)
    queue = deque(int(i) for i in rng.permutation(n))
    in_queue = np.ones(n, dtype=bool)

    while queue:
        i = queue.popleft()
        in_queue[i] = False
        a = int(labels[i])
        w_to: dict[int, float] = {}
        for j, w in graph.neighbors(i):
            lbl = int(labels[j])
            w_to[lbl] = w_to.get(lbl, 0.0) + w
        k_i = k[i]
        # Gain of staying relative to sitting alone in an empty community.
        stay = w_to.get(a, 0.0) - gamma * k_i * (comm_degree[a] - k_i) / (2.0 * m)
        best_gain = 0.0
        best_comm = None
        for cand in sorted(w_to):
            if cand == a:
                continue
            gain = w_to[cand] - gamma * k_i * comm_degree[cand] / (2.0 * m) - stay
            if gain > best_gain:
                best_gain = gain
                best_comm = cand
        if -stay > best_gain and comm_size[a] > 1:
            best_gain = -stay
            best_comm = -1  # fresh singleton
        if best_comm is None or best_gain <= GAIN_TOLERANCE:
            continue
        if best_comm == -1:
            if free_ids:
                best_comm = heapq.heappop(free_ids)
            else:
                best_comm = next_fresh
                next_fresh += 1
        comm_internal[a] -= w_to.get(a, 0.0) + loops[i]
        comm_degree[a] -= k_i
        comm_size[a] -= 1
        if comm_size[a] == 0:
            comm_internal[a] = 0.0
            comm_degree[a] = 0.0
            heapq.heappush(free_ids, a)
        comm_internal[best_comm] += w_to.get(best_comm, 0.0) + loops[i]
        comm_degree[best_comm] += k_i
        comm_size[best_comm] += 1
        labels[i] = best_comm
        for j, _ in graph.neighbors(i):
            if labels[j] != best_comm and not in_queue[j]:
                queue.append(int(j))
                in_queue[j] = True

    return Partition.from_labels(graph, labels)


def refine_partition(graph: SpeakerGraph, partition: Partition, gamma: float,
                     seed: int = 0, theta: float = 0.0) -> Partition:
    """Split each community into well-connected sub-communities.

    Starts from singletons and only merges nodes into sub-communities of
    their own original community, so the result always refines the input.
    A node is only merged while still alone, and only when both it and the
    target are well connected inside the original community. theta = 0
    merges greedily into the best-gain target; theta > 0 samples targets
    with probability proportional to exp(gain / theta) among non-negative
    gains.
    """
    n = graph.node_count
    m = graph.total_weight()
    if n == 0 or m == 0.0:
        return singleton_partition(graph)

    parent = partition.labels
    k = graph.weighted_degrees()
    loops = graph.self_loops
    ref_labels = np.arange(n, dtype=np.int64)
    ref_degree = k.astype(np.float64).copy()
    ref_internal = loops.copy()
    ref_size = np.ones(n, dtype=np.int64)
    # Edge weight from each refined community to the rest of its parent.
    cross = np.zeros(n)

    rng = np.random.default_rng(seed)
    two_m = 2.0 * m

    for comm in range(partition.community_count):
        members = np.flatnonzero(parent == comm)
        if members.size < 2:
            continue
        k_total = partition.community_degree[comm]
        for v in members:
            cross[v] = sum(w for j, w in graph.neighbors(int(v)) if parent[j] == comm)
        for v in rng.permutation(members):
            v = int(v)
            own = int(ref_labels[v])
            if ref_size[own] > 1:
                continue
            if cross[v] < gamma * k[v] * (k_total - k[v]) / two_m:
                continue
            w_to: dict[int, float] = {}
            for j, w in graph.neighbors(v):
                if parent[j] == comm:
                    lbl = int(ref_labels[j])
                    if lbl != own:
                        w_to[lbl] = w_to.get(lbl, 0.0) + w
            candidates = []
            for cand in sorted(w_to):
                if cross[cand] < gamma * ref_degree[cand] * (k_total - ref_degree[cand]) / two_m:
                    continue
                gain = w_to[cand] - gamma * k[v] * ref_degree[cand] / two_m
                candidates.append((cand, gain))
            target = None
            if theta == 0.0:
                best_gain = GAIN_TOLERANCE
                for cand, gain in candidates:
                    if gain > best_gain:
                        best_gain = gain
                        target = cand
            else:
                keep = [(cand, gain) for cand, gain in candidates if gain >= 0.0]
                if keep:
                    gains = np.array([g for _, g in keep])
                    weights = np.exp((gains - gains.max()) / theta)
                    # Staying put competes with gain zero.
                    stay_weight = np.exp((0.0 - gains.max()) / theta)
                    total = weights.sum() + stay_weight
                    pick = rng.uniform(0.0, total)
                    acc = 0.0
                    for (cand, _), wgt in zip(keep, weights):
                        acc += wgt
                        if pick < acc:
                            target = cand
                            break
            if target is None:
                continue
            ref_internal[target] += w_to[target] + loops[v]
            ref_degree[target] += k[v]
            cross[target] += cross[v] - 2.0 * w_to[target]
            ref_size[target] += 1
            ref_size[own] = 0
            ref_labels[v] = target

    return Partition.from_labels(graph, ref_labels)


def aggregate_graph(graph: SpeakerGraph, refined: Partition):
    """Collapse each refined community into one super-node.

    Cross-community weights accumulate into single edges; intra-community
    weights (plus pre-existing self-loops) accumulate on the new node's
    self-loop, so the total weighted degree is conserved exactly. Returns
    the aggregated graph and the refined-community -> new-node mapping.
    """
    labels = refined.labels
    c = refined.community_count
    loops = np.zeros(c)
    if c:
        loops += np.bincount(labels, weights=graph.self_loops, minlength=c)
    acc: dict[tuple[int, int], float] = {}
    for i, j, w in graph.edges():
        a, b = int(labels[i]), int(labels[j])
        if a == b:
            loops[a] += w
        else:
            key = (a, b) if a < b else (b, a)
            acc[key] = acc.get(key, 0.0) + w
    agg = SpeakerGraph(c, self_loops=loops)
    for (a, b), w in sorted(acc.items()):
        agg.add_edge(a, b, w)
    mapping = np.arange(c, dtype=np.int64)
    return agg, mapping


def _hierarchy_pass(graph: SpeakerGraph, flat_labels: np.ndarray, gamma: float,
                    rng, theta: float) -> np.ndarray:
    """One local-move / refine / aggregate cascade, starting from the given
    flat partition and climbing levels until aggregation stops shrinking.

    The partition of each aggregated graph starts from the communities the
    merged nodes held before refinement, not from singletons. Returns the
    resulting flat labels on the original node set.
    """
    level_graph = graph
    level_partition = Partition.from_labels(graph, flat_labels)
    node_map = np.arange(graph.node_count, dtype=np.int64)
    while True:
        move_seed = int(rng.integers(2**32))
        refine_seed = int(rng.integers(2**32))
        level_partition = local_move(level_graph, level_partition, gamma, move_seed)
        refined = refine_partition(level_graph, level_partition, gamma, refine_seed, theta)
        if refined.community_count == level_graph.node_count:
            # Aggregation would be the identity; this level has converged.
            break
        # Each refined community becomes a node that inherits the community
        # its members held before refinement.
        first_member = np.unique(refined.labels, return_index=True)[1]
        lifted = level_partition.labels[first_member]
        level_graph, mapping = aggregate_graph(level_graph, refined)
        node_map = mapping[refined.labels[node_map]]
        level_partition = Partition.from_labels(level_graph, lifted)
    return level_partition.labels[node_map]


def leiden(graph: SpeakerGraph, config: LeidenConfig | None = None) -> Partition:
    """Full community-detection loop, reported on the original node set.

    Each iteration runs the local-move / refine / aggregate cascade and
    then restarts it from the resulting flat partition, so individual
    nodes get fresh chances to move after coarse-level rearrangements;
    iterating stops when an iteration improves Q by less than
    GAIN_TOLERANCE or after max_iterations. Because greedy moving can
    settle in a local optimum, the whole climb is repeated from
    singletons `restarts` times with fresh seeded orders and the best
    partition wins. Deterministic given the seed.
    """
    if config is None:
        config = LeidenConfig()
    if graph.node_count == 0:
        raise ValueError("graph needs at least one node")

    rng = np.random.default_rng(config.seed)
    best_labels = None
    best_q = -np.inf
    for _ in range(config.restarts):
        flat = np.arange(graph.node_count, dtype=np.int64)
        prev_q = -np.inf
        for _ in range(config.max_iterations):
            flat = _hierarchy_pass(graph, flat, config.gamma, rng, config.theta)
            q = quality(graph, Partition.from_labels(graph, flat), config.gamma)
            if q - prev_q < GAIN_TOLERANCE:
                break
            prev_q = q
        if q > best_q:
            best_q = q
            best_labels = flat
    return Partition.from_labels(graph, best_labels)
