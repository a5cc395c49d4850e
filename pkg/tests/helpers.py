"""Independent oracles and fixture generators shared by the tests."""

import numpy as np

from cdgcn.gcn import GcnWeights
from cdgcn.graphs import SpeakerGraph


def random_gcn_weights(rng, feature_dim, num_layers=2, hidden_dim=None, scale=0.5):
    """Fully random weights (biases included) at a generic point, so ReLU
    pre-activations never sit exactly on the kink during gradient checks."""
    hidden = feature_dim if hidden_dim is None else hidden_dim
    layers = [rng.normal(scale=scale, size=(2 * feature_dim, feature_dim))
              for _ in range(num_layers)]
    w1 = rng.normal(scale=scale, size=(feature_dim, hidden))
    w2 = rng.normal(scale=scale, size=(hidden, 2))
    b1 = rng.normal(scale=scale, size=hidden)
    b2 = rng.normal(scale=scale, size=2)
    return GcnWeights(layers, (w1, w2), (b1, b2))


def graph_from_matrix(weight: np.ndarray) -> SpeakerGraph:
    n = weight.shape[0]
    g = SpeakerGraph(n)
    for i in range(n):
        for j in range(i + 1, n):
            if weight[i, j] != 0.0:
                g.add_edge(i, j, weight[i, j])
    return g


def matrix_from_graph(g: SpeakerGraph) -> np.ndarray:
    a = np.zeros((g.node_count, g.node_count))
    for i, j, w in g.edges():
        a[i, j] = a[j, i] = w
    return a


def quality_of_blocks(weight: np.ndarray, blocks, gamma: float) -> float:
    """Direct evaluation of the quality function for an explicit partition."""
    k = weight.sum(axis=1)
    m = weight.sum() / 2.0
    if m == 0.0:
        return 0.0
    q = 0.0
    for block in blocks:
        block = list(block)
        q += weight[np.ix_(block, block)].sum() / 2.0 - gamma * k[block].sum() ** 2 / (4.0 * m)
    return q


def best_partition(weight: np.ndarray, gamma: float):
    """Exhaustively enumerate all set partitions; return (max Q, argmax blocks).

    Block statistics are maintained incrementally during the recursion, so
    graphs up to ~10 nodes enumerate in well under a second.
    """
    n = weight.shape[0]
    w = [[float(weight[i, j]) for j in range(n)] for i in range(n)]
    k = [sum(row) for row in w]
    m = sum(k) / 2.0
    if m == 0.0:
        return 0.0, [[i] for i in range(n)]
    best_q = [-np.inf]
    best_blocks = [None]
    blocks, degrees, internal = [], [], []

    def place(i):
        if i == n:
            q = sum(mb - gamma * kb * kb / (4.0 * m) for kb, mb in zip(degrees, internal))
            if q > best_q[0]:
                best_q[0] = q
                best_blocks[0] = [list(b) for b in blocks]
            return
        for b in range(len(blocks)):
            added = sum(w[i][j] for j in blocks[b])
            blocks[b].append(i)
            degrees[b] += k[i]
            internal[b] += added
            place(i + 1)
            blocks[b].pop()
            degrees[b] -= k[i]
            internal[b] -= added
        blocks.append([i])
        degrees.append(k[i])
        internal.append(0.0)
        place(i + 1)
        blocks.pop()
        degrees.pop()
        internal.pop()

    place(0)
    return best_q[0], best_blocks[0]


def clique_pair_graph(size: int) -> SpeakerGraph:
    """Two unit-weight cliques of `size` nodes joined by a single bridge."""
    n = 2 * size
    g = SpeakerGraph(n)
    for group in (range(size), range(size, n)):
        group = list(group)
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                g.add_edge(group[a], group[b], 1.0)
    g.add_edge(size - 1, size, 1.0)
    return g


def random_weight_matrix(rng, planted: bool, n: int | None = None) -> np.ndarray:
    """Random symmetric weight matrix, either with two planted groups or
    Erdos-Renyi with uniform weights."""
    if n is None:
        n = int(rng.integers(4, 9))
    if planted:
        labels = rng.integers(0, 2, n)
        a = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                same = labels[i] == labels[j]
                if rng.random() < (0.9 if same else 0.25):
                    a[i, j] = a[j, i] = rng.uniform(0.3, 1.0) if same else rng.uniform(0.05, 0.4)
    else:
        a = np.triu((rng.random((n, n)) < 0.6) * rng.uniform(0.05, 1.0, (n, n)), 1)
        a = a + a.T
    return a


def random_fixture_graphs(fixture_seed: int, count: int):
    """The frozen random-graph corpus: alternating planted and ER matrices."""
    rng = np.random.default_rng(fixture_seed)
    return [random_weight_matrix(rng, planted=(t % 2 == 0)) for t in range(count)]
