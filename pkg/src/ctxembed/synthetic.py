"""Synthetic graphs and small fixtures used by tests, scripts and ``verify``."""

from __future__ import annotations

import numpy as np

from .graph import Graph


def erdos_renyi(n: int, p: float, seed=0, directed=False, connected=True) -> Graph:
    """G(n, p); with ``connected`` the seed is advanced until no node is isolated
    and the graph has a single component."""
    from scipy.sparse.csgraph import connected_components

    for attempt in range(1000):
        rng = np.random.default_rng([seed, attempt])
        mask = rng.random((n, n)) < p
        np.fill_diagonal(mask, False)
        if not directed:
            mask = np.triu(mask)
        src, dst = np.nonzero(mask)
        g = Graph.from_edges(n, src, dst, directed)
        if not connected:
            return g
        k, _ = connected_components(g.adjacency(), directed=True, connection="weak")
        if k == 1 and (not directed or len(g.dangling_nodes()) == 0):
            return g
    raise RuntimeError("could not draw a connected graph; raise p")


def layered_dag(sizes=(70, 70, 60), groups=4, p_in=0.4, p_out=0.01, seed=0) -> Graph:
    """Directed block DAG: layer l links only to layer l + 1.

    Nodes of each layer are split into ``groups`` blocks; block g of one
    layer links to block g of the next with probability ``p_in`` and to
    other blocks with ``p_out``. Every node in a non-final layer gets at
    least two children and every node in a non-first layer at least two
    parents, so link-prediction splits can keep all nodes attached. The
    graph has zero reciprocity and zero directed transitivity.
    """
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    block = [rng.permutation(s) % groups for s in sizes]
    src, dst = [], []
    for layer in range(len(sizes) - 1):
        a = np.arange(offsets[layer], offsets[layer + 1])
        b = np.arange(offsets[layer + 1], offsets[layer + 2])
        same = block[layer][:, None] == block[layer + 1][None, :]
        mask = rng.random((len(a), len(b))) < np.where(same, p_in, p_out)
        for i in range(len(a)):
            while mask[i].sum() < 2:
                mask[i, rng.choice(np.flatnonzero(same[i]))] = True
        for j in range(len(b)):
            while mask[:, j].sum() < 2:
                mask[rng.choice(np.flatnonzero(same[:, j])), j] = True
        i, j = np.nonzero(mask)
        src.append(a[i])
        dst.append(b[j])
    return Graph.from_edges(n, np.concatenate(src), np.concatenate(dst), directed=True)


def two_cliques(k=4) -> Graph:
    """Two disjoint copies of K_k."""
    src, dst = [], []
    for base in (0, k):
        for i in range(k):
            for j in range(i + 1, k):
                src.append(base + i)
                dst.append(base + j)
    return Graph.from_edges(2 * k, src, dst, directed=False)


def triangle_with_pendant() -> Graph:
    """K3 on {0, 1, 2} plus node 3 attached to 0."""
    return Graph.from_edges(4, [0, 1, 2, 0], [1, 2, 0, 3], directed=False)


def fan_digraph() -> Graph:
    """Small digraph with many one-hop routes u -> v and a single way back."""
    # u = 0, v = 1; 0 -> {1, 2, 3, 4}, {2, 3, 4} -> 1, 1 -> 5 -> 0
    src = [0, 0, 0, 0, 2, 3, 4, 1, 5]
    dst = [1, 2, 3, 4, 1, 1, 1, 5, 0]
    return Graph.from_edges(6, src, dst, directed=True)
