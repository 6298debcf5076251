"""Compressed graph storage, edge-list I/O and structural profiling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, GraphFormatError, NotApplicableError

EXACT_DIAMETER_LIMIT = 50_000
DOUBLE_SWEEP_STARTS = 100


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable CSR adjacency with optional per-edge weights.

    Undirected graphs store both orientations of every edge, so ``indices``
    holds ``2 * num_edges`` entries. For directed graphs the reverse
    adjacency (``in_indptr``/``in_indices``) is materialized as well.
    """

    node_count: int
    directed: bool
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray | None = None
    in_indptr: np.ndarray | None = None
    in_indices: np.ndarray | None = None
    ids: list[str] | None = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, node_count, src, dst, directed, weights=None, ids=None):
        """Build a graph from parallel edge arrays.

        Self-loops are dropped; duplicates keep the first weight seen. For
        undirected input each pair is symmetrized.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have the same length")
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= node_count):
            raise ValueError("edge endpoint out of range")
        w = None if weights is None else np.asarray(weights, dtype=np.float64).ravel()
        if w is not None and np.any(w < 0):
            raise ValueError("edge weights must be non-negative")

        keep = src != dst
        src, dst = src[keep], dst[keep]
        if w is not None:
            w = w[keep]
        if not directed:
            lo, hi = np.minimum(src, dst), np.maximum(src, dst)
            src, dst = lo, hi
        key = src * node_count + dst
        _, first = np.unique(key, return_index=True)
        first.sort()
        src, dst = src[first], dst[first]
        if w is not None:
            w = w[first]
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
            if w is not None:
                w = np.concatenate([w, w])

        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if w is not None:
            w = w[order]
            if np.all(w == 1.0):
                w = None
        indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        indices = dst.astype(np.int32)

        in_indptr = in_indices = None
        if directed:
            rorder = np.lexsort((src, dst))
            in_indptr = np.zeros(node_count + 1, dtype=np.int64)
            np.add.at(in_indptr, dst + 1, 1)
            np.cumsum(in_indptr, out=in_indptr)
            in_indices = src[rorder].astype(np.int32)
        for arr in (indptr, indices, w, in_indptr, in_indices):
            if arr is not None:
                arr.setflags(write=False)
        return cls(node_count, directed, indptr, indices, w, in_indptr, in_indices, ids)

    # -- basic accessors -------------------------------------------------

    @property
    def num_edges(self) -> int:
        """Directed edge count, or undirected edge count for undirected graphs."""
        n = len(self.indices)
        return n if self.directed else n // 2

    def label(self, node: int) -> str:
        return self.ids[node] if self.ids is not None else str(node)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edge_weights(self, u: int) -> np.ndarray:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        if self.weights is None:
            return np.ones(hi - lo)
        return self.weights[lo:hi]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def in_degree(self) -> np.ndarray:
        if not self.directed:
            return self.out_degree()
        return np.diff(self.in_indptr)

    def weighted_out_degree(self) -> np.ndarray:
        if self.weights is None:
            return self.out_degree().astype(np.float64)
        src, _ = self.edges()
        return np.bincount(src, weights=self.weights, minlength=self.node_count)

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Stored (src, dst) arrays; both orientations for undirected graphs."""
        src = np.repeat(np.arange(self.node_count, dtype=np.int64), self.out_degree())
        return src, self.indices.astype(np.int64)

    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * n + v`` keys of stored edges."""
        src, dst = self.edges()
        return src * self.node_count + dst  # CSR order is already sorted

    def adjacency(self, weighted=True) -> sp.csr_matrix:
        data = self.weights if (weighted and self.weights is not None) else np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.node_count,) * 2)

    def undirected_view(self) -> Graph:
        if not self.directed:
            return self
        src, dst = self.edges()
        return Graph.from_edges(self.node_count, src, dst, directed=False, ids=self.ids)

    def dangling_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.out_degree() == 0)

    def relabel(self, perm) -> Graph:
        """Graph with node ``u`` renamed to ``perm[u]``."""
        perm = np.asarray(perm)
        src, dst = self.edges()
        if not self.directed:
            keep = src < dst
            src, dst = src[keep], dst[keep]
            w = None if self.weights is None else self.weights[keep]
        else:
            w = self.weights
        return Graph.from_edges(self.node_count, perm[src], perm[dst], self.directed, w)


# -- I/O ---------------------------------------------------------------------


def load_edge_list(path, directed: bool) -> Graph:
    """Read a whitespace-separated edge list (``src dst [weight]``).

    Lines starting with ``#`` or ``%`` are ignored. Node ids are arbitrary
    tokens, remapped densely in order of first appearance; the original ids
    are kept on ``Graph.ids``.
    """
    index: dict[str, int] = {}
    src, dst, wts = [], [], []
    weighted = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped[0] in "#%":
                continue
            parts = stripped.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"expected 2 or 3 fields, got {len(parts)}", lineno)
            w = 1.0
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise GraphFormatError(f"bad weight {parts[2]!r}", lineno) from None
                if not math.isfinite(w) or w < 0:
                    raise GraphFormatError(f"weight must be finite and non-negative: {parts[2]}", lineno)
                weighted = True
            for tok in parts[:2]:
                if tok not in index:
                    index[tok] = len(index)
            src.append(index[parts[0]])
            dst.append(index[parts[1]])
            wts.append(w)
    if not index:
        raise GraphFormatError(f"{path}: empty graph")
    ids = list(index)
    return Graph.from_edges(len(ids), src, dst, directed, wts if weighted else None, ids=ids)


def write_edge_list(g: Graph, path, src=None, dst=None) -> None:
    """Write edges with original ids; defaults to all edges of ``g``."""
    if src is None:
        src, dst = g.edges()
        if not g.directed:
            keep = src < dst
            src, dst = src[keep], dst[keep]
    with open(path, "w") as fh:
        for u, v in zip(src, dst):
            fh.write(f"{g.label(u)} {g.label(v)}\n")


def write_id_map(g: Graph, path) -> None:
    with open(path, "w") as fh:
        for i in range(g.node_count):
            fh.write(f"{g.label(i)} {i}\n")


# -- structural properties ---------------------------------------------------


def reciprocity(g: Graph) -> float:
    if not g.directed:
        raise NotApplicableError("reciprocity is defined for directed graphs only")
    if g.num_edges == 0:
        return 0.0
    src, dst = g.edges()
    keys = g.edge_keys()
    rev = dst * g.node_count + src
    pos = np.searchsorted(keys, rev)
    pos[pos == len(keys)] = 0
    return float(np.count_nonzero(keys[pos] == rev)) / len(keys)


def _binary_undirected(g: Graph) -> sp.csr_matrix:
    return g.undirected_view().adjacency(weighted=False)


def _undirected_triangles(g: Graph):
    a = _binary_undirected(g)
    deg = np.asarray(a.sum(axis=1)).ravel()
    tri = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0
    return tri, deg


def _directed_two_paths(g: Graph):
    """Per-node (closed, total) counts of directed 2-paths u->v->w, w != u."""
    a = g.adjacency(weighted=False)
    closed = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel()
    outdeg = np.asarray(a.sum(axis=1)).ravel()
    back = np.asarray(a.multiply(a.T).sum(axis=1)).ravel()
    total = a @ outdeg - back
    return closed, total


def clustering_coefficient(g: Graph) -> float:
    """Mean local clustering on the undirected view; degree < 2 counts as 0."""
    tri, deg = _undirected_triangles(g)
    pairs = deg * (deg - 1) / 2.0
    local = np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)
    return float(local.mean()) if g.node_count else 0.0


def transitivity(g: Graph) -> float:
    tri, deg = _undirected_triangles(g)
    triplets = (deg * (deg - 1) / 2.0).sum()
    return float(tri.sum() / triplets) if triplets > 0 else 0.0


def directed_clustering(g: Graph) -> float:
    if not g.directed:
        raise NotApplicableError("directed clustering requires a directed graph")
    closed, total = _directed_two_paths(g)
    local = np.divide(closed, total, out=np.zeros_like(closed, dtype=float), where=total > 0)
    return float(local.mean())


def directed_transitivity(g: Graph) -> float:
    if not g.directed:
        raise NotApplicableError("directed transitivity requires a directed graph")
    closed, total = _directed_two_paths(g)
    t = total.sum()
    return float(closed.sum() / t) if t > 0 else 0.0


def _top_eigenvalue(matvec, n, rng, tol, max_iter, deflate=None):
    x = rng.standard_normal(n)
    if deflate is not None:
        x -= deflate * (deflate @ x)
    x /= np.linalg.norm(x)
    mu = 0.0
    for it in range(1, max_iter + 1):
        y = matvec(x)
        if deflate is not None:
            y -= deflate * (deflate @ y)
        new_mu = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0, x
        x = y / norm
        if it > 1 and abs(new_mu - mu) <= tol * max(abs(new_mu), 1e-300):
            return new_mu, x
        mu = new_mu
    raise ConvergenceError("power iteration did not converge", max_iter)


def spectral_separation(g: Graph, tol=1e-8, max_iter=10_000, seed=0) -> float:
    """|lambda_1| / |lambda_2| of the (symmetrized) adjacency matrix.

    Power iteration runs on A^2, whose eigenvalues are the squared
    eigenvalues of A; this keeps bipartite spectra (lambda and -lambda)
    from oscillating.
    """
    if g.node_count < 2:
        raise ValueError("spectral separation needs at least 2 nodes")
    a = _binary_undirected(g) if g.directed else g.adjacency()
    rng = np.random.default_rng(seed)

    def matvec(x):
        return a @ (a @ x)

    l1, v1 = _top_eigenvalue(matvec, g.node_count, rng, tol, max_iter)
    if l1 <= 0:
        raise ValueError("adjacency matrix has no nonzero eigenvalue")
    l2, _ = _top_eigenvalue(matvec, g.node_count, rng, tol, max_iter, deflate=v1)
    if l2 <= 0:
        return math.inf
    return math.sqrt(l1 / l2)


@numba.njit(cache=True)
def _bfs_ecc(indptr, indices, source, dist, queue):
    """Eccentricity of ``source``; ``dist`` must be all -1 and is restored."""
    head = 0
    tail = 1
    queue[0] = source
    dist[source] = 0
    far = source
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
                far = v
    ecc = dist[far]
    for i in range(tail):
        dist[queue[i]] = -1
    return ecc, far


@numba.njit(cache=True)
def _all_sources_diameter(indptr, indices, sources, n):
    dist = -np.ones(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    best = 0
    for s in sources:
        ecc, _ = _bfs_ecc(indptr, indices, s, dist, queue)
        if ecc > best:
            best = ecc
    return best


@numba.njit(cache=True)
def _double_sweep(indptr, indices, starts, n):
    dist = -np.ones(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    best = 0
    for s in starts:
        _, far = _bfs_ecc(indptr, indices, s, dist, queue)
        ecc, _ = _bfs_ecc(indptr, indices, far, dist, queue)
        if ecc > best:
            best = ecc
    return best


def diameter(g: Graph, exact_limit=EXACT_DIAMETER_LIMIT, seed=0) -> tuple[int, bool]:
    """Diameter of the largest connected component, ignoring direction.

    Returns ``(diameter, exact)``; above ``exact_limit`` nodes a double-sweep
    lower bound is returned with ``exact=False``.
    """
    u = g.undirected_view()
    _, comp = connected_components(u.adjacency(weighted=False), directed=False)
    largest = np.bincount(comp).argmax()
    members = np.flatnonzero(comp == largest)
    indptr = np.asarray(u.indptr, dtype=np.int64)
    indices = np.asarray(u.indices, dtype=np.int64)
    if g.node_count <= exact_limit:
        return int(_all_sources_diameter(indptr, indices, members, g.node_count)), True
    rng = np.random.default_rng(seed)
    starts = rng.choice(members, size=min(DOUBLE_SWEEP_STARTS, len(members)), replace=False)
    return int(_double_sweep(indptr, indices, starts, g.node_count)), False


@dataclass(frozen=True)
class GraphProfile:
    reciprocity: float | None
    diameter: int
    diameter_exact: bool
    clustering: float
    transitivity: float
    clustering_dir: float | None
    transitivity_dir: float | None
    spectral_separation: float
    spectral_symmetrized: bool

    def as_dict(self) -> dict:
        out = {
            "diameter": self.diameter,
            "diameter_exact": self.diameter_exact,
            "clustering": self.clustering,
            "transitivity": self.transitivity,
            "spectral_separation": self.spectral_separation,
            "spectral_symmetrized": self.spectral_symmetrized,
        }
        for key in ("reciprocity", "clustering_dir", "transitivity_dir"):
            value = getattr(self, key)
            out[key] = "n.a" if value is None else value
        return out


def profile(g: Graph, seed=0) -> GraphProfile:
    d, exact = diameter(g, seed=seed)
    return GraphProfile(
        reciprocity=reciprocity(g) if g.directed else None,
        diameter=d,
        diameter_exact=exact,
        clustering=clustering_coefficient(g),
        transitivity=transitivity(g),
        clustering_dir=directed_clustering(g) if g.directed else None,
        transitivity_dir=directed_transitivity(g) if g.directed else None,
        spectral_separation=spectral_separation(g, seed=seed),
        spectral_symmetrized=g.directed,
    )
