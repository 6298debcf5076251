"""Context-pair samplers, explicit context matrices and exact oracles.

Every sampler returns a :class:`PairStream`: a finite, re-iterable sequence
of ``(source, context)`` node pairs that is fully determined by the graph,
the configuration and the seed. Sampling kernels are numba-compiled and
seeded per chunk, so output does not depend on how chunks are scheduled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DanglingNodeError, DivergenceError, SizeLimitError
from .graph import Graph

DENSE_ORACLE_LIMIT = 100
DENSE_MATRIX_LIMIT = 20_000
WALK_CHUNK = 4096
SAMPLE_CHUNK = 1 << 20


def chunk_seed(*key) -> int:
    """Derive a 32-bit kernel seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in key]).generate_state(1)[0])


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    seed: int = 0
    dangling: str = "error"

    def __post_init__(self):
        if self.walks_per_node <= 0 or self.walk_length <= 0 or self.window <= 0:
            raise ValueError("walks_per_node, walk_length and window must be positive")
        if self.window > self.walk_length:
            raise ValueError("window must not exceed walk_length")
        if self.dangling not in ("error", "stop"):
            raise ValueError("dangling must be 'error' or 'stop'")


@dataclass(frozen=True)
class SecondOrderConfig(WalkConfig):
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive")


@dataclass(frozen=True)
class PPRConfig:
    alpha: float = 0.15
    samples: int = 1_000_000
    max_len: int = 64
    seed: int = 0
    dangling: str = "error"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.samples <= 0 or self.max_len < 0:
            raise ValueError("samples must be positive and max_len non-negative")
        if self.dangling not in ("error", "stop"):
            raise ValueError("dangling must be 'error' or 'stop'")


# -- streams -----------------------------------------------------------------


class PairStream:
    """Finite, deterministic stream of (source, context) pairs."""

    node_count: int

    def batches(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        raise NotImplementedError

    def __len__(self) -> int:
        raise NotImplementedError

    def __iter__(self):
        for src, ctx in self.batches():
            yield from zip(src.tolist(), ctx.tolist())

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        parts = list(self.batches())
        if not parts:
            return np.empty(0, np.int32), np.empty(0, np.int32)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def pair_counts(self) -> np.ndarray:
        """Dense ``node_count x node_count`` matrix of pair occurrence counts."""
        n = self.node_count
        counts = np.zeros(n * n, dtype=np.int64)
        for src, ctx in self.batches():
            counts += np.bincount(src.astype(np.int64) * n + ctx, minlength=n * n)
        return counts.reshape(n, n)


class ArrayPairStream(PairStream):
    def __init__(self, sources, contexts, node_count, batch_size=SAMPLE_CHUNK):
        self.sources = np.ascontiguousarray(sources, dtype=np.int32)
        self.contexts = np.ascontiguousarray(contexts, dtype=np.int32)
        if self.sources.shape != self.contexts.shape:
            raise ValueError("sources and contexts must align")
        self.node_count = node_count
        self.batch_size = batch_size

    def __len__(self):
        return len(self.sources)

    def batches(self):
        for lo in range(0, len(self.sources), self.batch_size):
            yield self.sources[lo:lo + self.batch_size], self.contexts[lo:lo + self.batch_size]


class WalkPairStream(PairStream):
    """Window pairs over a cached corpus of random walks."""

    def __init__(self, walks: np.ndarray, lengths: np.ndarray, window: int, node_count: int):
        self.walks = walks
        self.lengths = lengths
        self.window = window
        self.node_count = node_count
        self._len = int(_window_pair_count(lengths, window).sum())

    def __len__(self):
        return self._len

    def batches(self):
        for lo in range(0, len(self.walks), WALK_CHUNK):
            yield _window_pairs(self.walks[lo:lo + WALK_CHUNK], self.lengths[lo:lo + WALK_CHUNK], self.window)

    def write_walks(self, path) -> None:
        """One walk per line, space-separated dense node ids."""
        with open(path, "w") as fh:
            for walk, n in zip(self.walks, self.lengths):
                fh.write(" ".join(map(str, walk[:n].tolist())) + "\n")


class SampledPairStream(PairStream):
    """Pairs drawn independently by a kernel, one seeded chunk at a time."""

    def __init__(self, kernel, total: int, seed: int, node_count: int):
        self._kernel = kernel
        self._total = total
        self._seed = seed
        self.node_count = node_count

    def __len__(self):
        return self._total

    def batches(self):
        for c, lo in enumerate(range(0, self._total, SAMPLE_CHUNK)):
            yield self._kernel(min(SAMPLE_CHUNK, self._total - lo), chunk_seed(self._seed, c))


# -- kernels -----------------------------------------------------------------


def _csr_arrays(g: Graph):
    indptr = np.asarray(g.indptr, dtype=np.int64)
    indices = np.asarray(g.indices, dtype=np.int32)
    if g.weights is None:
        return indptr, indices, np.empty(0), False
    cum = np.empty(len(g.weights))
    for u in range(g.node_count):
        lo, hi = indptr[u], indptr[u + 1]
        cum[lo:hi] = np.cumsum(g.weights[lo:hi])
    return indptr, indices, cum, True


@numba.njit(cache=True)
def _pick(indptr, indices, cum, weighted, u):
    lo = indptr[u]
    hi = indptr[u + 1]
    if weighted:
        r = np.random.random() * cum[hi - 1]
        a, b = lo, hi - 1
        while a < b:
            m = (a + b) // 2
            if cum[m] <= r:
                a = m + 1
            else:
                b = m
        return indices[a]
    k = lo + int(np.random.random() * (hi - lo))
    if k >= hi:
        k = hi - 1
    return indices[k]


@numba.njit(cache=True)
def _has_edge(indptr, indices, u, v):
    a, b = indptr[u], indptr[u + 1]
    while a < b:
        m = (a + b) // 2
        if indices[m] < v:
            a = m + 1
        else:
            b = m
    return a < indptr[u + 1] and indices[a] == v


@numba.njit(cache=True)
def _first_order_walks(indptr, indices, cum, weighted, starts, steps, seed):
    np.random.seed(seed)
    n = len(starts)
    walks = np.full((n, steps + 1), -1, dtype=np.int32)
    lengths = np.empty(n, dtype=np.int32)
    for i in range(n):
        cur = starts[i]
        walks[i, 0] = cur
        length = 1
        for _ in range(steps):
            if indptr[cur + 1] == indptr[cur]:
                break
            cur = _pick(indptr, indices, cum, weighted, cur)
            walks[i, length] = cur
            length += 1
        lengths[i] = length
    return walks, lengths


@numba.njit(cache=True)
def _second_order_walks(indptr, indices, cum, weighted, starts, steps, p, q, seed):
    np.random.seed(seed)
    inv_p = 1.0 / p
    inv_q = 1.0 / q
    t_max = max(inv_p, 1.0, inv_q)
    n = len(starts)
    walks = np.full((n, steps + 1), -1, dtype=np.int32)
    lengths = np.empty(n, dtype=np.int32)
    for i in range(n):
        cur = starts[i]
        walks[i, 0] = cur
        length = 1
        prev = -1
        for _ in range(steps):
            if indptr[cur + 1] == indptr[cur]:
                break
            if prev < 0:
                nxt = _pick(indptr, indices, cum, weighted, cur)
            else:
                # rejection from the first-order proposal; exact for T(prev, cur, .)
                while True:
                    nxt = _pick(indptr, indices, cum, weighted, cur)
                    if nxt == prev:
                        t = inv_p
                    elif _has_edge(indptr, indices, prev, nxt):
                        t = 1.0
                    else:
                        t = inv_q
                    if np.random.random() * t_max < t:
                        break
            prev = cur
            cur = nxt
            walks[i, length] = cur
            length += 1
        lengths[i] = length
    return walks, lengths


@numba.njit(cache=True)
def _window_pair_count(lengths, window):
    out = np.empty(len(lengths), dtype=np.int64)
    for k in range(len(lengths)):
        n = lengths[k]
        total = 0
        for i in range(n):
            total += min(i, window) + min(n - 1 - i, window)
        out[k] = total
    return out


@numba.njit(cache=True)
def _window_pairs(walks, lengths, window):
    total = _window_pair_count(lengths, window).sum()
    src = np.empty(total, dtype=np.int32)
    ctx = np.empty(total, dtype=np.int32)
    pos = 0
    for k in range(len(lengths)):
        n = lengths[k]
        for i in range(n):
            lo = max(0, i - window)
            hi = min(n - 1, i + window)
            for j in range(lo, hi + 1):
                if j != i:
                    src[pos] = walks[k, i]
                    ctx[pos] = walks[k, j]
                    pos += 1
    return src, ctx


@numba.njit(cache=True)
def _ppr_kernel(indptr, indices, cum, weighted, node_count, count, alpha, max_len, seed):
    np.random.seed(seed)
    src = np.empty(count, dtype=np.int32)
    ctx = np.empty(count, dtype=np.int32)
    for i in range(count):
        start = int(np.random.random() * node_count)
        if start >= node_count:
            start = node_count - 1
        cur = start
        h = 0
        while h < max_len and np.random.random() >= alpha:
            if indptr[cur + 1] == indptr[cur]:
                break
            cur = _pick(indptr, indices, cum, weighted, cur)
            h += 1
        src[i] = start
        ctx[i] = cur
    return src, ctx


@numba.njit(cache=True)
def _build_alias(probs):
    n = len(probs)
    prob = np.zeros(n)
    alias = np.zeros(n, dtype=np.int64)
    scaled = probs * n
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        l = large[nl]
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] + scaled[s] - 1.0
        if scaled[l] < 1.0:
            small[ns] = l
            ns += 1
        else:
            large[nl] = l
            nl += 1
    for k in range(nl):
        prob[large[k]] = 1.0
    for k in range(ns):
        prob[small[k]] = 1.0
    return prob, alias


@numba.njit(cache=True)
def _alias_kernel(prob, alias, esrc, edst, count, seed):
    np.random.seed(seed)
    m = len(prob)
    src = np.empty(count, dtype=np.int32)
    ctx = np.empty(count, dtype=np.int32)
    for i in range(count):
        k = int(np.random.random() * m)
        if k >= m:
            k = m - 1
        if np.random.random() >= prob[k]:
            k = alias[k]
        src[i] = esrc[k]
        ctx[i] = edst[k]
    return src, ctx


class AliasTable:
    """Vose alias table over a finite discrete distribution."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or len(w) == 0 or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("alias weights must be non-negative with positive sum")
        self.prob, self.alias = _build_alias(w / w.sum())

    def probabilities(self) -> np.ndarray:
        """Distribution encoded by the table (for verification)."""
        n = len(self.prob)
        out = self.prob / n
        np.add.at(out, self.alias, (1.0 - self.prob) / n)
        return out


# -- public samplers ---------------------------------------------------------


def _check_dangling(g: Graph, policy: str) -> None:
    if policy == "error":
        dangling = g.dangling_nodes()
        if len(dangling):
            raise DanglingNodeError(int(dangling[0]), g.label(int(dangling[0])))


def _walk_starts(g: Graph, cfg: WalkConfig) -> list[np.ndarray]:
    """Start nodes per pass: every node once, in a seeded random order."""
    return [
        np.random.default_rng(chunk_seed(cfg.seed, 0xA11, k)).permutation(g.node_count).astype(np.int32)
        for k in range(cfg.walks_per_node)
    ]


def _run_walks(g: Graph, cfg: WalkConfig, kernel, extra=()) -> WalkPairStream:
    _check_dangling(g, cfg.dangling)
    indptr, indices, cum, weighted = _csr_arrays(g)
    walks, lengths = [], []
    for k, starts in enumerate(_walk_starts(g, cfg)):
        for c, lo in enumerate(range(0, len(starts), WALK_CHUNK)):
            w, n = kernel(indptr, indices, cum, weighted, starts[lo:lo + WALK_CHUNK],
                          cfg.walk_length, *extra, chunk_seed(cfg.seed, k, c))
            walks.append(w)
            lengths.append(n)
    return WalkPairStream(np.concatenate(walks), np.concatenate(lengths), cfg.window, g.node_count)


def uniform_walk_pairs(g: Graph, cfg: WalkConfig) -> WalkPairStream:
    """DeepWalk context: window pairs over first-order random walks.

    Each walk takes ``walk_length`` steps (``walk_length + 1`` nodes);
    neighbors are chosen proportionally to edge weight.
    """
    return _run_walks(g, cfg, _first_order_walks)


def node2vec_walk_pairs(g: Graph, cfg: SecondOrderConfig) -> WalkPairStream:
    """node2vec context: window pairs over second-order (p, q) biased walks.

    The first step of each walk is first-order; later steps weight the
    candidate ``w`` by 1/p (return), 1 (``prev -> w`` is an edge) or 1/q.
    """
    return _run_walks(g, cfg, _second_order_walks, (float(cfg.p), float(cfg.q)))


def ppr_pairs(g: Graph, cfg: PPRConfig) -> SampledPairStream:
    """(first, last) node pairs of random walks with restart probability alpha."""
    _check_dangling(g, cfg.dangling)
    indptr, indices, cum, weighted = _csr_arrays(g)
    n = g.node_count

    def kernel(count, seed):
        return _ppr_kernel(indptr, indices, cum, weighted, n, count, cfg.alpha, cfg.max_len, seed)

    return SampledPairStream(kernel, cfg.samples, cfg.seed, n)


def adjacency_pairs(g: Graph, samples: int, seed: int = 0) -> SampledPairStream:
    """Edges drawn with probability proportional to weight (alias method)."""
    if g.num_edges < 1:
        raise ValueError("graph has no edges")
    esrc, edst = g.edges()
    esrc, edst = esrc.astype(np.int32), edst.astype(np.int32)
    table = AliasTable(g.weights if g.weights is not None else np.ones(len(esrc)))

    def kernel(count, s):
        return _alias_kernel(table.prob, table.alias, esrc, edst, count, s)

    return SampledPairStream(kernel, samples, seed, g.node_count)


# -- transition tables (exact rationals) --------------------------------------


def first_order_table(g: Graph) -> dict[int, dict[int, Fraction]]:
    table = {}
    for v in range(g.node_count):
        nbrs = g.neighbors(v).tolist()
        w = [Fraction(x) for x in g.edge_weights(v).tolist()]
        total = sum(w)
        if nbrs:
            table[v] = {x: wx / total for x, wx in zip(nbrs, w)}
    return table


def second_order_table(g: Graph, p, q) -> dict[tuple[int, int], dict[int, Fraction]]:
    """Normalized node2vec transition distribution for every traversed edge."""
    inv_p = 1 / Fraction(p)
    inv_q = 1 / Fraction(q)
    table = {}
    src, dst = g.edges()
    for u, v in zip(src.tolist(), dst.tolist()):
        nbrs = g.neighbors(v).tolist()
        if not nbrs:
            continue
        weights = {}
        for w, ew in zip(nbrs, g.edge_weights(v).tolist()):
            if w == u:
                t = inv_p
            elif g.has_edge(u, w):
                t = Fraction(1)
            else:
                t = inv_q
            weights[w] = t * Fraction(ew)
        total = sum(weights.values())
        table[(u, v)] = {w: x / total for w, x in weights.items()}
    return table


# -- dense helpers and oracles ------------------------------------------------


def transition_matrix(g: Graph, absorb_dangling=False) -> np.ndarray:
    """Dense P = D^-1 A; dangling rows are zero or, if requested, self-absorbing."""
    a = g.adjacency().toarray()
    d = a.sum(axis=1)
    p = np.divide(a, d[:, None], out=np.zeros_like(a), where=d[:, None] > 0)
    if absorb_dangling:
        idx = np.flatnonzero(d == 0)
        p[idx, idx] = 1.0
    return p


def _require_small(g: Graph, limit: int, what: str) -> None:
    if g.node_count > limit:
        raise SizeLimitError(f"{what} is dense; node_count {g.node_count} exceeds {limit}")


def expected_cooccurrence(g: Graph, T: int) -> np.ndarray:
    """Limit distribution of window pairs for uniform walks with window T.

    Entry (i, j) is ``1/(2T) sum_{r=1..T} [pi_i (P^r)_ij + pi_j (P^r)_ji]``
    with ``pi`` the (weighted) out-degree share.
    """
    _require_small(g, DENSE_ORACLE_LIMIT, "expected_cooccurrence")
    p = transition_matrix(g)
    d = g.weighted_out_degree()
    pi = d / d.sum()
    acc = np.zeros_like(p)
    pr = np.eye(g.node_count)
    for _ in range(T):
        pr = pr @ p
        acc += pr
    m = pi[:, None] * acc
    return (m + m.T) / (2.0 * T)


def ppr_pair_oracle(g: Graph, alpha: float, max_len: int, dangling: str = "error") -> np.ndarray:
    """Exact (start, last) distribution of :func:`ppr_pairs` for a truncated walk."""
    _require_small(g, DENSE_ORACLE_LIMIT, "ppr_pair_oracle")
    _check_dangling(g, dangling)
    n = g.node_count
    p = transition_matrix(g, absorb_dangling=True)
    out = np.zeros((n, n))
    ph = np.eye(n)
    for h in range(max_len):
        out += alpha * (1.0 - alpha) ** h * ph
        ph = ph @ p
    out += (1.0 - alpha) ** max_len * ph
    return out / n


def netmf_matrix(g: Graph, T: int, r_window: int | None = None, k_neg: int = 1) -> sp.csr_matrix:
    """NetMF context matrix ``log(vol/(kT) * (sum_{r<=T} P^r)_ij / d_j)``.

    Window pairs never span more than ``min(T, r_window)`` steps, so that
    span is used as ``T`` when a window is given. Entries with
    log-argument <= 1 are not stored.
    """
    if g.directed:
        raise ValueError("NetMF is defined for undirected graphs only")
    _require_small(g, DENSE_MATRIX_LIMIT, "netmf_matrix (use a sampling-based method)")
    if T <= 0 or k_neg <= 0 or (r_window is not None and r_window <= 0):
        raise ValueError("T, r_window and k_neg must be positive")
    if r_window is not None:
        T = min(T, r_window)
    a = g.adjacency()
    d = g.weighted_out_degree()
    if np.any(d == 0):
        raise ValueError("NetMF needs every node to have an edge")
    vol = d.sum()
    p = sp.diags(1.0 / d) @ a
    pr = np.eye(g.node_count)
    acc = np.zeros((g.node_count,) * 2)
    for _ in range(T):
        pr = np.asarray((p.T @ pr.T).T)
        acc += pr
    arg = acc * (vol / (k_neg * T)) / d[None, :]
    asym = np.abs(arg - arg.T).max()
    if asym > 1e-9 * max(arg.max(), 1.0):
        warnings.warn(f"NetMF argument asymmetric by {asym:.3g}; symmetrizing", RuntimeWarning)
        arg = 0.5 * (arg + arg.T)
    out = np.zeros_like(arg)
    mask = arg > 1.0
    out[mask] = np.log(arg[mask])
    return sp.csr_matrix(out)


def spectral_radius_bounds(a: sp.spmatrix, tol=1e-8, max_iter=10_000) -> tuple[float, float]:
    """Collatz-Wielandt bounds on the spectral radius of a non-negative matrix.

    Power iteration on ``A + I`` keeps the iterate strictly positive, so
    ``min_i (Ax)_i/x_i <= rho <= max_i (Ax)_i/x_i`` holds at every step.
    """
    n = a.shape[0]
    x = np.ones(n)
    lo, hi = 0.0, math.inf
    for _ in range(max_iter):
        y = a @ x
        ratio = np.divide(y, x, out=np.zeros(n), where=x > 0)
        lo = max(lo, float(ratio.min()))
        hi = min(hi, float(ratio.max()))
        if hi - lo <= tol * max(hi, 1.0):
            break
        x = x + y
        x /= x.max()
    return lo, hi


def _check_katz(g: Graph, beta: float) -> sp.csr_matrix:
    if beta < 0:
        raise ValueError("beta must be non-negative")
    a = g.adjacency()
    lo, hi = spectral_radius_bounds(a)
    if beta * hi >= 1.0:
        raise DivergenceError(beta, hi)
    return a


def katz_matrix(g: Graph, beta: float, tol: float = 1e-10) -> sp.csr_matrix:
    """Katz proximity ``sum_{l>=1} beta^l A^l`` truncated once the tail is below tol.

    The tail after ``L`` terms is ``(beta A)^(L+1) (I - beta A)^-1``; its
    Frobenius norm is bounded by the norm of the next term times a bound on
    ``||(I - beta A)^-1||_2``.
    """
    _require_small(g, DENSE_MATRIX_LIMIT, "katz_matrix")
    n = g.node_count
    if beta == 0:
        return sp.csr_matrix((n, n))
    a = _check_katz(g, beta)
    norm1 = abs(a).sum(axis=0).max()
    norm_inf = abs(a).sum(axis=1).max()
    gamma = beta * math.sqrt(norm1 * norm_inf)
    if gamma < 1.0:
        kappa = 1.0 / (1.0 - gamma)
    else:
        m = np.eye(n) - beta * a.toarray()
        kappa = float(np.linalg.norm(np.linalg.inv(m), 2))
    at = a.T.tocsr()
    term = beta * a.toarray()
    total = np.zeros((n, n))
    while True:
        total += term
        term = beta * np.asarray(at @ term.T).T
        nrm = np.linalg.norm(term)
        if nrm == 0.0 or nrm * kappa < tol:
            break
    return sp.csr_matrix(total)


def katz_operator(g: Graph, beta: float) -> spla.LinearOperator:
    """Matrix-free Katz proximity for graphs too large for :func:`katz_matrix`.

    Products with ``C = (I - beta A)^-1 beta A`` use a sparse LU of
    ``I - beta A``; the result is exact up to solver round-off.
    """
    a = _check_katz(g, beta)
    n = g.node_count
    lu = spla.splu((sp.identity(n, format="csc") - beta * a).tocsc())

    def matmat(x):
        return lu.solve(np.asarray(beta * (a @ x), dtype=np.float64))

    def rmatmat(x):
        return beta * (a.T @ lu.solve(np.asarray(x, dtype=np.float64), trans="T"))

    return spla.LinearOperator((n, n), matvec=matmat, rmatvec=rmatmat, matmat=matmat,
                               rmatmat=rmatmat, dtype=np.float64)


def window_pairs(walk, window: int) -> list[tuple[int, int]]:
    """Context pairs of one walk: ``(w[i], w[j])`` for ``0 < |i - j| <= window``."""
    walk = np.asarray(walk, dtype=np.int32)
    src, ctx = _window_pairs(walk[None, :], np.array([len(walk)], dtype=np.int64), window)
    return list(zip(src.tolist(), ctx.tolist()))
