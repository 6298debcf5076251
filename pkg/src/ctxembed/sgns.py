"""Skip-gram training over context-pair streams.

Negative sampling covers DeepWalk/node2vec/APP/LINE-2 (separate source and
context matrices) and VERSE/LINE-1 (``shared=True``, one matrix in both
roles). Hierarchical softmax predicts the context leaf of a Huffman tree
built over node degrees.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numba
import numpy as np

from .context import PairStream, chunk_seed
from .errors import TrainingError
from .graph import Graph

CLAMP = 30.0


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    epochs: int = 1
    negatives: int = 5
    lr: float = 0.025
    min_lr: float = 1e-4
    shared: bool = False
    objective: str = "negative-sampling"
    seed: int = 0
    threads: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.epochs < 0:
            raise ValueError("dim must be >= 1 and epochs >= 0")
        if self.objective not in ("negative-sampling", "hierarchical-softmax"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.objective == "negative-sampling" and self.negatives < 1:
            raise ValueError("negative sampling needs at least one negative")
        if self.objective == "hierarchical-softmax" and self.shared:
            raise ValueError("hierarchical softmax requires shared=False")


@dataclass
class EmbeddingSet:
    phi: np.ndarray
    theta: np.ndarray | None = None
    ids: list[str] | None = None
    losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.phi.ndim != 2 or self.phi.shape[1] < 1:
            raise ValueError("phi must be a node_count x d matrix")
        if self.theta is not None and self.theta.shape != self.phi.shape:
            raise ValueError("theta must match phi's shape")

    @property
    def dim(self) -> int:
        return self.phi.shape[1]

    @property
    def node_count(self) -> int:
        return self.phi.shape[0]

    def save(self, path) -> None:
        """Write ``path`` (source vectors) and ``path.ctx`` when theta exists."""
        _write_matrix(path, self.phi, self.ids)
        if self.theta is not None:
            _write_matrix(f"{path}.ctx", self.theta, self.ids)


def _write_matrix(path, mat, ids):
    n, d = mat.shape
    with open(path, "w") as fh:
        fh.write(f"{n} {d}\n")
        for i in range(n):
            label = ids[i] if ids is not None else str(i)
            fh.write(label + " " + " ".join(f"{x:.6g}" for x in mat[i]) + "\n")


def load_embedding(path) -> EmbeddingSet:
    def read(p):
        with open(p) as fh:
            n, d = map(int, fh.readline().split())
            ids, rows = [], []
            for line in fh:
                parts = line.split()
                ids.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        mat = np.array(rows, dtype=np.float64).reshape(n, d)
        return ids, mat

    ids, phi = read(path)
    try:
        _, theta = read(f"{path}.ctx")
    except FileNotFoundError:
        theta = None
    return EmbeddingSet(phi, theta, ids)


# -- loss and gradient (reference, pure numpy) --------------------------------


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sgns_loss(phi_i, theta_j, negatives) -> float:
    """``-log s(phi.theta_j) - sum_n log s(-phi.theta_n)``, dots clamped to +-30."""
    pos = np.clip(np.dot(phi_i, theta_j), -CLAMP, CLAMP)
    loss = -_log_sigmoid(pos)
    for t in negatives:
        loss -= _log_sigmoid(-np.clip(np.dot(phi_i, t), -CLAMP, CLAMP))
    return float(loss)


def sgns_grad(phi_i, theta_j, negatives):
    """Analytic gradients of :func:`sgns_loss` w.r.t. phi_i, theta_j and each negative."""
    phi_i = np.asarray(phi_i, dtype=float)
    s = _sigmoid(np.clip(phi_i @ theta_j, -CLAMP, CLAMP))
    g_phi = -(1.0 - s) * np.asarray(theta_j, dtype=float)
    g_pos = -(1.0 - s) * phi_i
    g_negs = []
    for t in negatives:
        sn = _sigmoid(np.clip(phi_i @ t, -CLAMP, CLAMP))
        g_phi = g_phi + sn * np.asarray(t, dtype=float)
        g_negs.append(sn * phi_i)
    return g_phi, g_pos, g_negs


# -- negative sampling --------------------------------------------------------


def context_frequency(g: Graph) -> np.ndarray:
    """Degree on the undirected view, floored at 1."""
    return np.maximum(g.undirected_view().out_degree(), 1)


class NegativeSampler:
    """Node distribution proportional to ``frequency ** power``.

    :meth:`from_graph` uses :func:`context_frequency` as a proxy for how
    often a node appears as a context.
    """

    def __init__(self, frequency, power=0.75):
        f = np.asarray(frequency, dtype=np.float64) ** power
        if np.any(f <= 0):
            raise ValueError("every node needs positive sampling mass")
        self.probs = f / f.sum()
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0

    @classmethod
    def from_graph(cls, g: Graph, power=0.75):
        return cls(context_frequency(g), power)

    def sample(self, rng, size):
        return np.searchsorted(self.cum, rng.random(size), side="right")


# -- kernels -------------------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _sig(x):
    if x > CLAMP:
        x = CLAMP
    elif x < -CLAMP:
        x = -CLAMP
    return 1.0 / (1.0 + np.exp(-x)), x


@numba.njit(cache=True)
def _draw(cum):
    r = np.random.random()
    a, b = 0, len(cum) - 1
    while a < b:
        m = (a + b) // 2
        if cum[m] <= r:
            a = m + 1
        else:
            b = m
    return a


@numba.njit(cache=True)
def _ns_range(phi, theta, src, ctx, lo, hi, cum, k, lr0, min_lr, done, total, seed):
    np.random.seed(seed)
    d = phi.shape[1]
    neu = np.empty(d)
    loss = 0.0
    for t in range(lo, hi):
        lr = lr0 * (1.0 - (done + t) / total)
        if lr < min_lr:
            lr = min_lr
        i = src[t]
        for x in range(d):
            neu[x] = 0.0
        for s in range(k + 1):
            if s == 0:
                c = ctx[t]
                label = 1.0
            else:
                c = _draw(cum)
                if c == ctx[t]:
                    continue
                label = 0.0
            f = 0.0
            for x in range(d):
                f += phi[i, x] * theta[c, x]
            sg, fc = _sig(f)
            if label == 1.0:
                loss += np.log1p(np.exp(-fc))
            else:
                loss += np.log1p(np.exp(fc))
            g = (label - sg) * lr
            for x in range(d):
                neu[x] += g * theta[c, x]
                theta[c, x] += g * phi[i, x]
        for x in range(d):
            phi[i, x] += neu[x]
    return loss


@numba.njit(cache=True, parallel=True)
def _ns_async(phi, theta, src, ctx, cum, k, lr0, min_lr, done, total, seed, workers):
    n = len(src)
    losses = np.zeros(workers)
    step = (n + workers - 1) // workers
    for w in numba.prange(workers):
        lo = w * step
        hi = min(n, lo + step)
        if lo < hi:
            losses[w] = _ns_range(phi, theta, src, ctx, lo, hi, cum, k, lr0, min_lr,
                                  done, total, seed ^ (w + 1))
    return losses.sum()


@numba.njit(cache=True)
def _hs_range(phi, psi, src, ctx, codes, points, code_len, lr0, min_lr, done, total):
    d = phi.shape[1]
    neu = np.empty(d)
    loss = 0.0
    for t in range(len(src)):
        lr = lr0 * (1.0 - (done + t) / total)
        if lr < min_lr:
            lr = min_lr
        i = src[t]
        c = ctx[t]
        for x in range(d):
            neu[x] = 0.0
        for l in range(code_len[c]):
            p = points[c, l]
            f = 0.0
            for x in range(d):
                f += phi[i, x] * psi[p, x]
            sg, fc = _sig(f)
            label = 1.0 - codes[c, l]
            if label == 1.0:
                loss += np.log1p(np.exp(-fc))
            else:
                loss += np.log1p(np.exp(fc))
            g = (label - sg) * lr
            for x in range(d):
                neu[x] += g * psi[p, x]
                psi[p, x] += g * phi[i, x]
        for x in range(d):
            phi[i, x] += neu[x]
    return loss


# -- training ------------------------------------------------------------------


def init_embeddings(node_count, dim, seed):
    rng = np.random.default_rng(chunk_seed(seed, 0x1417))
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=(node_count, dim))


def _check_finite(mat, lr, step):
    if not np.all(np.isfinite(mat)):
        row = int(np.flatnonzero(~np.isfinite(mat).all(axis=1))[0])
        raise TrainingError(f"non-finite value in embedding row {row}", learning_rate=lr, step=step)


def train(stream: PairStream, g: Graph, cfg: TrainConfig, sampler: NegativeSampler | None = None) -> EmbeddingSet:
    """SGNS by SGD with linearly decaying learning rate.

    ``cfg.threads == 0`` is single-threaded and bit-reproducible; with
    ``threads > 0`` workers update the shared matrices without locking.
    """
    if cfg.objective == "hierarchical-softmax":
        return train_hsoftmax(stream, g, cfg)
    if len(stream) == 0:
        raise ValueError("empty pair stream")
    n = g.node_count
    sampler = sampler or NegativeSampler.from_graph(g)
    phi = init_embeddings(n, cfg.dim, cfg.seed)
    theta = phi if cfg.shared else np.zeros((n, cfg.dim))
    total = float(cfg.epochs * len(stream))
    done = 0
    losses = []
    if cfg.threads > 0:
        numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    for epoch in range(cfg.epochs):
        epoch_loss = 0.0
        for b, (src, ctx) in enumerate(stream.batches()):
            seed = chunk_seed(cfg.seed, epoch, b)
            if cfg.threads > 0:
                epoch_loss += _ns_async(phi, theta, src, ctx, sampler.cum, cfg.negatives, cfg.lr,
                                        cfg.min_lr, done, total, seed, cfg.threads)
            else:
                epoch_loss += _ns_range(phi, theta, src, ctx, 0, len(src), sampler.cum, cfg.negatives,
                                        cfg.lr, cfg.min_lr, done, total, seed)
            done += len(src)
            _check_finite(phi, cfg.lr * max(0.0, 1 - done / total), done)
            if not cfg.shared:
                _check_finite(theta, cfg.lr * max(0.0, 1 - done / total), done)
        losses.append(epoch_loss / len(stream))
    return EmbeddingSet(phi, None if cfg.shared else theta, g.ids, losses)


# -- hierarchical softmax ------------------------------------------------------


@dataclass(frozen=True)
class HuffmanTree:
    """Binary Huffman tree over leaves ``0..n-1`` with ``n - 1`` internal nodes.

    ``points[i, :code_len[i]]`` are the internal nodes on the root-to-leaf
    path of leaf ``i`` and ``codes`` the branch taken at each (0 or 1).
    """

    codes: np.ndarray
    points: np.ndarray
    code_len: np.ndarray

    @property
    def internal_count(self) -> int:
        return len(self.code_len) - 1


def build_huffman(counts) -> HuffmanTree:
    counts = np.asarray(counts, dtype=np.float64)
    n = len(counts)
    if n < 2:
        raise ValueError("hierarchical softmax needs at least two nodes")
    heap = [(float(c), i) for i, c in enumerate(counts)]
    heapq.heapify(heap)
    parent = np.empty(2 * n - 1, dtype=np.int64)
    branch = np.zeros(2 * n - 1, dtype=np.int8)
    nxt = n
    while len(heap) > 1:
        c1, a = heapq.heappop(heap)
        c2, b = heapq.heappop(heap)
        parent[a], branch[a] = nxt, 0
        parent[b], branch[b] = nxt, 1
        heapq.heappush(heap, (c1 + c2, nxt))
        nxt += 1
    root = 2 * n - 2
    paths = []
    for leaf in range(n):
        pts, cds = [], []
        node = leaf
        while node != root:
            pts.append(parent[node] - n)
            cds.append(branch[node])
            node = parent[node]
        paths.append((pts[::-1], cds[::-1]))
    depth = max(len(p) for p, _ in paths)
    points = np.zeros((n, depth), dtype=np.int64)
    codes = np.zeros((n, depth), dtype=np.float64)
    code_len = np.zeros(n, dtype=np.int64)
    for leaf, (pts, cds) in enumerate(paths):
        code_len[leaf] = len(pts)
        points[leaf, :len(pts)] = pts
        codes[leaf, :len(cds)] = cds
    return HuffmanTree(codes, points, code_len)


def hs_leaf_probabilities(tree: HuffmanTree, phi_i, psi) -> np.ndarray:
    """Probability of every leaf as context of a source with vector ``phi_i``."""
    n = len(tree.code_len)
    dots = psi @ phi_i
    out = np.empty(n)
    for leaf in range(n):
        L = tree.code_len[leaf]
        pts = tree.points[leaf, :L]
        sign = 1.0 - 2.0 * tree.codes[leaf, :L]
        out[leaf] = np.prod(_sigmoid(sign * dots[pts]))
    return out


def train_hsoftmax(stream: PairStream, g: Graph, cfg: TrainConfig) -> EmbeddingSet:
    """Hierarchical-softmax skip-gram; only the source matrix is returned."""
    if cfg.shared:
        raise ValueError("hierarchical softmax requires shared=False")
    if len(stream) == 0:
        raise ValueError("empty pair stream")
    tree = build_huffman(context_frequency(g))
    phi = init_embeddings(g.node_count, cfg.dim, cfg.seed)
    psi = np.zeros((tree.internal_count, cfg.dim))
    total = float(cfg.epochs * len(stream))
    done = 0
    losses = []
    for _ in range(cfg.epochs):
        epoch_loss = 0.0
        for src, ctx in stream.batches():
            epoch_loss += _hs_range(phi, psi, src, ctx, tree.codes, tree.points, tree.code_len,
                                    cfg.lr, cfg.min_lr, done, total)
            done += len(src)
            _check_finite(phi, cfg.lr * max(0.0, 1 - done / total), done)
        losses.append(epoch_loss / len(stream))
    return EmbeddingSet(phi, None, g.ids, losses)


# -- scoring ------------------------------------------------------------------

SOURCE_SOURCE = "source-source"
SOURCE_CONTEXT = "source-context"


def score_pairs(e: EmbeddingSet, u, v, mode=SOURCE_SOURCE) -> np.ndarray:
    """Sigmoid of the inner product for each (u[k], v[k]) pair."""
    u = np.asarray(u)
    v = np.asarray(v)
    if mode == SOURCE_SOURCE:
        right = e.phi
    elif mode == SOURCE_CONTEXT:
        if e.theta is None:
            raise ValueError("source-context scoring needs a context matrix")
        right = e.theta
    else:
        raise ValueError(f"unknown scoring mode {mode!r}")
    dots = np.einsum("ij,ij->i", e.phi[u], right[v])
    return _sigmoid(np.clip(dots, -CLAMP, CLAMP))


def score_pair(e: EmbeddingSet, u: int, v: int, mode=SOURCE_SOURCE) -> float:
    return float(score_pairs(e, [u], [v], mode)[0])


def concat_normalized(first: EmbeddingSet, second: EmbeddingSet) -> EmbeddingSet:
    """Row-wise L2-normalize both source matrices and concatenate them."""

    def unit(m):
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)

    return EmbeddingSet(np.hstack([unit(first.phi), unit(second.phi)]), None, first.ids)
