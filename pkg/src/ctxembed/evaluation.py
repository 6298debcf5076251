"""Link-prediction and node-classification protocols."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import GraphFormatError
from .graph import Graph, write_edge_list
from .sgns import SOURCE_SOURCE, EmbeddingSet, score_pairs


class SplitError(ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


# -- link prediction -----------------------------------------------------------


@dataclass(frozen=True)
class LinkSplit:
    train: Graph
    positives: np.ndarray  # (m, 2) node ids
    negatives: np.ndarray  # (m, 2) node ids
    reversal: float
    holdout: float
    seed: int

    def save(self, out_dir, full: Graph) -> None:
        """Edge-list files with original ids plus a JSON manifest."""
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_edge_list(full, out / "train.txt", *self.train_edges())
        write_edge_list(full, out / "positives.txt", self.positives[:, 0], self.positives[:, 1])
        write_edge_list(full, out / "negatives.txt", self.negatives[:, 0], self.negatives[:, 1])
        manifest = {
            "directed": full.directed,
            "holdout": self.holdout,
            "reversal": self.reversal,
            "seed": self.seed,
            "positives": len(self.positives),
            "negatives": len(self.negatives),
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def train_edges(self):
        src, dst = self.train.edges()
        if not self.train.directed:
            keep = src < dst
            src, dst = src[keep], dst[keep]
        return src, dst


def _unique_edges(g: Graph):
    src, dst = g.edges()
    if not g.directed:
        keep = src < dst
        src, dst = src[keep], dst[keep]
    return src, dst


def make_lp_split(g: Graph, holdout=0.5, reversal=0.0, seed=0, keep_out_degree=False) -> LinkSplit:
    """Hold out a random fraction of edges as positives and draw balanced negatives.

    Edges are removed only while both endpoints keep at least one training
    edge (and, with ``keep_out_degree``, the source keeps an outgoing one).
    For directed graphs the first ``reversal * m`` positives ``(a, b)``
    contribute the negative ``(b, a)`` whenever that is not an edge; the
    remaining negatives are distinct uniform non-edges.
    """
    if not 0.0 < holdout < 1.0:
        raise ValueError("holdout must lie in (0, 1)")
    if not 0.0 <= reversal <= 1.0:
        raise ValueError("reversal must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = g.node_count
    src, dst = _unique_edges(g)
    m = len(src)
    target = int(round(holdout * m))
    if target < 1:
        raise SplitError("holdout leaves no test edges")

    deg = np.bincount(src, minlength=n) + np.bincount(dst, minlength=n)
    out = np.bincount(src, minlength=n) if g.directed else deg.copy()
    removed = np.zeros(m, dtype=bool)
    taken = []
    for e in rng.permutation(m):
        if len(taken) == target:
            break
        u, v = src[e], dst[e]
        if deg[u] > 1 and deg[v] > 1 and (not keep_out_degree or out[u] > 1):
            removed[e] = True
            taken.append(e)
            deg[u] -= 1
            deg[v] -= 1
            out[u] -= 1
            if not g.directed:
                out[v] -= 1
    if len(taken) < target:
        left = ~removed
        ends = np.concatenate([src[left], dst[left]])
        blocking = ends[deg[ends] == 1]
        node = int(blocking[0]) if len(blocking) else int(ends[0])
        raise SplitError(
            f"cannot hold out {target} edges without isolating a node; "
            f"node {g.label(node)} has a single remaining edge", node)

    positives = np.stack([src[taken], dst[taken]], axis=1)
    train = Graph.from_edges(n, src[~removed], dst[~removed], g.directed,
                             None if g.weights is None else _edge_weights(g)[~removed], ids=g.ids)

    edge_keys = set(g.edge_keys().tolist())
    chosen: list[tuple[int, int]] = []
    seen: set[int] = set()

    def key(a, b):
        if not g.directed and a > b:
            a, b = b, a
        return a * n + b

    if g.directed:
        for a, b in positives[: int(round(reversal * len(positives)))].tolist():
            k = b * n + a
            if k not in edge_keys and k not in seen:
                seen.add(k)
                chosen.append((b, a))
    while len(chosen) < len(positives):
        a, b = rng.integers(0, n, size=2).tolist()
        if a == b or a * n + b in edge_keys:
            continue
        k = key(a, b)
        if k in seen:
            continue
        seen.add(k)
        chosen.append((a, b) if g.directed else (min(a, b), max(a, b)))
    negatives = np.array(chosen, dtype=np.int64).reshape(-1, 2)
    return LinkSplit(train, positives.astype(np.int64), negatives, reversal, holdout, seed)


def _edge_weights(g: Graph):
    src, dst = g.edges()
    w = g.weights
    if not g.directed:
        keep = src < dst
        w = w[keep]
    return w


def check_split(g: Graph, split: LinkSplit) -> None:
    """Exhaustive scan of the split invariants; raises ``SplitError``."""
    n = g.node_count
    full = set(g.edge_keys().tolist())
    train = set(split.train.edge_keys().tolist())
    if len(split.negatives) != len(split.positives):
        raise SplitError("test split is not balanced")
    for a, b in split.positives.tolist():
        if a * n + b in train or (not g.directed and b * n + a in train):
            raise SplitError(f"positive ({a}, {b}) still in training graph")
        if a * n + b not in full:
            raise SplitError(f"positive ({a}, {b}) is not an edge")
    keys = set()
    for a, b in split.negatives.tolist():
        if a * n + b in full:
            raise SplitError(f"negative ({a}, {b}) is an edge")
        keys.add(a * n + b)
    if len(keys) != len(split.negatives):
        raise SplitError("duplicate negatives")
    deg_full = g.out_degree() + (g.in_degree() if g.directed else 0)
    deg_train = split.train.out_degree() + (split.train.in_degree() if g.directed else 0)
    isolated = np.flatnonzero((deg_full > 0) & (deg_train == 0))
    if len(isolated):
        raise SplitError(f"node {g.label(int(isolated[0]))} is isolated in the training graph",
                         int(isolated[0]))


def roc_auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg), exact for ties."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.sort(np.asarray(neg_scores, dtype=np.float64))
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("roc_auc needs non-empty score lists")
    below = np.searchsorted(neg, pos, side="left")
    not_above = np.searchsorted(neg, pos, side="right")
    twice = int(np.sum(below, dtype=np.int64) * 2 + np.sum(not_above - below, dtype=np.int64))
    return twice / (2.0 * len(pos) * len(neg))


def eval_lp(e: EmbeddingSet, split: LinkSplit, mode=SOURCE_SOURCE) -> float:
    pos = score_pairs(e, split.positives[:, 0], split.positives[:, 1], mode)
    neg = score_pairs(e, split.negatives[:, 0], split.negatives[:, 1], mode)
    return roc_auc(pos, neg)


# -- labels --------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledNodes:
    """Multi-label assignment: ``labels[v]`` is a sorted tuple of label ids."""

    labels: dict[int, tuple[int, ...]]
    label_count: int
    folds: dict[int, int]
    label_names: list[str] | None = None

    @property
    def nodes(self) -> np.ndarray:
        return np.array(sorted(self.labels), dtype=np.int64)

    def fold_nodes(self, fold: int) -> np.ndarray:
        return np.array(sorted(v for v, f in self.folds.items() if f == fold), dtype=np.int64)

    def train_nodes(self, fold: int) -> np.ndarray:
        return np.array(sorted(v for v, f in self.folds.items() if f != fold), dtype=np.int64)

    @property
    def fold_count(self) -> int:
        return max(self.folds.values()) + 1


def assign_folds(nodes, folds=5, seed=0) -> dict[int, int]:
    nodes = np.asarray(sorted(nodes))
    perm = np.random.default_rng(seed).permutation(len(nodes))
    return {int(nodes[p]): i % folds for i, p in enumerate(perm)}


def make_labels(assignments: dict[int, set | tuple | list], label_count=None, folds=5, seed=0,
                names=None) -> LabeledNodes:
    labels = {int(v): tuple(sorted(set(ls))) for v, ls in assignments.items() if ls}
    if label_count is None:
        label_count = 1 + max(max(ls) for ls in labels.values())
    return LabeledNodes(labels, label_count, assign_folds(list(labels), folds, seed), names)


def load_labels(path, g: Graph, folds=5, seed=0) -> LabeledNodes:
    """Read ``node_id label_id`` lines; nodes absent from ``g`` are skipped."""
    index = {label: i for i, label in enumerate(g.ids or [str(i) for i in range(g.node_count)])}
    raw: dict[int, set[str]] = {}
    skipped = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s[0] in "#%":
                continue
            parts = s.split()
            if len(parts) != 2:
                raise GraphFormatError(f"expected 'node label', got {len(parts)} fields", lineno)
            node = index.get(parts[0])
            if node is None:
                skipped += 1
                continue
            raw.setdefault(node, set()).add(parts[1])
    if not raw:
        raise GraphFormatError(f"{path}: no labeled nodes of the graph")
    if skipped:
        warnings.warn(f"{skipped} label lines refer to nodes outside the graph", RuntimeWarning)
    names = sorted({x for ls in raw.values() for x in ls},
                   key=lambda t: (0, int(t), t) if t.lstrip("-").isdigit() else (1, 0, t))
    lid = {name: i for i, name in enumerate(names)}
    return make_labels({v: {lid[x] for x in ls} for v, ls in raw.items()}, len(names), folds, seed, names)


# -- one-vs-rest logistic regression --------------------------------------------


@dataclass(frozen=True)
class ClassifierModel:
    weights: np.ndarray  # (label_count, d + 1); last column is the bias

    def scores(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights[:, :-1].T + self.weights[:, -1]


def _logreg_objective(w, x, y, lam):
    """Mean logistic loss plus ``lam / (2n) ||w||^2`` (bias unregularized)."""
    n = len(y)
    z = x @ w[:-1] + w[-1]
    loss = np.mean(np.logaddexp(0.0, -y * z)) + 0.5 * lam / n * (w[:-1] @ w[:-1])
    r = -y * expit(-y * z) / n
    grad = np.empty_like(w)
    grad[:-1] = x.T @ r + lam / n * w[:-1]
    grad[-1] = r.sum()
    return loss, grad


def logreg_gradient(w, x, y, lam):
    return _logreg_objective(w, x, y, lam)[1]


def fit_logreg(x, y, lam=1.0, tol=1e-5, max_iter=500) -> np.ndarray:
    """Binary L2-regularized logistic regression; ``y`` in {-1, +1}."""
    w0 = np.zeros(x.shape[1] + 1)
    res = minimize(_logreg_objective, w0, args=(x, y, lam), jac=True, method="L-BFGS-B",
                   options={"gtol": tol, "ftol": 1e-15, "maxiter": max_iter})
    return res.x


def _feature_matrix(features, nodes) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)[nodes]
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    return x


def train_logreg_ovr(features, labels: LabeledNodes, train_nodes, lam=1.0) -> ClassifierModel:
    x = _feature_matrix(features, train_nodes)
    weights = np.zeros((labels.label_count, x.shape[1] + 1))
    member = np.zeros((len(train_nodes), labels.label_count), dtype=bool)
    for r, v in enumerate(np.asarray(train_nodes).tolist()):
        member[r, list(labels.labels[v])] = True
    for c in range(labels.label_count):
        y = np.where(member[:, c], 1.0, -1.0)
        npos = int(member[:, c].sum())
        if npos == 0 or npos == len(y):
            prior = np.clip(npos / len(y), 1e-6, 1 - 1e-6)
            weights[c, -1] = np.log(prior / (1 - prior))
            continue
        weights[c] = fit_logreg(x, y, lam)
    return ClassifierModel(weights)


def top_k_labels(scores: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest scores; ties go to the smaller label id."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    return sorted(order[:k].tolist())


def f1_scores(truth: list[tuple], predicted: list, label_count: int) -> tuple[float, float]:
    """(micro, macro) F1; macro averages over all ``label_count`` labels."""
    tp = np.zeros(label_count)
    fp = np.zeros(label_count)
    fn = np.zeros(label_count)
    for t, p in zip(truth, predicted):
        t, p = set(t), set(p)
        for c in t & p:
            tp[c] += 1
        for c in p - t:
            fp[c] += 1
        for c in t - p:
            fn[c] += 1
    denom = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = 2 * tp.sum() / denom if denom > 0 else 0.0
    per = np.divide(2 * tp, 2 * tp + fp + fn, out=np.zeros(label_count), where=(2 * tp + fp + fn) > 0)
    return float(micro), float(per.mean())


def predict_and_score(model: ClassifierModel, features, labels: LabeledNodes, test_nodes):
    """Predict each test node's top-k labels (k = its true label count) and score."""
    test_nodes = np.asarray(test_nodes)
    scores = model.scores(_feature_matrix(features, test_nodes))
    truth = [labels.labels[v] for v in test_nodes.tolist()]
    predicted = [top_k_labels(s, len(t)) for s, t in zip(scores, truth)]
    return f1_scores(truth, predicted, labels.label_count)


def classify_cv(features, labels: LabeledNodes, lam=1.0) -> tuple[float, float]:
    """Mean (micro, macro) F1 over the label folds."""
    micro, macro = [], []
    for f in range(labels.fold_count):
        model = train_logreg_ovr(features, labels, labels.train_nodes(f), lam)
        mi, ma = predict_and_score(model, features, labels, labels.fold_nodes(f))
        micro.append(mi)
        macro.append(ma)
    return float(np.mean(micro)), float(np.mean(macro))


# -- Max-Vote baseline -----------------------------------------------------------


def max_vote(g: Graph, labels: LabeledNodes, train_nodes, test_nodes, seed=0) -> dict[int, list[int]]:
    """Label each test node with the k most frequent labels of its training neighbors.

    Neighborhoods ignore edge direction. Ties go to the smaller label id;
    missing labels are filled uniformly at random (without replacement)
    from the classes not yet chosen.
    """
    rng = np.random.default_rng(seed)
    und = g.undirected_view()
    known = {int(v): labels.labels[int(v)] for v in np.asarray(train_nodes).tolist()}
    out = {}
    for v in np.asarray(test_nodes).tolist():
        k = len(labels.labels[v])
        tally = np.zeros(labels.label_count, dtype=np.int64)
        for u in und.neighbors(v).tolist():
            for c in known.get(u, ()):
                tally[c] += 1
        present = np.flatnonzero(tally > 0)
        chosen = top_k_labels(tally, k) if len(present) >= k else present.tolist()
        if len(chosen) < k:
            rest = np.setdiff1d(np.arange(labels.label_count), chosen)
            chosen = sorted(chosen + rng.choice(rest, size=k - len(chosen), replace=False).tolist())
        out[v] = chosen
    return out


def max_vote_cv(g: Graph, labels: LabeledNodes, seed=0) -> tuple[float, float]:
    micro, macro = [], []
    for f in range(labels.fold_count):
        test = labels.fold_nodes(f)
        pred = max_vote(g, labels, labels.train_nodes(f), test, seed=seed + f)
        truth = [labels.labels[v] for v in test.tolist()]
        mi, ma = f1_scores(truth, [pred[v] for v in test.tolist()], labels.label_count)
        micro.append(mi)
        macro.append(ma)
    return float(np.mean(micro)), float(np.mean(macro))
