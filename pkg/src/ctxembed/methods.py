"""The embedding roster, each method a (context, optimizer, scoring) configuration."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .context import (DENSE_MATRIX_LIMIT, PPRConfig, SecondOrderConfig, WalkConfig, adjacency_pairs,
                      katz_matrix, katz_operator, netmf_matrix, node2vec_walk_pairs, ppr_pairs,
                      uniform_walk_pairs)
from .errors import NotApplicableError
from .graph import Graph
from .mf import factorize
from .sgns import (SOURCE_CONTEXT, SOURCE_SOURCE, EmbeddingSet, TrainConfig, concat_normalized,
                   train)


@dataclass(frozen=True)
class MethodConfig:
    """Hyperparameters shared by all methods; each method reads what it needs.

    ``samples = 0`` picks ``walks * walk_len * node_count`` pairs for the
    PPR and adjacency samplers, the same budget as the walk corpus.
    ``objective = ""`` uses the method's own optimizer.
    """

    dim: int = 128
    walks: int = 10
    walk_len: int = 80
    window: int = 10
    neg: int = 5
    alpha: float = 0.15
    p: float = 1.0
    q: float = 1.0
    beta: float = 0.01
    epochs: int = 1
    lr: float = 0.025
    samples: int = 0
    objective: str = ""
    seed: int = 0
    threads: int = 0

    def sample_budget(self, g: Graph) -> int:
        return self.samples or self.walks * self.walk_len * g.node_count


@dataclass(frozen=True)
class Method:
    name: str
    score_mode: str
    undirected_only: bool = False
    embeds: bool = True


METHODS = {
    m.name: m
    for m in [
        Method("deepwalk", SOURCE_SOURCE),
        Method("node2vec", SOURCE_SOURCE),
        Method("line1", SOURCE_SOURCE),
        Method("line2", SOURCE_SOURCE),
        Method("line12", SOURCE_SOURCE),
        Method("app", SOURCE_CONTEXT),
        Method("verse", SOURCE_SOURCE),
        Method("netmf", SOURCE_SOURCE, undirected_only=True),
        Method("hope", SOURCE_CONTEXT),
        Method("maxvote", SOURCE_SOURCE, embeds=False),
    ]
}


def get_method(name: str) -> Method:
    try:
        return METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}") from None


def _train_cfg(cfg: MethodConfig, shared=False, objective="negative-sampling", dim=None) -> TrainConfig:
    return TrainConfig(dim=dim or cfg.dim, epochs=cfg.epochs, negatives=cfg.neg, lr=cfg.lr,
                       shared=shared, objective=cfg.objective or objective, seed=cfg.seed,
                       threads=cfg.threads)


def _walk_cfg(g: Graph, cfg: MethodConfig, cls=WalkConfig, **extra):
    # walks stop at sink nodes of directed graphs instead of rejecting the graph
    return cls(walks_per_node=cfg.walks, walk_length=cfg.walk_len, window=min(cfg.window, cfg.walk_len),
               seed=cfg.seed, dangling="stop" if g.directed else "error", **extra)


def _line(g: Graph, cfg: MethodConfig, shared: bool, dim=None) -> EmbeddingSet:
    stream = adjacency_pairs(g, cfg.sample_budget(g), seed=cfg.seed)
    return train(stream, g, _train_cfg(cfg, shared=shared, dim=dim))


def embed(name: str, g: Graph, cfg: MethodConfig) -> EmbeddingSet:
    """Train (or factorize) the named method on ``g``."""
    method = get_method(name)
    if not method.embeds:
        raise NotApplicableError(f"{name} does not produce embeddings")
    if method.undirected_only and g.directed:
        raise NotApplicableError(f"{name} requires an undirected graph")
    if name == "deepwalk":
        stream = uniform_walk_pairs(g, _walk_cfg(g, cfg))
        return train(stream, g, _train_cfg(cfg, objective="hierarchical-softmax"))
    if name == "node2vec":
        stream = node2vec_walk_pairs(g, _walk_cfg(g, cfg, SecondOrderConfig, p=cfg.p, q=cfg.q))
        return train(stream, g, _train_cfg(cfg))
    if name in ("app", "verse"):
        ppr = PPRConfig(alpha=cfg.alpha, samples=cfg.sample_budget(g), seed=cfg.seed,
                        dangling="stop" if g.directed else "error")
        return train(ppr_pairs(g, ppr), g, _train_cfg(cfg, shared=name == "verse"))
    if name == "line1":
        return _line(g, cfg, shared=True)
    if name == "line2":
        return _line(g, cfg, shared=False)
    if name == "line12":
        half = max(1, cfg.dim // 2)
        first = _line(g, cfg, shared=True, dim=half)
        second = _line(g, replace(cfg, seed=cfg.seed + 1), shared=False, dim=max(1, cfg.dim - half))
        return concat_normalized(first, second)
    if name == "netmf":
        c = netmf_matrix(g, cfg.walk_len, cfg.window, cfg.neg)
        r = factorize(c, min(cfg.dim, g.node_count), seed=cfg.seed)
        return EmbeddingSet(r.phi, None, g.ids)
    if name == "hope":
        c = katz_matrix(g, cfg.beta) if g.node_count <= DENSE_MATRIX_LIMIT else katz_operator(g, cfg.beta)
        r = factorize(c, min(cfg.dim, g.node_count), seed=cfg.seed)
        return r.embedding(g.ids)
    raise AssertionError(name)
