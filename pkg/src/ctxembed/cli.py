"""``ctxembed``: one entry point for profiling, splitting, embedding, evaluation and oracle checks."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .context import (PPRConfig, WalkConfig, expected_cooccurrence, first_order_table, ppr_pair_oracle,
                      ppr_pairs, second_order_table, uniform_walk_pairs)
from .errors import UsageError
from .evaluation import (check_split, classify_cv, eval_lp, load_labels, make_lp_split,
                         max_vote_cv)
from .graph import Graph, load_edge_list, profile, reciprocity, write_id_map
from .methods import METHODS, MethodConfig, embed, get_method
from .synthetic import erdos_renyi, layered_dag

TASKS = ("stats", "split", "embed", "eval-lp", "eval-nc", "verify")
EMBED_TASKS = ("embed", "eval-lp", "eval-nc")

# oracle tolerances enforced by ``verify``
EQ3_TOLERANCE = 0.01
PPR_TOLERANCE = 0.01
SYMMETRY_TOLERANCE = 1e-12


@dataclass
class RunConfig:
    task: str
    method: str | None = None
    input: str | None = None
    labels: str | None = None
    directed: bool = False
    holdout: float = 0.5
    reversal: float = 0.0
    folds: int = 5
    lam: float = 1.0
    samples: int = 1_000_000
    seed: int = 0
    threads: int = 0
    out: str = "out"
    params: MethodConfig = field(default_factory=MethodConfig)

    def validate(self) -> None:
        if self.task not in TASKS:
            raise UsageError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        if self.task in EMBED_TASKS and not self.method:
            raise UsageError(f"task {self.task} needs --method")
        if self.method:
            m = get_method(self.method)
            if not m.embeds and self.task != "eval-nc":
                raise UsageError(f"{self.method} is only available for eval-nc")
            if m.undirected_only and self.directed and self.task in EMBED_TASKS:
                raise UsageError(f"{self.method} requires an undirected graph (drop --directed)")
        if self.task != "verify" and not self.input:
            raise UsageError(f"task {self.task} needs --input")
        if self.task == "eval-nc" and not self.labels:
            raise UsageError("eval-nc needs --labels")
        if self.threads < 0:
            raise UsageError("--threads must be >= 0")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- reports -------------------------------------------------------------------


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f"non-finite metric value {value}")
        return f"{float(value):.6f}"
    return str(value)


def report_body(metrics: dict) -> str:
    return "".join(f"{k}={_format(metrics[k])}\n" for k in sorted(metrics))


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def emit_report(metrics: dict, path, config: dict | None = None) -> str:
    """Write ``path`` (sorted ``key=value`` lines) and ``path`` with ``.json`` suffix.

    The JSON file adds the resolved run configuration, the toolkit version
    and a timestamp; the text body is deterministic.
    """
    path = Path(path)
    body = report_body(metrics)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(body)
    record = {
        "metrics": {k: _plain(metrics[k]) for k in sorted(metrics)},
        "config": config or {},
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path.with_suffix(".json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return body


# -- tasks ---------------------------------------------------------------------


def _load(cfg: RunConfig) -> Graph:
    return load_edge_list(cfg.input, directed=cfg.directed)


def run_stats(cfg: RunConfig) -> dict:
    g = _load(cfg)
    metrics = {"node_count": g.node_count, "edge_count": g.num_edges, "directed": g.directed}
    metrics.update(profile(g, seed=cfg.seed).as_dict())
    return metrics


def run_split(cfg: RunConfig) -> dict:
    g = _load(cfg)
    split = make_lp_split(g, cfg.holdout, cfg.reversal, cfg.seed)
    check_split(g, split)
    split.save(cfg.out, g)
    write_id_map(g, Path(cfg.out) / "ids.txt")
    return {"positives": len(split.positives), "negatives": len(split.negatives),
            "train_edges": split.train.num_edges, "holdout": cfg.holdout, "reversal": cfg.reversal}


def run_embed(cfg: RunConfig) -> dict:
    g = _load(cfg)
    e = embed(cfg.method, g, cfg.params)
    path = Path(cfg.out) / f"{cfg.method}.emb"
    path.parent.mkdir(parents=True, exist_ok=True)
    e.save(path)
    metrics = {"node_count": e.node_count, "dim": e.dim, "has_context": e.theta is not None}
    if e.losses:
        metrics["final_loss"] = e.losses[-1]
    return metrics


def run_eval_lp(cfg: RunConfig) -> dict:
    g = _load(cfg)
    split = make_lp_split(g, cfg.holdout, cfg.reversal, cfg.seed)
    check_split(g, split)
    e = embed(cfg.method, split.train, cfg.params)
    mode = METHODS[cfg.method].score_mode
    return {"auc": eval_lp(e, split, mode), "positives": len(split.positives),
            "reversal": cfg.reversal, "holdout": cfg.holdout, "score_mode": mode}


def run_eval_nc(cfg: RunConfig) -> dict:
    g = _load(cfg)
    labels = load_labels(cfg.labels, g, folds=cfg.folds, seed=cfg.seed)
    if cfg.method == "maxvote":
        micro, macro = max_vote_cv(g, labels, seed=cfg.seed)
    else:
        e = embed(cfg.method, g, cfg.params)
        micro, macro = classify_cv(e.phi, labels, lam=cfg.lam)
    return {"micro_f1": micro, "macro_f1": macro, "labeled_nodes": len(labels.labels),
            "label_count": labels.label_count, "folds": labels.fold_count}


def _linf_gap(counts: np.ndarray, oracle: np.ndarray) -> float:
    return float(np.abs(counts / counts.sum() - oracle).max())


def eq3_gap(g: Graph, pairs: int, window: int, seed: int) -> float:
    """L-inf gap between empirical window-pair frequencies and the closed form."""
    und = g if not g.directed else g.undirected_view()
    walk_len = 250
    per_walk = 2 * window * walk_len
    walks = max(1, round(pairs / (per_walk * und.node_count)))
    stream = uniform_walk_pairs(und, WalkConfig(walks, walk_len, window, seed))
    return _linf_gap(stream.pair_counts(), expected_cooccurrence(und, window))


def ppr_tv(g: Graph, alpha: float, samples: int, seed: int) -> float:
    dangling = "stop" if g.directed else "error"
    stream = ppr_pairs(g, PPRConfig(alpha=alpha, samples=samples, seed=seed, dangling=dangling))
    counts = stream.pair_counts()
    oracle = ppr_pair_oracle(g, alpha, 64, dangling=dangling)
    return 0.5 * float(np.abs(counts / counts.sum() - oracle).sum())


def tables_equal(tables) -> bool:
    first = tables[0]
    return all(t == first for t in tables[1:])


def second_order_matches_first(g: Graph, p, q) -> bool:
    first = first_order_table(g)
    return all(dist == first[v] for (_, v), dist in second_order_table(g, p, q).items())


def run_verify(cfg: RunConfig) -> tuple[dict, bool]:
    g = _load(cfg) if cfg.input else erdos_renyi(10, 0.4, seed=cfg.seed)
    seed = cfg.seed
    m = {}
    checks = {}
    window = 2
    m["eq3_linf_gap"] = eq3_gap(g, cfg.samples, window, seed)
    m["eq3_linf_gap_small"] = eq3_gap(g, max(1, cfg.samples // 100), window, seed)
    checks["eq3"] = m["eq3_linf_gap"] < EQ3_TOLERANCE and m["eq3_linf_gap"] < m["eq3_linf_gap_small"]
    for alpha in (0.15, 0.5):
        key = f"ppr_tv_alpha_{alpha:g}"
        m[key] = ppr_tv(g, alpha, cfg.samples, seed)
        checks[key] = m[key] < PPR_TOLERANCE
    directed = g if g.directed else _orient(g)
    m["prop1_asymmetry"] = float(np.abs((lambda x: x - x.T)(expected_cooccurrence(directed, window))).max())
    checks["prop1"] = m["prop1_asymmetry"] < SYMMETRY_TOLERANCE
    # zero-reciprocity premise: use the input if it holds, else an acyclic orientation of it
    zero_r = g if g.directed and reciprocity(g) == 0 else _orient(g)
    checks["prop2"] = tables_equal([second_order_table(zero_r, p, 1) for p in (0.25, 1, 4)])
    fixture = layered_dag((4, 4, 4), groups=2, p_in=0.6, seed=seed)
    checks["prop3"] = all(second_order_matches_first(fixture, p, q)
                          for p in (0.25, 1, 4) for q in (0.25, 1, 4))
    for name, ok in checks.items():
        m[f"check_{name}"] = "pass" if ok else "fail"
    return m, all(checks.values())


def _orient(g: Graph) -> Graph:
    """Acyclic orientation (low id -> high id) of the undirected view."""
    src, dst = g.undirected_view().edges()
    keep = src < dst
    return Graph.from_edges(g.node_count, src[keep], dst[keep], directed=True, ids=g.ids)


def dispatch(cfg: RunConfig) -> tuple[dict, bool]:
    cfg.validate()
    if cfg.threads:
        cfg.params = dataclasses.replace(cfg.params, threads=cfg.threads)
    if cfg.task == "verify":
        return run_verify(cfg)
    runner = {"stats": run_stats, "split": run_split, "embed": run_embed,
              "eval-lp": run_eval_lp, "eval-nc": run_eval_nc}[cfg.task]
    return runner(cfg), True


# -- argument parsing ------------------------------------------------------------


def _param(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctxembed", description=__doc__)
    ap.add_argument("task_pos", nargs="?", choices=TASKS, metavar="TASK", help=f"one of {', '.join(TASKS)}")
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--method", choices=sorted(METHODS))
    ap.add_argument("--input", help="edge-list file")
    ap.add_argument("--labels", help="node label file (eval-nc)")
    ap.add_argument("--directed", action="store_true", help="treat the edge list as directed")
    ap.add_argument("--dim", type=int)
    ap.add_argument("--walks", type=int, help="walks per node")
    ap.add_argument("--walk-len", type=int)
    ap.add_argument("--window", type=int)
    ap.add_argument("--neg", type=int, help="negative samples per pair")
    ap.add_argument("--alpha", type=float, help="PPR restart probability")
    ap.add_argument("--p", type=float, help="node2vec return parameter")
    ap.add_argument("--q", type=float, help="node2vec in-out parameter")
    ap.add_argument("--beta", type=float, help="Katz decay")
    ap.add_argument("--holdout", type=float, default=0.5)
    ap.add_argument("--reversal", type=float, default=0.0, help="fraction of reversed test negatives")
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--samples", type=int, default=1_000_000, help="Monte Carlo samples for verify")
    ap.add_argument("--seed", type=int, help="defaults to $CTXEMBED_SEED, then 0")
    ap.add_argument("--threads", type=int, default=0, help="0 = single-threaded, bit-reproducible")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                    help="extra method setting (epochs, lr, samples, objective) or lam")
    return ap


_FLAG_FIELDS = {"dim": "dim", "walks": "walks", "walk_len": "walk_len", "window": "window", "neg": "neg",
                "alpha": "alpha", "p": "p", "q": "q", "beta": "beta"}


def config_from_args(args) -> RunConfig:
    task = args.task or args.task_pos
    if task is None:
        raise UsageError("no task given")
    if args.task and args.task_pos and args.task != args.task_pos:
        raise UsageError("conflicting tasks")
    seed = args.seed
    if seed is None:
        env = os.environ.get("CTXEMBED_SEED")
        try:
            seed = int(env) if env else 0
        except ValueError:
            raise UsageError(f"CTXEMBED_SEED must be an integer, got {env!r}") from None
    overrides = {f: getattr(args, a) for a, f in _FLAG_FIELDS.items() if getattr(args, a) is not None}
    lam = 1.0
    fields = {f.name: f.type for f in dataclasses.fields(MethodConfig)}
    defaults = MethodConfig()
    for key, value in args.param:
        if key == "lam":
            lam = float(value)
            continue
        if key not in fields or key in ("seed", "threads"):
            raise UsageError(f"unknown --param {key!r}")
        kind = type(getattr(defaults, key))
        overrides[key] = kind(value)
    params = MethodConfig(**overrides, seed=seed, threads=args.threads)
    return RunConfig(task=task, method=args.method, input=args.input, labels=args.labels,
                     directed=args.directed, holdout=args.holdout, reversal=args.reversal,
                     folds=args.folds, lam=lam, samples=args.samples, seed=seed,
                     threads=args.threads, out=args.out, params=params)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        metrics, ok = dispatch(cfg)
        body = emit_report(metrics, Path(cfg.out) / f"{cfg.task}.txt", cfg.as_dict())
    except UsageError as exc:
        print(f"ctxembed: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"ctxembed: error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(body)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
