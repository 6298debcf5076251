"""Five-fold node classification micro/macro F1 for Max-Vote and embedding methods.

With no input, runs on a planted-partition fixture with block labels.
"""

import argparse

import numpy as np

from ctxembed.evaluation import classify_cv, load_labels, make_labels, max_vote_cv
from ctxembed.graph import Graph, load_edge_list
from ctxembed.methods import MethodConfig, embed


def planted_partition(n=300, blocks=3, p_in=0.05, p_out=0.005, seed=0):
    rng = np.random.default_rng(seed)
    block = np.arange(n) % blocks
    prob = np.where(np.equal.outer(block, block), p_in, p_out)
    adj = np.triu(rng.random((n, n)) < prob, 1)
    # a chain through each block keeps every node attached
    adj[np.arange(n - blocks), np.arange(blocks, n)] = True
    src, dst = np.nonzero(adj)
    g = Graph.from_edges(n, src, dst, directed=False)
    return g, make_labels({v: {int(block[v])} for v in range(n)}, label_count=blocks, seed=seed)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input", help="edge-list file")
    ap.add_argument("--labels", help="node label file")
    ap.add_argument("--directed", action="store_true")
    ap.add_argument("--methods", default="maxvote,deepwalk,line1,app,netmf")
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if args.input:
        g = load_edge_list(args.input, directed=args.directed)
        labels = load_labels(args.labels, g, seed=args.seed)
    else:
        g, labels = planted_partition(seed=args.seed)
    print("method".ljust(10) + "micro_f1".rjust(12) + "macro_f1".rjust(12))
    for name in args.methods.split(","):
        if name == "maxvote":
            micro, macro = max_vote_cv(g, labels, seed=args.seed)
        elif name == "netmf" and g.directed:
            continue
        else:
            micro, macro = classify_cv(embed(name, g, MethodConfig(dim=args.dim, seed=args.seed)).phi, labels)
        print(name.ljust(10) + f"{100 * micro:12.2f}{100 * macro:12.2f}")


if __name__ == "__main__":
    main()
