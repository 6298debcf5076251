"""Directed link-prediction AUC across methods and reversal fractions.

With no edge list, runs on the 200-node layered DAG fixture.
"""

import argparse

import numpy as np

from ctxembed.evaluation import eval_lp, make_lp_split
from ctxembed.graph import load_edge_list
from ctxembed.methods import METHODS, MethodConfig, embed
from ctxembed.synthetic import layered_dag


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input", help="directed edge-list file")
    ap.add_argument("--methods", default="deepwalk,node2vec,line1,line2,app,verse,hope")
    ap.add_argument("--reversal", default="0,0.5,1")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--dim", type=int, default=8)
    args = ap.parse_args(argv)

    methods = args.methods.split(",")
    rhos = [float(r) for r in args.reversal.split(",")]
    print("method".ljust(10) + "".join(f"rho={r:g}".rjust(16) for r in rhos))
    for name in methods:
        cells = []
        for rho in rhos:
            aucs = []
            for seed in range(args.seeds):
                g = load_edge_list(args.input, directed=True) if args.input else layered_dag(seed=seed)
                split = make_lp_split(g, 0.5, rho, seed=seed)
                e = embed(name, split.train, MethodConfig(dim=args.dim, seed=seed))
                aucs.append(eval_lp(e, split, METHODS[name].score_mode))
            cells.append(f"{np.mean(aucs):.4f}+-{np.std(aucs):.4f}")
        print(name.ljust(10) + "".join(c.rjust(16) for c in cells))


if __name__ == "__main__":
    main()
