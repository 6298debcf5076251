"""Structural profile table (reciprocity, clustering, transitivity, diameter, spectral separation).

With no arguments, profiles the bundled synthetic fixtures.
"""

import argparse

from ctxembed.graph import load_edge_list, profile
from ctxembed.synthetic import erdos_renyi, layered_dag


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("edge_lists", nargs="*", help="directed edge-list files")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    graphs = {path: load_edge_list(path, directed=True) for path in args.edge_lists}
    if not graphs:
        graphs = {"layered-dag": layered_dag(seed=args.seed),
                  "er-directed": erdos_renyi(200, 0.03, seed=args.seed, directed=True)}
    rows = {name: profile(g, seed=args.seed).as_dict() for name, g in graphs.items()}
    keys = list(next(iter(rows.values())))
    print("graph".ljust(20) + "".join(k[:14].rjust(16) for k in keys))
    for name, row in rows.items():
        cells = "".join((f"{v:.4f}" if isinstance(v, float) else str(v)).rjust(16) for v in row.values())
        print(str(name)[-20:].ljust(20) + cells)


if __name__ == "__main__":
    main()
