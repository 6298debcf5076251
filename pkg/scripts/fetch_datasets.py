"""Download Cora and PubMed and convert them to edge-list and label files.

Writes ``<data>/<name>/edges.txt`` (``src dst`` per line, directed) and
``<data>/<name>/labels.txt`` (``node label`` per line).  Archive checksums
are recorded in ``<data>/checksums.json`` on first download and verified on
every later one; pass ``--sha256 NAME=HEX`` to pin a known digest instead.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
import tarfile
import urllib.request
from pathlib import Path

SOURCES = {
    "cora": "http://konect.cc/files/download.tsv.subelj_cora.tar.bz2",
    "pubmed": "https://linqs-data.soe.ucsc.edu/public/Pubmed-Diabetes.tgz",
}


def sha256(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def fetch(url: str, timeout: float) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def members(blob: bytes) -> dict[str, bytes]:
    with tarfile.open(fileobj=io.BytesIO(blob)) as tar:
        return {Path(m.name).name: tar.extractfile(m).read() for m in tar.getmembers() if m.isfile()}


def convert_cora(files: dict[str, bytes]) -> tuple[list[str], list[str]]:
    """KONECT layout: ``out.*`` holds 1-based ``citing cited`` rows, ``ent.*class*`` one label per node."""
    edge_name = next(n for n in files if n.startswith("out."))
    label_name = next(n for n in files if n.startswith("ent.") and "class" in n)
    edges = []
    for line in files[edge_name].decode().splitlines():
        parts = line.split()
        if len(parts) >= 2 and not line.startswith("%"):
            edges.append(f"{parts[0]} {parts[1]}")
    labels = [f"{i} {lab.strip()}" for i, lab in enumerate(files[label_name].decode().splitlines(), start=1)
              if lab.strip()]
    return edges, labels


def convert_pubmed(files: dict[str, bytes]) -> tuple[list[str], list[str]]:
    """LINQS layout: ``id paper:cited | paper:citing`` rows; ``label=k`` in the node table."""
    edges = []
    for line in files["Pubmed-Diabetes.DIRECTED.cites.tab"].decode().splitlines()[2:]:
        parts = line.split("\t")
        if len(parts) == 4:
            cited, citing = parts[1].removeprefix("paper:"), parts[3].removeprefix("paper:")
            edges.append(f"{citing} {cited}")
    labels = []
    for line in files["Pubmed-Diabetes.NODE.paper.tab"].decode().splitlines()[2:]:
        parts = line.split("\t")
        if len(parts) > 1 and parts[1].startswith("label="):
            labels.append(f"{parts[0]} {parts[1].removeprefix('label=')}")
    return edges, labels


CONVERTERS = {"cora": convert_cora, "pubmed": convert_pubmed}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help=f"subset of {sorted(SOURCES)}; default all")
    ap.add_argument("--data", default=os.environ.get("CTXEMBED_DATA", "data"))
    ap.add_argument("--archive", action="append", default=[], metavar="NAME=PATH",
                    help="use a local copy of the archive instead of downloading")
    ap.add_argument("--sha256", action="append", default=[], metavar="NAME=HEX")
    ap.add_argument("--timeout", type=float, default=60.0)
    args = ap.parse_args(argv)
    names = args.names or sorted(SOURCES)
    if set(names) - set(SOURCES):
        ap.error(f"unknown dataset(s): {sorted(set(names) - set(SOURCES))}")

    root = Path(args.data)
    root.mkdir(parents=True, exist_ok=True)
    ledger_path = root / "checksums.json"
    ledger = json.loads(ledger_path.read_text()) if ledger_path.exists() else {}
    ledger.update(dict(s.split("=", 1) for s in args.sha256))
    local = dict(a.split("=", 1) for a in args.archive)

    status = 0
    for name in names:
        try:
            blob = Path(local[name]).read_bytes() if name in local else fetch(SOURCES[name], args.timeout)
        except OSError as exc:
            print(f"{name}: download failed: {exc}", file=sys.stderr)
            status = 1
            continue
        digest = sha256(blob)
        if name in ledger and ledger[name] != digest:
            print(f"{name}: checksum mismatch, expected {ledger[name]}, got {digest}", file=sys.stderr)
            status = 1
            continue
        ledger[name] = digest
        edges, labels = CONVERTERS[name](members(blob))
        out = root / name
        out.mkdir(exist_ok=True)
        (out / "edges.txt").write_text("\n".join(edges) + "\n")
        (out / "labels.txt").write_text("\n".join(labels) + "\n")
        print(f"{name}: {len(edges)} edges, {len(labels)} labels, sha256 {digest}")
    ledger_path.write_text(json.dumps(ledger, indent=2, sort_keys=True) + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
