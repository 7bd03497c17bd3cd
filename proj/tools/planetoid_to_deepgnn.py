#!/usr/bin/env python3
"""Convert Planetoid citation files (ind.<name>.*) to a deepgnn dataset directory.

Usage: planetoid_to_deepgnn.py RAW_DIR NAME OUT_DIR

RAW_DIR holds ind.NAME.{x,y,tx,ty,allx,ally,graph,test.index}. The output
directory gets edges.txt, features.csv, labels.txt, train.txt, val.txt,
test.txt and meta.json. The split is the standard fixed one: the first
len(y) nodes train, the next 500 validate, and test.index tests.
Requires numpy and scipy.
"""

import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_part(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def convert(raw: Path, name: str, out: Path) -> dict:
    x, y, tx, ty, allx, ally, graph = (load_part(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    tx, ty = dense(tx), dense(ty)
    if name == "citeseer":
        # Some test ids have no features; they become zero rows with label 0.
        full = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = np.zeros((len(full), tx.shape[1]))
        ty_ext = np.zeros((len(full), ty.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        tx, ty = tx_ext, ty_ext

    features = np.vstack([dense(allx), tx])
    labels = np.vstack([dense(ally), ty])
    features[test_index, :] = features[test_sorted, :]
    labels[test_index, :] = labels[test_sorted, :]
    labels = labels.argmax(axis=1)
    n = features.shape[0]

    edges = set()
    for i, nbrs in graph.items():
        for j in nbrs:
            if i != j and i < n and j < n:
                edges.add((min(i, j), max(i, j)))

    train = list(range(len(dense(y))))
    val = list(range(len(train), min(len(train) + 500, n)))
    test = sorted(test_index)

    out.mkdir(parents=True, exist_ok=True)
    (out / "edges.txt").write_text("".join(f"{i} {j}\n" for i, j in sorted(edges)))
    with open(out / "features.csv", "w") as f:
        for row in features:
            f.write(",".join(repr(float(v)) if v != int(v) else str(int(v)) for v in row) + "\n")
    (out / "labels.txt").write_text("".join(f"{int(c)}\n" for c in labels))
    for split, ids in (("train", train), ("val", val), ("test", test)):
        (out / f"{split}.txt").write_text("".join(f"{i}\n" for i in ids))
    meta = {"name": name, "n": int(n), "m": len(edges), "c": int(labels.max()) + 1, "d": int(features.shape[1])}
    (out / "meta.json").write_text(json.dumps(meta) + "\n")
    return meta


def main(argv):
    if len(argv) != 4:
        print(__doc__.strip(), file=sys.stderr)
        return 1
    meta = convert(Path(argv[1]), argv[2], Path(argv[3]))
    print(json.dumps(meta))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
