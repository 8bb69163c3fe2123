#!/usr/bin/env python3
"""Convert public citation-network datasets into the bundle layout that
`kmp` loads (edges.tsv / features.bin / labels.tsv / meta.txt).

Two source formats are supported:

  content   The LINQS text pair <name>.content + <name>.cites
            (e.g. cora.content has lines "<id> <f_1..f_d> <class>").
  planetoid The pickled ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}
            files from the Planetoid repository.

Examples:
  python3 tools/convert_planetoid.py --format content \
      --content cora/cora.content --cites cora/cora.cites \
      --name cora --out data/cora
  python3 tools/convert_planetoid.py --format planetoid \
      --dir planetoid/data --name citeseer --out data/citeseer

features.bin layout: n and d as little-endian uint64, then n*d
little-endian float64 values row-major.
"""

import argparse
import pickle
import struct
import sys
from pathlib import Path


def write_features(path: Path, rows):
    n = len(rows)
    d = len(rows[0]) if n else 0
    with open(path, "wb") as f:
        f.write(struct.pack("<QQ", n, d))
        for row in rows:
            f.write(struct.pack(f"<{d}d", *row))


def row_normalize(rows):
    out = []
    for row in rows:
        s = sum(abs(v) for v in row)
        out.append([v / s for v in row] if s > 0 else list(row))
    return out


def write_bundle(out_dir: Path, name, edges, features, labels, class_names):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "edges.tsv", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")
    with open(out_dir / "labels.tsv", "w") as f:
        for i, y in enumerate(labels):
            if y is not None:
                f.write(f"{i}\t{y}\n")
    write_features(out_dir / "features.bin", features)
    with open(out_dir / "meta.txt", "w") as f:
        f.write(f"name = {name}\n")
        f.write(f"classes = {len(class_names)}\n")
        f.write("class_names = " + ",".join(str(c) for c in class_names) + "\n")
        f.write("provenance = converted by tools/convert_planetoid.py\n")
    print(f"{out_dir}: n={len(features)} d={len(features[0])} "
          f"classes={len(class_names)} edges={len(edges)}")


def convert_content(args):
    content = Path(args.content)
    cites = Path(args.cites)
    ids, features, raw_labels = [], [], []
    for line in content.read_text().splitlines():
        parts = line.strip().split()
        if not parts:
            continue
        ids.append(parts[0])
        features.append([float(v) for v in parts[1:-1]])
        raw_labels.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    class_names = sorted(set(raw_labels))
    class_index = {c: i for i, c in enumerate(class_names)}
    labels = [class_index[c] for c in raw_labels]

    edges, skipped = set(), 0
    for line in cites.read_text().splitlines():
        parts = line.strip().split()
        if len(parts) != 2:
            continue
        a, b = parts
        if a not in index or b not in index:
            skipped += 1  # citations to papers outside the content file
            continue
        u, v = index[a], index[b]
        if u != v:
            edges.add((min(u, v), max(u, v)))
    if skipped:
        print(f"note: skipped {skipped} citation lines referencing unknown ids", file=sys.stderr)

    if args.row_normalize:
        features = row_normalize(features)
    write_bundle(Path(args.out), args.name, edges, features, labels, class_names)


def load_pickle(path: Path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert_planetoid(args):
    base = Path(args.dir)
    name = args.name

    def p(suffix):
        return base / f"ind.{name}.{suffix}"

    x = load_pickle(p("x"))
    allx = load_pickle(p("allx"))
    tx = load_pickle(p("tx"))
    y = load_pickle(p("y"))
    ally = load_pickle(p("ally"))
    ty = load_pickle(p("ty"))
    graph = load_pickle(p("graph"))
    test_index = [int(line) for line in p("test.index").read_text().split()]

    del x, y  # subsumed by allx/ally
    allx = allx.todense().tolist() if hasattr(allx, "todense") else allx.tolist()
    tx = tx.todense().tolist() if hasattr(tx, "todense") else tx.tolist()
    ally = ally.tolist() if hasattr(ally, "tolist") else ally
    ty = ty.tolist() if hasattr(ty, "tolist") else ty

    n = len(allx) + len(tx)
    d = len(allx[0])
    features = [[0.0] * d for _ in range(n)]
    onehot = [[0.0] for _ in range(n)]
    for i, row in enumerate(allx):
        features[i] = list(row)
        onehot[i] = list(ally[i])
    # test rows land at their (possibly shuffled) test.index positions
    lo = min(test_index)
    hi = max(test_index)
    for pos, idx in enumerate(test_index):
        features[idx] = list(tx[pos])
        onehot[idx] = list(ty[pos])
    # citeseer has isolated test ids missing from test.index: rows between
    # lo..hi not listed keep zero features and no label
    listed = set(test_index)
    labels = []
    for i in range(n):
        row = onehot[i]
        if len(row) <= 1 or sum(row) == 0 or (lo <= i <= hi and i not in listed):
            labels.append(None)
        else:
            labels.append(max(range(len(row)), key=lambda j: row[j]))

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    if args.row_normalize:
        features = row_normalize(features)
    num_classes = len(onehot[0])
    write_bundle(Path(args.out), name, edges, features, labels, list(range(num_classes)))


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--format", choices=["content", "planetoid"], required=True)
    ap.add_argument("--name", required=True, help="dataset name (cora, citeseer, ...)")
    ap.add_argument("--out", required=True, help="output bundle directory")
    ap.add_argument("--content", help="<name>.content path (content format)")
    ap.add_argument("--cites", help="<name>.cites path (content format)")
    ap.add_argument("--dir", help="directory holding ind.<name>.* (planetoid format)")
    ap.add_argument("--no-row-normalize", dest="row_normalize", action="store_false",
                    help="keep raw feature values instead of L1 row normalization")
    args = ap.parse_args()

    if args.format == "content":
        if not args.content or not args.cites:
            ap.error("content format needs --content and --cites")
        convert_content(args)
    else:
        if not args.dir:
            ap.error("planetoid format needs --dir")
        convert_planetoid(args)


if __name__ == "__main__":
    main()
