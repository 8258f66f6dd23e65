#!/usr/bin/env python3
"""Convert a KEEL .dat file (or plain comma-separated rows ending in a class
token) into the toolkit's CSV layout: header f1..fd,y with y = +1 for the
chosen normal class and -1 otherwise."""

import argparse
import csv
import sys


def read_rows(path):
    rows = []
    with open(path, newline="") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("@") or line.startswith("%"):
                continue
            fields = [t.strip() for t in line.split(",")]
            rows.append((fields[:-1], fields[-1]))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--normal", required=True, help="class token treated as normal (+1)")
    args = ap.parse_args()

    rows = read_rows(args.input)
    if not rows:
        sys.exit("no data rows in " + args.input)
    d = len(rows[0][0])
    classes = sorted({c for _, c in rows})
    if args.normal not in classes:
        sys.exit(f"class {args.normal!r} not found; classes are {classes}")

    with open(args.output, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([f"f{j + 1}" for j in range(d)] + ["y"])
        for feats, cls in rows:
            if len(feats) != d:
                sys.exit("ragged row in " + args.input)
            w.writerow([repr(float(v)) for v in feats] + [1 if cls == args.normal else -1])


if __name__ == "__main__":
    main()
