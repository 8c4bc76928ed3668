#!/usr/bin/env python3
"""Writes MNIST IDX files from the 5,000-digit CSV shipped in data/.

The CSV (784 pixel columns then the label, grouped by class) comes from the
mlxtend package. Samples are interleaved class by class so every prefix is
balanced, then split into a train and a test file pair.
"""

import argparse
import csv
import gzip
import struct
from pathlib import Path


def write_images(path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))


def write_labels(path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--train", type=int, default=4000)
    args = parser.parse_args()

    by_class = {}
    with gzip.open(args.csv, "rt", newline="") as f:
        for record in csv.reader(f):
            values = [int(v) for v in record]
            if len(values) != 785 or not all(0 <= v <= 255 for v in values[:784]):
                raise SystemExit("unexpected row in " + str(args.csv))
            by_class.setdefault(values[784], []).append((values[:784], values[784]))

    interleaved = []
    depth = max(len(v) for v in by_class.values())
    for k in range(depth):
        for label in sorted(by_class):
            if k < len(by_class[label]):
                interleaved.append(by_class[label][k])
    if not 0 < args.train < len(interleaved):
        raise SystemExit("--train must leave a nonempty test split")

    args.out.mkdir(parents=True, exist_ok=True)
    train, test = interleaved[: args.train], interleaved[args.train :]
    write_images(args.out / "train-images-idx3-ubyte", train)
    write_labels(args.out / "train-labels-idx1-ubyte", train)
    write_images(args.out / "t10k-images-idx3-ubyte", test)
    write_labels(args.out / "t10k-labels-idx1-ubyte", test)
    print(f"{len(train)} train / {len(test)} test samples -> {args.out}")


if __name__ == "__main__":
    main()
