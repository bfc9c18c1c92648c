#!/usr/bin/env python3
"""Write MNIST-format IDX files from a CSV of flattened digits.

The CSV holds one sample per row: 784 pixel values in 0..255 followed by the
label. The 5000-digit sample shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz) is the intended input when the full
MNIST files cannot be downloaded:

    pip download mlxtend==0.24.0 --no-deps -d /tmp/pd
    python3 tools/prepare_mnist_subset.py --wheel /tmp/pd/mlxtend-0.24.0-py3-none-any.whl \
        --out "$FULLNORM_DATA_DIR/mnist"

Per class, the last --test-per-class rows become the test split.
"""

import argparse
import csv
import gzip
import io
import os
import struct
import sys
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(args):
    if args.wheel:
        with zipfile.ZipFile(args.wheel) as zf:
            raw = zf.read(MEMBER)
    else:
        with open(args.csv, "rb") as f:
            raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    rows = []
    for rec in csv.reader(io.StringIO(raw.decode("ascii"))):
        if not rec:
            continue
        vals = [int(float(v)) for v in rec]
        if len(vals) != 785:
            sys.exit(f"expected 785 columns, got {len(vals)}")
        pixels, label = vals[:784], vals[784]
        if not 0 <= label <= 9 or min(pixels) < 0 or max(pixels) > 255:
            sys.exit("value out of range")
        rows.append((pixels, label))
    return rows


def write_idx(path_images, path_labels, rows):
    with open(path_images, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))
    with open(path_labels, "wb") as f:
        f.write(struct.pack(">II", 2049, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--wheel", help="mlxtend wheel containing " + MEMBER)
    src.add_argument("--csv", help="CSV (optionally gzipped) with 784 pixels + label per row")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--test-per-class", type=int, default=100)
    args = ap.parse_args()

    by_label = {}
    for pixels, label in read_rows(args):
        by_label.setdefault(label, []).append((pixels, label))
    train, test = [], []
    for label in sorted(by_label):
        group = by_label[label]
        cut = max(0, len(group) - args.test_per_class)
        train += group[:cut]
        test += group[cut:]

    os.makedirs(args.out, exist_ok=True)
    write_idx(os.path.join(args.out, "train-images-idx3-ubyte"),
              os.path.join(args.out, "train-labels-idx1-ubyte"), train)
    write_idx(os.path.join(args.out, "t10k-images-idx3-ubyte"),
              os.path.join(args.out, "t10k-labels-idx1-ubyte"), test)
    print(f"train {len(train)}, test {len(test)} -> {args.out}")


if __name__ == "__main__":
    main()
