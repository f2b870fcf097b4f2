#!/usr/bin/env python3
"""Export scikit-learn's bundled 8x8 handwritten digits as IDX files.

Pixels (0..16) are rescaled to 0..255. The split is stratified and seeded
so the generated files are reproducible.
"""
import argparse
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split


def write_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "digits"))
    ap.add_argument("--test-size", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    digits = load_digits()
    images = np.rint(digits.images * (255.0 / 16.0)).clip(0, 255)
    x_tr, x_te, y_tr, y_te = train_test_split(
        images, digits.target, test_size=args.test_size, random_state=args.seed, stratify=digits.target)

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_images(out / "train-images-idx3-ubyte", x_tr)
    write_labels(out / "train-labels-idx1-ubyte", y_tr)
    write_images(out / "test-images-idx3-ubyte", x_te)
    write_labels(out / "test-labels-idx1-ubyte", y_te)
    print(f"wrote {len(y_tr)} train / {len(y_te)} test samples to {out}")


if __name__ == "__main__":
    main()
