#!/usr/bin/env python3
"""Build IDX image files from the 10,000 MNIST digits bundled in the npm `mnist` package.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_digits.py package/src/digits data/digits

Writes train-images-idx3-ubyte (5003 images) and test-images-idx3-ubyte
(4997 images) after a fixed-seed shuffle.
"""
import json
import struct
import sys
from pathlib import Path

import numpy as np

TRAIN_COUNT = 5003


def write_idx(path, images):
    n = images.shape[0]
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    digits = []
    for d in range(10):
        data = json.loads((src / f"{d}.json").read_text())["data"]
        digits.append(np.asarray(data, dtype=np.float64).reshape(-1, 784))
    images = np.concatenate(digits)
    images = np.clip(np.rint(images * 255.0), 0, 255)
    order = np.random.default_rng(20200101).permutation(images.shape[0])
    images = images[order]
    write_idx(dst / "train-images-idx3-ubyte", images[:TRAIN_COUNT])
    write_idx(dst / "test-images-idx3-ubyte", images[TRAIN_COUNT:])
    print(f"wrote {TRAIN_COUNT} train / {images.shape[0] - TRAIN_COUNT} test images to {dst}")


if __name__ == "__main__":
    main()
