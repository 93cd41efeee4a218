#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert weights stored in an .npz archive to the gcnn text model format.

The archive holds w0, b0, w1, b1, ... in layer order. A 4-D weight array
(out, in, k, k) becomes a convolution followed by ReLU and max pooling; a 2-D
array (out, in) becomes a fully connected layer, linear if it is the last
layer and ReLU otherwise.
"""

import argparse
import sys

import numpy as np

from gcnn_model import render, write_atomic


def parse_triple(text):
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected C,H,W")
    return tuple(parts)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("weights", help=".npz archive")
    ap.add_argument("output", help="model file to write")
    ap.add_argument("--input", type=parse_triple, default=(1, 28, 28), help="input shape C,H,W")
    ap.add_argument("--pool", type=int, default=2, help="pool size after every convolution")
    ap.add_argument("--total-bits", type=int, default=32)
    ap.add_argument("--frac-bits", type=int, default=16)
    args = ap.parse_args(argv)

    archive = np.load(args.weights)
    count = 0
    while f"w{count}" in archive:
        count += 1
    if count == 0:
        print("error: archive has no w0", file=sys.stderr)
        return 2

    layers = []
    for i in range(count):
        w = archive[f"w{i}"]
        b = archive[f"b{i}"]
        last = i == count - 1
        if w.ndim == 4:
            layers.append({"kind": "conv", "weight": w, "bias": b, "pool": args.pool, "activation": "relu"})
        elif w.ndim == 2:
            layers.append({"kind": "fc", "weight": w, "bias": b, "activation": "linear" if last else "relu"})
        else:
            print(f"error: w{i} has {w.ndim} dimensions", file=sys.stderr)
            return 2
    write_atomic(args.output, render(args.input, layers, args.total_bits, args.frac_bits))
    return 0


if __name__ == "__main__":
    sys.exit(main())
