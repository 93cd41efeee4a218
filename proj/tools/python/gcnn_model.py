# SPDX-License-Identifier: Apache-2.0
"""Writer for the gcnn text model format."""

import os
import tempfile

import numpy as np


def _block(name, values, per_line):
    flat = [repr(float(v)) for v in np.asarray(values, dtype=np.float64).ravel()]
    lines = [f"{name} {len(flat)}"]
    for i in range(0, len(flat), per_line):
        lines.append(" ".join(flat[i:i + per_line]))
    return lines


def render(input_shape, layers, total_bits=32, frac_bits=16):
    """`layers` holds dicts: kind ('conv' or 'fc'), weight, bias, activation,
    and pool for convolutions. Conv weights are out x in x k x k."""
    lines = ["gcnn-model 1", f"format {total_bits} {frac_bits}",
             "input {} {} {}".format(*input_shape)]
    for layer in layers:
        w = np.asarray(layer["weight"], dtype=np.float64)
        b = np.asarray(layer["bias"], dtype=np.float64)
        act = layer.get("activation", "relu")
        if layer["kind"] == "conv":
            out_ch, in_ch, k, k2 = w.shape
            if k != k2:
                raise ValueError("only square kernels are supported")
            lines.append(f"layer conv {in_ch} {out_ch} {k} {layer.get('pool', 1)} {act}")
            lines += _block("weights", w, k)
        elif layer["kind"] == "fc":
            out_n, in_n = w.shape
            lines.append(f"layer fc {in_n} {out_n} {act}")
            lines += _block("weights", w, 8)
        else:
            raise ValueError(f"unknown layer kind {layer['kind']!r}")
        lines += _block("biases", b, 8)
    lines.append("end")
    return "\n".join(lines) + "\n"


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def write_pgm(path, pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    data = f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes()
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    with os.fdopen(fd, "wb") as f:
        f.write(data)
    os.replace(tmp, path)
