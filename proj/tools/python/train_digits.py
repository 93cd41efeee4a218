#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Train the 28x28 reference architecture on the scikit-learn digits set.

The 8x8 digits are upscaled to 24x24, padded to 28x28 and stored as 8-bit
pixels, so the network sees exactly what the PGM readers produce. Writes the
model, its weights as .npz, and a set of held-out test images.
"""

import argparse
import os
import sys

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.datasets import load_digits

from gcnn_model import render, write_atomic, write_pgm


def to_pixels(digits):
    x = torch.tensor(digits, dtype=torch.float32).reshape(-1, 1, 8, 8) / 16.0
    x = F.interpolate(x, size=(24, 24), mode="bilinear", align_corners=False)
    x = F.pad(x, (2, 2, 2, 2))
    return np.clip(np.rint(x.numpy() * 255.0), 0, 255).astype(np.uint8)


class Net(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = torch.nn.Conv2d(1, 4, 5)
        self.conv2 = torch.nn.Conv2d(4, 15, 5)
        self.fc = torch.nn.Linear(240, 10)

    def forward(self, x):
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        x = F.max_pool2d(F.relu(self.conv2(x)), 2)
        return self.fc(x.flatten(1))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--test-images", type=int, default=20)
    args = ap.parse_args(argv)

    torch.manual_seed(args.seed)
    rng = np.random.default_rng(args.seed)
    torch.use_deterministic_algorithms(True)

    digits = load_digits()
    pixels = to_pixels(digits.data)
    labels = digits.target.astype(np.int64)
    order = rng.permutation(len(labels))
    test_idx, train_idx = order[:300], order[300:]

    def real(idx):
        return torch.tensor(pixels[idx].astype(np.float32) / 127.5 - 1.0)

    xtr, ytr = real(train_idx), torch.tensor(labels[train_idx])
    xte, yte = real(test_idx), torch.tensor(labels[test_idx])

    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=2e-3, weight_decay=1e-4)
    for epoch in range(args.epochs):
        net.train()
        perm = torch.randperm(len(ytr))
        for i in range(0, len(perm), 64):
            batch = perm[i:i + 64]
            opt.zero_grad()
            loss = F.cross_entropy(net(xtr[batch]), ytr[batch])
            loss.backward()
            opt.step()
    net.eval()
    with torch.no_grad():
        accuracy = (net(xte).argmax(1) == yte).float().mean().item()
    print(f"held-out accuracy {accuracy:.4f} on {len(yte)} images")

    sd = {k: v.detach().double().numpy() for k, v in net.state_dict().items()}
    layers = [
        {"kind": "conv", "weight": sd["conv1.weight"], "bias": sd["conv1.bias"], "pool": 2, "activation": "relu"},
        {"kind": "conv", "weight": sd["conv2.weight"], "bias": sd["conv2.bias"], "pool": 2, "activation": "relu"},
        {"kind": "fc", "weight": sd["fc.weight"], "bias": sd["fc.bias"], "activation": "linear"},
    ]
    models = os.path.join(args.out_dir, "models")
    images = os.path.join(args.out_dir, "digits")
    os.makedirs(models, exist_ok=True)
    os.makedirs(images, exist_ok=True)
    write_atomic(os.path.join(models, "digits.model"), render((1, 28, 28), layers))
    np.savez(os.path.join(models, "digits_weights.npz"),
             w0=sd["conv1.weight"], b0=sd["conv1.bias"], w1=sd["conv2.weight"], b1=sd["conv2.bias"],
             w2=sd["fc.weight"], b2=sd["fc.bias"])
    for n, idx in enumerate(test_idx[:args.test_images]):
        write_pgm(os.path.join(images, f"digit_{n:02d}_label{labels[idx]}.pgm"), pixels[idx, 0])
    return 0


if __name__ == "__main__":
    sys.exit(main())
