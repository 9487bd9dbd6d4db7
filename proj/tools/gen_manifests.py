#!/usr/bin/env python3
# Copyright (C) 2026 The apu authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the bundled layer-shape manifests under manifests/."""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "manifests"


def conv(name, c, h, w, out, k, stride=1, pad=None, groups=1):
    return {"name": name, "type": "Conv2D", "input_shape": [c, h, w], "out_channels": out,
            "kernel": k, "stride": stride, "padding": k // 2 if pad is None else pad, "groups": groups}


def pool(name, c, h, w, window=2, stride=2, pad=0):
    return {"name": name, "type": "MaxPool2D", "input_shape": [c, h, w], "window": window,
            "stride": stride, "padding": pad}


def fc(name, n_in, n_out, blocks):
    return {"name": name, "type": "FullyConnected", "in": n_in, "out": n_out, "blocks": blocks}


def fit_groups(c_in, c_out, k, g, cap=513):
    while (c_in // g) * k * k > cap or c_out // g > cap:
        g *= 2
    return g


def vgg19():
    # Group counts keep every per-group kernel within a 513x513 PE.
    cfg = [(64, [1, 2]), (128, [2, 4]), (256, [4, 8, 8, 8]), (512, [8, 16, 16, 16]), (512, [16, 16, 16, 16])]
    layers, c, hw = [], 3, 224
    for s, (ch, groups) in enumerate(cfg, start=1):
        for i, g in enumerate(groups, start=1):
            layers.append(conv(f"conv{s}_{i}", c, hw, hw, ch, 3, groups=g))
            c = ch
        layers.append(pool(f"pool{s}", c, hw, hw))
        hw //= 2
    layers += [fc("fc6", 512 * 7 * 7, 4096, 49), fc("fc7", 4096, 4096, 8), fc("fc8", 4096, 1000, 8)]
    return {"kind": "layer-manifest", "name": "vgg19-group", "layers": layers}


def resnet50():
    layers = [conv("conv1", 3, 224, 224, 64, 7, stride=2, pad=3), pool("pool1", 64, 112, 112, 3, 2, 1)]
    c, hw = 64, 56
    # (blocks, mid, out, stride, minimum groups of the 1x1 reduce, 3x3, 1x1 expand)
    stages = [(3, 64, 256, 1, (1, 32, 1)), (4, 128, 512, 2, (1, 32, 1)),
              (6, 256, 1024, 2, (1, 32, 2)), (3, 512, 2048, 2, (2, 32, 4))]
    for s, (n, mid, out, stride, (g1, g2, g3)) in enumerate(stages, start=2):
        for b in range(n):
            st = stride if b == 0 else 1
            pre = f"res{s}{chr(ord('a') + b)}"
            g_in = fit_groups(c, mid, 1, g1)
            layers.append(conv(f"{pre}_reduce", c, hw, hw, mid, 1, groups=g_in))
            layers.append(conv(f"{pre}_3x3", mid, hw, hw, mid, 3, stride=st, groups=g2))
            ohw = hw // st
            layers.append(conv(f"{pre}_expand", mid, ohw, ohw, out, 1, groups=g3))
            if b == 0:
                g_sc = fit_groups(c, out, 1, g3)
                layers.append(conv(f"{pre}_shortcut", c, hw, hw, out, 1, stride=st, groups=g_sc))
            c, hw = out, ohw
    layers.append(pool("pool5", c, hw, hw, 7, 7, 0))
    layers.append(fc("fc1000", 2048, 1000, 4))
    return {"kind": "layer-manifest", "name": "resnet50-group", "layers": layers}


def fc_compare():
    # 512x512 PEs: unfolded layers use 9 blocks, oversized ones need more.
    layers = [fc("alexnet_fc6", 9216, 4096, 18), fc("alexnet_fc7", 4096, 4096, 9),
              fc("alexnet_fc8", 4096, 1000, 9), fc("vgg_fc6", 25088, 4096, 49),
              fc("vgg_fc7", 4096, 4096, 9), fc("vgg_fc8", 4096, 1000, 9)]
    return {"kind": "layer-manifest", "name": "fc-512x9", "layers": layers}


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for name, m in [("vgg19_group", vgg19()), ("resnet50_group", resnet50()), ("fc_compare", fc_compare())]:
        (OUT / f"{name}.json").write_text(json.dumps(m, indent=2) + "\n")
