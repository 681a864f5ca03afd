#!/usr/bin/env python3
# Copyright (C) 2026 The bnnpim Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes shape-only manifests for the ImageNet-scale AlexNet, ResNet18 and
DenseNet28 topologies used by the hardware sweep. No weights are emitted."""

import argparse
import json
import os

B_FIRST = 4


def conv(in_shape, out, k, stride=1, pad=0, pool=None, inputs=None, combine="concat", floor=False, act="sign"):
    d = {"kind": "conv", "in_shape": list(in_shape), "out_channels": out, "kernel": [k, k],
         "stride": stride, "padding": pad, "pool": pool, "activation": act,
         "input_precision_bits": 1, "combine": combine}
    if floor:
        d["floor_mode"] = True
    if inputs is not None:
        d["inputs"] = inputs
    return d


def fc(features, out, inputs=None, act="sign"):
    d = {"kind": "fc", "in_shape": [features], "out_channels": out, "pool": None, "activation": act,
         "input_precision_bits": 1, "combine": "concat"}
    if inputs is not None:
        d["inputs"] = inputs
    return d


def maxpool(w, s):
    return {"kind": "max", "window": w, "stride": s}


def avgpool(w, s):
    return {"kind": "avg", "window": w, "stride": s}


def alexnet():
    L = [
        conv((227, 227, 3), 64, 11, stride=4, pool=maxpool(3, 2)),
        conv((27, 27, 64), 192, 5, pad=2, pool=maxpool(3, 2)),
        conv((13, 13, 192), 384, 3, pad=1),
        conv((13, 13, 384), 384, 3, pad=1),
        conv((13, 13, 384), 256, 3, pad=1, pool=maxpool(3, 2)),
        fc(9216, 4096),
        fc(4096, 4096),
        fc(4096, 1000, act="none"),
    ]
    return L


def resnet18():
    L = [conv((224, 224, 3), 64, 7, stride=2, pad=3, pool=maxpool(2, 2), floor=True)]
    # residual stream = sum of binary tensors; each consumer reads it as an add of its terms
    stream = [0]
    size, ch = 56, 64
    for stage, out in enumerate([64, 128, 256, 512]):
        for block in range(2):
            down = stage > 0 and block == 0
            if down:
                L.append(conv((size, size, ch), out, 1, stride=2, inputs=list(stream), combine="add", floor=True))
                short = len(L) - 1
                size //= 2
                L.append(conv((size * 2, size * 2, ch), out, 3, stride=2, pad=1, inputs=list(stream),
                              combine="add", floor=True))
                stream = [short]
            else:
                L.append(conv((size, size, ch), out, 3, pad=1, inputs=list(stream), combine="add"))
            ch = out
            last = stage == 3 and block == 1
            L.append(conv((size, size, ch), out, 3, pad=1, inputs=[len(L) - 1],
                          pool=avgpool(7, 7) if last else None))
            stream = [len(L) - 1] + stream
    L.append(fc(512, 1000, inputs=[len(L) - 1], act="none"))
    for d in L:
        if d.get("combine") == "add" and len(d.get("inputs", [])) < 2:
            d["combine"] = "concat"
    return L


def densenet28():
    L = [conv((224, 224, 3), 64, 7, stride=2, pad=3, pool=maxpool(2, 2), floor=True)]
    growth = 64
    block_in = [0]
    size, ch = 56, 64
    blocks = [6, 6, 6, 5]
    trans = [160, 192, 256]
    for b, n in enumerate(blocks):
        members = list(block_in)
        for _ in range(n):
            L.append(conv((size, size, ch), growth, 3, pad=1, inputs=list(members)))
            members.append(len(L) - 1)
            ch += growth
        if b < len(trans):
            L.append(conv((size, size, ch), trans[b], 1, stride=2, inputs=list(members), floor=True))
            size //= 2
            ch = trans[b]
            block_in = [len(L) - 1]
        else:
            # global pooling has no layer of its own; a 1x1 head conv carries it
            L.append(conv((size, size, ch), ch, 1, inputs=list(members), pool=avgpool(7, 7)))
    L.append(fc(ch, 1000, act="none"))
    return L


def write(out_dir, name, layers):
    layers[0]["input_precision_bits"] = B_FIRST
    path = os.path.join(out_dir, name)
    os.makedirs(path, exist_ok=True)
    doc = {"format": "bnnpim-model", "version": 1, "name": name, "class_count": 1000,
           "final_scale": 1.0, "topology_only": True, "layers": layers}
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "descriptors"))
    args = ap.parse_args()
    write(args.out, "alexnet", alexnet())
    write(args.out, "resnet18", resnet18())
    write(args.out, "densenet28", densenet28())


if __name__ == "__main__":
    main()
