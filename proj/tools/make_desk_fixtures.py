#!/usr/bin/env python3
# Copyright (C) 2026 The bnnpim Authors
# SPDX-License-Identifier: Apache-2.0
"""Trains the three desk-scale binarized presets on the 8x8 digits set and
writes checked-in fixtures: model bundles, datasets, calibration batches,
folding checks and reference logits from tools/ref_forward.py.

Binary weights use a straight-through sign; hidden activations are
sign(BN(conv)) with max pooling after the BN. Batch norm is folded into
per-channel thresholds, flipping weight columns where gamma < 0.
"""

import argparse
import json
import os
import shutil
import sys

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import ref_forward as ref  # noqa: E402

N_CALIB = 256
N_REF = 32


def conv(in_shape, out, k=3, pad=1, pool=None, inputs=None, combine="concat", act="sign"):
    d = {"kind": "conv", "in_shape": list(in_shape), "out_channels": out, "kernel": [k, k], "stride": 1,
         "padding": pad, "pool": pool, "activation": act, "input_precision_bits": 1, "combine": combine}
    if inputs is not None:
        d["inputs"] = inputs
    return d


def fc(features, out, inputs=None, act="sign"):
    d = {"kind": "fc", "in_shape": [features], "out_channels": out, "pool": None, "activation": act,
         "input_precision_bits": 1, "combine": "concat"}
    if inputs is not None:
        d["inputs"] = inputs
    return d


MAX2 = {"kind": "max", "window": 2, "stride": 2}

PRESETS = {
    "tiny-alexnet": lambda: [
        conv((8, 8, 1), 32, pool=MAX2),
        conv((4, 4, 32), 64, pool=MAX2),
        fc(256, 512),
        fc(512, 512),
        fc(512, 10, act="none"),
    ],
    "tiny-resnet": lambda: [
        conv((8, 8, 1), 32),
        conv((8, 8, 32), 32),
        conv((8, 8, 32), 32, pool=MAX2, inputs=[0, 1], combine="add"),
        conv((4, 4, 32), 32),
        conv((4, 4, 32), 64, pool=MAX2, inputs=[2, 3], combine="add"),
        fc(256, 10, act="none"),
    ],
    "tiny-densenet": lambda: [
        conv((8, 8, 1), 32),
        conv((8, 8, 32), 16),
        conv((8, 8, 48), 16, inputs=[0, 1]),
        conv((8, 8, 64), 32, k=1, pad=0, pool=MAX2, inputs=[0, 1, 2]),
        conv((4, 4, 32), 16, inputs=[3]),
        conv((4, 4, 48), 16, inputs=[3, 4]),
        fc(1024, 10, inputs=[3, 4, 5], act="none"),
    ],
}


class SignSTE(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return torch.where(x >= 0, torch.ones_like(x), -torch.ones_like(x))

    @staticmethod
    def backward(ctx, g):
        (x,) = ctx.saved_tensors
        return g * (x.abs() <= 1).to(g.dtype)


sign = SignSTE.apply


class Net(nn.Module):
    """Generic BNN over a layer list; activations are NCHW internally."""

    def __init__(self, layers):
        super().__init__()
        self.specs = layers
        self.w = nn.ParameterList()
        self.bn = nn.ModuleList()
        for L in layers:
            k = ref.fan_in(L)
            if L["kind"] == "conv":
                kh, kw = L["kernel"]
                shape = (L["out_channels"], L["in_shape"][2], kh, kw)
            else:
                shape = (L["out_channels"], k)
            self.w.append(nn.Parameter(torch.randn(shape) * 0.1))
            if L["activation"] == "sign":
                bn = nn.BatchNorm2d(L["out_channels"]) if L["kind"] == "conv" else nn.BatchNorm1d(L["out_channels"])
            else:
                bn = nn.Identity()
            self.bn.append(bn)
        self.log_alpha = nn.Parameter(torch.tensor(-3.0))

    def pre(self, i, feed):
        """Integer-valued (for hidden layers) pre-activation of layer i."""
        L = self.specs[i]
        wb = sign(self.w[i])
        if L["kind"] == "conv":
            return F.conv2d(feed, wb, stride=L["stride"], padding=L["padding"])
        flat = feed.permute(0, 2, 3, 1).reshape(feed.shape[0], -1) if feed.dim() == 4 else feed
        return F.linear(flat, wb)

    def feed(self, i, x, outs):
        L = self.specs[i]
        if i == 0:
            return x
        srcs = L.get("inputs", [i - 1])
        if L["combine"] == "add":
            return sum(outs[s] for s in srcs)
        return torch.cat([outs[s] for s in srcs], dim=1) if len(srcs) > 1 else outs[srcs[0]]

    def forward(self, x, return_signs=False):
        outs = []
        for i, L in enumerate(self.specs):
            z = self.pre(i, self.feed(i, x, outs))
            if L["activation"] == "none":
                logits = z * self.log_alpha.exp()
                return (logits, outs) if return_signs else logits
            y = self.bn[i](z)
            if L["pool"]:
                y = F.max_pool2d(y, L["pool"]["window"], L["pool"]["stride"])
            outs.append(sign(y))
        raise ValueError("no logit layer")


def nhwc_to_nchw(x):
    return torch.from_numpy(np.ascontiguousarray(x.transpose(0, 3, 1, 2)))


def train(layers, xtr, ytr, epochs, seed):
    torch.manual_seed(seed)
    net = Net(layers)
    opt = torch.optim.Adam(net.parameters(), lr=5e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, epochs)
    X, Y = nhwc_to_nchw(xtr), torch.from_numpy(ytr.astype(np.int64))
    g = torch.Generator().manual_seed(seed)
    for _ in range(epochs):
        net.train()
        perm = torch.randperm(X.shape[0], generator=g)
        for b in range(0, X.shape[0], 64):
            idx = perm[b:b + 64]
            loss = F.cross_entropy(net(X[idx]), Y[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            with torch.no_grad():
                for w in net.w:
                    w.clamp_(-1, 1)
        sched.step()
    net.eval()
    return net


def fold(net):
    """Returns per-layer (W[K,N] in +-1, tau or None) and final_scale."""
    out = []
    for i, L in enumerate(net.specs):
        w = torch.where(net.w[i] >= 0, 1, -1).detach().numpy().astype(np.int64)
        if L["kind"] == "conv":
            W = w.transpose(2, 3, 1, 0).reshape(-1, L["out_channels"])
        else:
            W = w.T.copy()
        tau = None
        if L["activation"] == "sign":
            bn = net.bn[i]
            gamma = bn.weight.detach().double().numpy()
            beta = bn.bias.detach().double().numpy()
            mu = bn.running_mean.detach().double().numpy()
            sigma = np.sqrt(bn.running_var.detach().double().numpy() + bn.eps)
            t = mu - beta * sigma / gamma
            flip = gamma < 0
            W[:, flip] *= -1
            tau = np.where(flip, -t, t)
        out.append((W, tau))
    return out, float(net.log_alpha.exp().item())


def write_bundle(path, name, layers, folded, final_scale):
    os.makedirs(path, exist_ok=True)
    man = {"format": "bnnpim-model", "version": 1, "name": name, "class_count": 10,
           "final_scale": final_scale, "layers": []}
    for i, (L, (W, tau)) in enumerate(zip(layers, folded)):
        L = dict(L)
        if i == 0:
            L["input_precision_bits"] = 8
        wname = f"layer{i}.weights.bin"
        np.packbits((W.reshape(-1) > 0).astype(np.uint8), bitorder="little").tofile(os.path.join(path, wname))
        L["weights"] = wname
        if tau is not None:
            tname = f"layer{i}.thresholds.bin"
            tau.astype("<f8").tofile(os.path.join(path, tname))
            L["thresholds"] = tname
        man["layers"].append(L)
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(man, f, indent=2)
        f.write("\n")


def framework_signs(net, x_deq):
    """Sign patterns of every hidden layer from the float64 batch-norm network."""
    net64 = Net(net.specs).double()
    net64.load_state_dict({k: v.double() if v.is_floating_point() else v for k, v in net.state_dict().items()})
    net64.eval()
    with torch.no_grad():
        _, outs = net64(nhwc_to_nchw(x_deq).double(), return_signs=True)
    return [o.permute(0, 2, 3, 1).reshape(o.shape[0], -1).numpy() if o.dim() == 4 else o.numpy() for o in outs]


def main():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=os.path.join(root, "data", "desk"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--only", nargs="*", default=list(PRESETS))
    args = ap.parse_args()

    digits = load_digits()
    x = (digits.images.astype(np.float32) / 16.0)[..., None]
    y = digits.target.astype(np.int32)
    xtr, xte, ytr, yte = train_test_split(x, y, test_size=0.3, random_state=0, stratify=y)
    ref.save_dataset(os.path.join(args.out, "digits-train"), xtr, ytr)
    ref.save_dataset(os.path.join(args.out, "digits-test"), xte, yte)
    rng = np.random.default_rng(args.seed)
    calib_idx = np.sort(rng.choice(len(xtr), N_CALIB, replace=False))
    xc, yc = xtr[calib_idx], ytr[calib_idx]

    for name in args.only:
        layers = PRESETS[name]()
        net = train(layers, xtr, ytr, args.epochs, args.seed)
        with torch.no_grad():
            float_acc = float((net(nhwc_to_nchw(xte)).argmax(1).numpy() == yte).mean())
        folded, alpha = fold(net)
        path = os.path.join(args.out, name)
        shutil.rmtree(path, ignore_errors=True)
        write_bundle(path, name, layers, folded, alpha)
        man, rl = ref.load_bundle(path)

        # folding check: float64 batch-norm network on the dequantized B=8 input
        mismatches = []
        deq = np.stack([ref.quantize(img, 8)[0].reshape(img.shape) * ref.quantize(img, 8)[1] for img in xc])
        fw = framework_signs(net, deq)
        fo = hidden_signs(man, rl, xc, 8)
        for i, (a, b) in enumerate(zip(fw, fo)):
            mismatches.append(int((a != b).sum()))

        ref.save_dataset(os.path.join(path, "calibration"), xc, yc)
        write_calibration_stats(os.path.join(path, "calibration", "stats.json"), man, rl, xc)
        write_reference(os.path.join(path, "reference"), man, rl, xte[:N_REF], yte[:N_REF], xc)

        exact = ref.AdcConfig(B=8, exact=True)
        pred = np.array([np.argmax(ref.forward(man, rl, img, exact)) for img in xte])
        summary = {
            "name": name,
            "layer_count": len(layers),
            "fan_in": [ref.fan_in(L) for L in layers],
            "out_channels": [L["out_channels"] for L in layers],
            "float_test_accuracy": float_acc,
            "exact_b8_test_accuracy": float((pred == yte).mean()),
            "test_samples": int(len(yte)),
            "folding_sign_mismatches": mismatches,
            "seed": args.seed,
            "epochs": args.epochs,
        }
        with open(os.path.join(path, "summary.json"), "w") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")
        print(json.dumps(summary))


def hidden_signs(man, layers, xs, B):
    cfg = ref.AdcConfig(B=B, exact=True)
    per = [[] for _ in range(len(layers) - 1)]
    for img in xs:
        acts = ref.forward(man, layers, img, cfg, capture=True)[1]
        for i, a in enumerate(acts):
            per[i].append(a.reshape(-1))
    return [np.stack(p) for p in per]


def write_calibration_stats(path, man, layers, xc):
    cfg = ref.AdcConfig(B=8, exact=True)
    sinks = [[] for _ in layers]
    for img in xc:
        ref.forward(man, layers, img, cfg, sinks)
    stats = []
    for i, s in enumerate(sinks):
        v = np.concatenate(s)
        stats.append({"layer": i, "count": int(v.size), "min": int(v.min()), "max": int(v.max()),
                      "mean": float(v.mean()), "std": float(v.std()),
                      "p0.5": float(np.percentile(v, 0.5)), "p99.5": float(np.percentile(v, 99.5))})
    with open(path, "w") as f:
        json.dump({"rows": 128, "input_precision_bits": 8, "partial_sums": stats}, f, indent=2)
        f.write("\n")


REF_CASES = [
    {"id": "exact_b8", "B": 8, "exact": True, "rows": 128, "cols": 128},
    {"id": "exact_b4_r32", "B": 4, "exact": True, "rows": 32, "cols": 32},
    {"id": "full_b4_a5", "B": 4, "A": 5, "exact": False, "rows": 128, "cols": 128, "calibration": "full_range"},
    {"id": "full_b8_a4_r64c32", "B": 8, "A": 4, "exact": False, "rows": 64, "cols": 32, "calibration": "full_range"},
    {"id": "pct_b8_a6", "B": 8, "A": 6, "exact": False, "rows": 128, "cols": 128, "calibration": "percentile",
     "percentile": 99.9},
]


def write_reference(path, man, layers, xr, yr, xc):
    ref.save_dataset(os.path.join(path, "inputs"), xr, yr)
    cases = []
    for c in REF_CASES:
        if c["exact"]:
            clip = None
        elif c["calibration"] == "full_range":
            clip = ref.full_range_clip(layers, c["rows"])
        else:
            clip = ref.percentile_clip(man, layers, xc, c["B"], c["rows"], c["cols"], c["percentile"])
        cfg = ref.AdcConfig(B=c["B"], A=c.get("A", 8), rows=c["rows"], cols=c["cols"], exact=c["exact"], clip=clip)
        logits = np.stack([ref.forward(man, layers, img, cfg) for img in xr])
        fname = f"logits_{c['id']}.bin"
        logits.astype("<f8").tofile(os.path.join(path, fname))
        cases.append(dict(c, logits=fname))
    with open(os.path.join(path, "reference.json"), "w") as f:
        json.dump({"count": int(len(xr)), "classes": 10, "cases": cases}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
