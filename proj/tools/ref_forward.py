# Copyright (C) 2026 The bnnpim Authors
# SPDX-License-Identifier: Apache-2.0
"""Independent numpy forward pass over a model bundle.

Used to produce the reference logits that the C++ engine is checked against.
Integer arithmetic is carried in int64; only the first-layer scale and the
threshold comparison use float64, in the same order as the engine contract.
"""

import json
import math
import os

import numpy as np


def load_bundle(path):
    with open(os.path.join(path, "manifest.json")) as f:
        man = json.load(f)
    layers = []
    for L in man["layers"]:
        k = fan_in(L)
        n = L["out_channels"]
        raw = np.fromfile(os.path.join(path, L["weights"]), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[: k * n]
        w = np.where(bits.reshape(k, n) == 1, 1, -1).astype(np.int64)
        tau = None
        if L.get("activation", "sign") == "sign":
            tau = np.fromfile(os.path.join(path, L["thresholds"]), dtype="<f8")
        layers.append(dict(L, W=w, tau=tau))
    return man, layers


def load_dataset(path):
    with open(os.path.join(path, "shape.json")) as f:
        shape = json.load(f)
    x = np.fromfile(os.path.join(path, "data.bin"), dtype="<f4")
    y = np.fromfile(os.path.join(path, "labels.bin"), dtype="<i4")
    return x.reshape([shape["count"]] + shape["sample_shape"]), y


def save_dataset(path, x, y):
    os.makedirs(path, exist_ok=True)
    x.astype("<f4").tofile(os.path.join(path, "data.bin"))
    y.astype("<i4").tofile(os.path.join(path, "labels.bin"))
    with open(os.path.join(path, "shape.json"), "w") as f:
        json.dump({"sample_shape": list(x.shape[1:]), "count": int(x.shape[0]), "dtype": "float32"}, f)
        f.write("\n")


def fan_in(L):
    if L["kind"] == "fc":
        return int(np.prod(L["in_shape"]))
    kh, kw = L["kernel"]
    return kh * kw * L["in_shape"][2]


def patches(L, act):
    """im2col with (kh, kw, c) column order; act is HWC, padding contributes 0."""
    if L["kind"] == "fc":
        return act.reshape(1, -1)
    H, W, C = L["in_shape"]
    kh, kw = L["kernel"]
    s, p = L.get("stride", 1), L.get("padding", 0)
    padded = np.zeros((H + 2 * p, W + 2 * p, C), dtype=act.dtype)
    padded[p:p + H, p:p + W] = act.reshape(H, W, C)
    OH = (H + 2 * p - kh) // s + 1
    OW = (W + 2 * p - kw) // s + 1
    out = np.empty((OH * OW, kh * kw * C), dtype=act.dtype)
    for oy in range(OH):
        for ox in range(OW):
            out[oy * OW + ox] = padded[oy * s:oy * s + kh, ox * s:ox * s + kw].reshape(-1)
    return out, (OH, OW)


def pool(L, acc, hw):
    """acc is (OH*OW, N); returns (pooled, area)."""
    pl = L.get("pool")
    if not pl:
        return acc, 1
    OH, OW = hw
    n = acc.shape[1]
    a = acc.reshape(OH, OW, n)
    win, st = pl["window"], pl.get("stride", pl["window"])
    PH, PW = (OH - win) // st + 1, (OW - win) // st + 1
    out = np.empty((PH, PW, n), dtype=np.int64)
    for py in range(PH):
        for px in range(PW):
            blk = a[py * st:py * st + win, px * st:px * st + win].reshape(-1, n)
            out[py, px] = blk.max(axis=0) if pl["kind"] == "max" else blk.sum(axis=0)
    return out.reshape(-1, n), (1 if pl["kind"] == "max" else win * win)


class AdcConfig:
    """Crossbar execution settings. clip[i][rt] = (lo, hi); None means lossless."""

    def __init__(self, B=8, A=8, rows=128, cols=128, exact=True, clip=None):
        self.B, self.A, self.rows, self.cols, self.exact, self.clip = B, A, rows, cols, exact, clip


def adc(s, A, lo, hi):
    step = max(1, -(-(hi - lo + 1) // (1 << A)))
    n = np.clip(s, lo, hi) - lo
    code = np.clip((2 * n + step) // (2 * step), 0, (1 << A) - 1)
    return lo + code * step


def quantize(x, B):
    x = x.astype(np.float64).reshape(-1)
    m = float(np.max(np.abs(x))) if x.size else 0.0
    if not m > 0:
        scale = 1.0
    elif B == 1:
        scale = m
    else:
        scale = m / float((1 << (B - 1)) - 1)
    r = x / scale
    r = np.sign(r) * np.floor(np.abs(r) + 0.5)
    lo, hi = -(1 << (B - 1)), (0 if B == 1 else (1 << (B - 1)) - 1)
    return np.clip(r, lo, hi).astype(np.int64), scale


def tiled_mxv(rows_in, W, cfg, layer_clip, sink=None):
    """Sum over row tiles of ADC(partial sums); rows_in is (P, K) in {-1,0,1}."""
    K = W.shape[0]
    acc = np.zeros((rows_in.shape[0], W.shape[1]), dtype=np.int64)
    for rt in range(-(-K // cfg.rows)):
        sl = slice(rt * cfg.rows, min(K, (rt + 1) * cfg.rows))
        part = rows_in[:, sl] @ W[sl]
        if sink is not None:
            sink.append(part.reshape(-1))
        if cfg.exact or layer_clip is None:
            acc += part
        else:
            lo, hi = layer_clip[rt]
            acc += adc(part, cfg.A, lo, hi)
    return acc


def forward(man, layers, x, cfg, sinks=None, capture=False):
    """Logits for one HWC image; with capture, (logits, hidden activations)."""
    outs = []
    for i, L in enumerate(layers):
        clip = None if cfg.clip is None else cfg.clip[i]
        sink = None if sinks is None else sinks[i]
        if i == 0:
            q, scale = quantize(x, cfg.B)
            pt = patches(L, q.reshape(L["in_shape"]))
            pt, hw = pt if isinstance(pt, tuple) else (pt, (1, 1))
            acc = np.zeros((pt.shape[0], L["out_channels"]), dtype=np.int64)
            u = pt.astype(np.int64) & ((1 << cfg.B) - 1)
            for b in range(cfg.B):
                plane = (u >> b) & 1
                w = -(1 << b) if b == cfg.B - 1 else (1 << b)
                acc += w * tiled_mxv(plane, L["W"], cfg, clip, sink)
        else:
            srcs = L.get("inputs", [i - 1])
            if L.get("combine", "concat") == "add" or len(srcs) == 1:
                feeds = [outs[s] for s in srcs]
            else:
                feeds = [np.concatenate([outs[s] for s in srcs], axis=-1)]
            acc = None
            for a in feeds:
                pt = patches(L, a)
                pt, hw = pt if isinstance(pt, tuple) else (pt, (1, 1))
                part = tiled_mxv(pt.astype(np.int64), L["W"], cfg, clip, sink)
                acc = part if acc is None else acc + part
            scale = 1.0
        pooled, area = pool(L, acc, hw)
        if L.get("activation", "sign") == "sign":
            act = np.where(pooled.astype(np.float64) * scale >= L["tau"][None, :] * float(area), 1, -1)
            shape = [1, 1, L["out_channels"]] if L["kind"] == "fc" else None
            if L["kind"] == "conv":
                H, W_ = hw
                if L.get("pool"):
                    pl = L["pool"]
                    st = pl.get("stride", pl["window"])
                    H, W_ = (H - pl["window"]) // st + 1, (W_ - pl["window"]) // st + 1
                shape = [H, W_, L["out_channels"]]
            outs.append(act.astype(np.int8).reshape(shape))
        else:
            logits = pooled.reshape(-1).astype(np.float64) * scale * man["final_scale"] / float(area)
            return (logits, outs) if capture else logits
    raise ValueError("network has no logit layer")


def lossless_clip(layers, rows):
    out = []
    for L in layers:
        K = fan_in(L)
        out.append([(-min(rows, K - rt * rows), min(rows, K - rt * rows)) for rt in range(-(-K // rows))])
    return out


def full_range_clip(layers, rows):
    return lossless_clip(layers, rows)


def percentile_clip(man, layers, calib_x, B, rows, cols, percentile):
    """Nearest-rank symmetric clip from the raw-sum histogram of a lossless pass."""
    cfg = AdcConfig(B=B, rows=rows, cols=cols, exact=True)
    sinks = [[] for _ in layers]
    for x in calib_x:
        forward(man, layers, x, cfg, sinks)
    tail = (1.0 - percentile / 100.0) / 2.0
    clips = []
    for i, L in enumerate(layers):
        v = np.sort(np.concatenate(sinks[i]))
        total = v.size

        def q(p):
            rank = max(1, math.ceil(p * total))
            return int(v[rank - 1])

        c = max(abs(q(tail)), abs(q(1.0 - tail))) if total else 0
        K = fan_in(L)
        clips.append([(-min(c, r), min(c, r)) for r in
                      (min(rows, K - rt * rows) for rt in range(-(-K // rows)))])
    return clips
