#!/usr/bin/env python3
# Copyright (C) 2026 The bnnpim Authors
# SPDX-License-Identifier: Apache-2.0
"""Fits the unit-cost tables of a hardware config to published per-model
area / latency / energy breakdowns.

Event counts come from `simulate hardware` on the shape-only descriptors, so
the fit sees exactly the counts the C++ cost model uses. Every A-indexed
table is fitted as a running sum of non-negative increments, which keeps it
non-decreasing in A.
"""

import argparse
import copy
import json
import os
import subprocess
import sys
import tempfile

import numpy as np
from scipy.optimize import least_squares, nnls

MODELS = ["alexnet", "resnet18", "densenet28"]


def load_counts(simulate, base_cfg, desc_dir, adc):
    out = {}
    with tempfile.TemporaryDirectory() as tmp:
        for m in MODELS:
            d = os.path.join(tmp, m)
            subprocess.run([simulate, "hardware", "--model", os.path.join(desc_dir, m), "--hw", base_cfg,
                            "--adc", f"{adc[0]}..{adc[-1]}", "--out", d], check=True, stdout=subprocess.DEVNULL)
            with open(os.path.join(d, "mapping.json")) as f:
                out[m] = json.load(f)
    return out


def monotone_nnls(rows, targets, n_params, n_a):
    """Relative-error NNLS where parameter block k (one per A) is a cumulative
    sum of non-negative increments. rows[i] = (a_index, coeff vector)."""
    X = np.zeros((len(rows), n_params * n_a))
    y = np.zeros(len(rows))
    for i, ((ai, coeff), t) in enumerate(zip(rows, targets)):
        w = 1.0 / t
        for p, c in enumerate(coeff):
            # value[A_ai] = sum_{a <= ai} inc[a]
            for a in range(ai + 1):
                X[i, p * n_a + a] = c * w
        y[i] = 1.0
    inc, _ = nnls(X, y, maxiter=10000)
    inc = inc.reshape(n_params, n_a)
    return np.cumsum(inc, axis=1)


def table(adc, values):
    return {str(a): float(v) for a, v in zip(adc, values)}


def fit_area(counts, targets, cfg, adc):
    R, C, M = cfg["subarray"]["rows"], cfg["subarray"]["cols"], cfg["mux_ratio"]
    S = {m: counts[m]["totals"]["n_subarrays"] for m in MODELS}
    per_adc = {m: S[m] * (C // M) for m in MODELS}
    n_a = len(adc)
    area = lambda m, a, k: targets["models"][m]["area_mm2"][str(a)][k]

    # cim: one A-independent cell area, relative least squares
    num = sum(S[m] * R * C * 2 / 1e6 / area(m, a, "cim") for m in MODELS for a in adc)
    den = sum((S[m] * R * C * 2 / 1e6 / area(m, a, "cim")) ** 2 for m in MODELS for a in adc)
    cfg["cim_cell_area_um2"] = num / den

    def fit(key, coeffs):
        rows, ys = [], []
        for ai, a in enumerate(adc):
            for m in MODELS:
                rows.append((ai, coeffs(m)))
                ys.append(area(m, a, key))
        return monotone_nnls(rows, ys, len(coeffs(MODELS[0])), n_a)

    adc_t = fit("adc", lambda m: [per_adc[m] / 1e6])
    acc_t = fit("accum", lambda m: [per_adc[m] / 1e6])
    ic_t = fit("ic", lambda m: [1 / 1e6, S[m] / 1e6])
    ot_t = fit("other", lambda m: [1 / 1e6, S[m] / 1e6])
    cfg["adc_unit"]["area_um2"] = table(adc, adc_t[0])
    cfg["accum"]["area_um2"] = table(adc, acc_t[0])
    cfg["ic"]["area_um2_per_chip"] = table(adc, ic_t[0])
    cfg["ic"]["area_um2_per_subarray"] = table(adc, ic_t[1])
    cfg["periphery"]["area_um2_per_chip"] = table(adc, ot_t[0])
    cfg["periphery"]["area_um2_per_subarray"] = table(adc, ot_t[1])


def model_area(counts, cfg, m, a):
    R, C, M = cfg["subarray"]["rows"], cfg["subarray"]["cols"], cfg["mux_ratio"]
    S = counts[m]["totals"]["n_subarrays"]
    k = str(a)
    return (S * R * C * 2 * cfg["cim_cell_area_um2"] + S * (C // M) * cfg["adc_unit"]["area_um2"][k]
            + S * (C // M) * cfg["accum"]["area_um2"][k] + cfg["ic"]["area_um2_per_chip"][k]
            + S * cfg["ic"]["area_um2_per_subarray"][k] + cfg["periphery"]["area_um2_per_chip"][k]
            + S * cfg["periphery"]["area_um2_per_subarray"][k]) / 1e6


def stage_components(layer, clock, cyc, t):
    return np.array([layer["n_buffer_accesses"] * cyc * clock,
                     layer["n_ic_transfers"] * t[0],
                     layer["adc_steps"] * t[1],
                     layer["accum_steps"] * t[2],
                     layer["drive_steps"] * t[3]])


def bottleneck(counts, m, clock, cyc, t):
    best = None
    for layer in counts[m]["layers"]:
        s = stage_components(layer, clock, cyc, t)
        if best is None or s.sum() > best.sum():
            best = s
    return best


def fit_latency(counts, targets, cfg, adc):
    n_a = len(adc)
    clocks = [cfg["clock_period_ns"][str(a)] for a in adc]

    def unpack(theta):
        cyc = np.exp(theta[0])
        inc = np.exp(theta[1:].reshape(4, n_a))
        return cyc, np.cumsum(inc, axis=1)

    def residuals(theta):
        cyc, t = unpack(theta)
        res = []
        for ai, a in enumerate(adc):
            for m in MODELS:
                tg = targets["models"][m]["latency"][str(a)]
                s = bottleneck(counts, m, clocks[ai], cyc, t[:, ai])
                pred = [s.sum() * 1e-6, s[0] * 1e-6, s[1] * 1e-6, s[2] * 1e-3, s[3] * 1e-3]
                want = [tg["total_ms"], tg["buffer_ms"], tg["ic_ms"], tg["adc_us"], tg["accum_us"]]
                wts = [3.0, 1.0, 1.0, 1.0, 1.0]
                res += [w * np.log(max(p, 1e-30) / q) for p, q, w in zip(pred, want, wts)]
        return np.array(res)

    best = None
    for start in [-2.0, 0.0, 2.0]:
        theta0 = np.concatenate([[start], np.full(4 * n_a, -6.0)])
        r = least_squares(residuals, theta0, method="trf", max_nfev=4000)
        if best is None or r.cost < best.cost:
            best = r
    cyc, t = unpack(best.x)
    cfg["buffer"]["latency_cycles"] = float(cyc)
    cfg["ic"]["latency_ns"] = table(adc, t[0])
    cfg["adc_unit"]["latency_ns"] = table(adc, t[1])
    cfg["accum"]["latency_ns"] = table(adc, t[2])
    cfg["periphery"]["latency_ns"] = table(adc, t[3])
    return best.cost


def model_latency_ns(counts, cfg, m, a):
    k = str(a)
    t = [cfg["ic"]["latency_ns"][k], cfg["adc_unit"]["latency_ns"][k], cfg["accum"]["latency_ns"][k],
         cfg["periphery"]["latency_ns"][k]]
    return bottleneck(counts, m, cfg["clock_period_ns"][k], cfg["buffer"]["latency_cycles"], t).sum()


def fit_energy(counts, targets, cfg, adc):
    n_a = len(adc)
    en = lambda m, a, k: targets["models"][m]["energy_uJ"][str(a)][k]
    tot = lambda m, k: counts[m]["totals"][k]

    def fit(key, count_key):
        rows, ys = [], []
        for ai, a in enumerate(adc):
            for m in MODELS:
                rows.append((ai, [tot(m, count_key) * 1e-6]))
                ys.append(en(m, a, key))
        return monotone_nnls(rows, ys, 1, n_a)[0]

    cfg["buffer"]["energy_pJ"] = table(adc, fit("buffer", "n_buffer_accesses"))
    cfg["ic"]["energy_pJ"] = table(adc, fit("ic", "n_ic_transfers"))
    cfg["adc_unit"]["energy_pJ"] = table(adc, fit("adc", "n_adc_convs"))
    cfg["accum"]["energy_pJ"] = table(adc, fit("accum", "n_accum_ops"))

    # remaining dynamic energy is attributed per MAC
    rows, ys = [], []
    for ai, a in enumerate(adc):
        k = str(a)
        for m in MODELS:
            known = (tot(m, "n_buffer_accesses") * cfg["buffer"]["energy_pJ"][k]
                     + tot(m, "n_ic_transfers") * cfg["ic"]["energy_pJ"][k]
                     + tot(m, "n_adc_convs") * cfg["adc_unit"]["energy_pJ"][k]
                     + tot(m, "n_accum_ops") * cfg["accum"]["energy_pJ"][k]) * 1e-6
            rest = en(m, a, "dynamic") - known
            if rest > 0:
                rows.append((ai, [tot(m, "n_macs") * 1e-6]))
                ys.append(rest)
    if rows:
        cfg["other_energy_pJ_per_mac"] = table(adc, monotone_nnls(rows, ys, 1, n_a)[0])
    else:
        cfg["other_energy_pJ_per_mac"] = 0.0

    # leakage density: geometric-mean fit over all rows
    logs = []
    for a in adc:
        for m in MODELS:
            pred_unit = model_area(counts, cfg, m, a) * model_latency_ns(counts, cfg, m, a) * 1e3 * 1e-6
            logs.append(np.log(en(m, a, "leakage") / pred_unit))
    cfg["leakage_power_w_per_mm2"] = float(np.exp(np.mean(logs)))


def summary(counts, targets, cfg, adc):
    lines = []
    for m in MODELS:
        for a in adc:
            ta = targets["models"][m]["area_mm2"][str(a)]["chip"]
            tl = targets["models"][m]["latency"][str(a)]["total_ms"]
            pa = model_area(counts, cfg, m, a)
            pl = model_latency_ns(counts, cfg, m, a) * 1e-6
            lines.append(f"{m:10s} A={a}  area {pa:8.2f} vs {ta:8.2f} ({100*(pa/ta-1):+6.1f}%)"
                         f"  latency {pl:7.3f} vs {tl:6.2f} ms ({100*(pl/tl-1):+6.1f}%)")
    return lines


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    root = os.path.dirname(here)
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--simulate", default=os.path.join(root, "build", "simulate"))
    ap.add_argument("--base", default=os.path.join(root, "configs", "base_hw.json"))
    ap.add_argument("--targets", default=os.path.join(root, "configs", "calibration_targets.json"))
    ap.add_argument("--descriptors", default=os.path.join(root, "descriptors"))
    ap.add_argument("--out", default=os.path.join(root, "configs", "fitted_hw.json"))
    args = ap.parse_args()

    with open(args.base) as f:
        base = json.load(f)
    with open(args.targets) as f:
        targets = json.load(f)
    adc = targets["adc_bits"]
    counts = load_counts(args.simulate, args.base, args.descriptors, adc)

    cfg = copy.deepcopy(base)
    fit_area(counts, targets, cfg, adc)
    fit_latency(counts, targets, cfg, adc)
    fit_energy(counts, targets, cfg, adc)
    with open(args.out, "w") as f:
        json.dump(cfg, f, indent=2, sort_keys=False)
        f.write("\n")
    print("\n".join(summary(counts, targets, cfg, adc)))
    print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
