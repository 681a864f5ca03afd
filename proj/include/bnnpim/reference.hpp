/*
 * Copyright (C) 2026 The bnnpim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "model_ir.hpp"
#include "quantizer.hpp"

namespace bnnpim {

/**
 * Lossless integer inference written without im2col or tiles: direct nested-loop
 * convolution, direct pooling, first-layer input quantized per image.
 */
class ReferenceForward {
public:
    explicit ReferenceForward(const NetworkDescriptor& net) : net_(net) {}

    std::vector<double> logits(std::span<const float> x, int B) const
    {
        auto q = quantize_dynamic(x, net_.layers[0].in_shape, B);
        std::vector<std::vector<int64_t>> outs;
        for (size_t i = 0; i < net_.layers.size(); ++i) {
            const auto& L = net_.layers[i];
            std::vector<int64_t> acc;
            if (i == 0) {
                acc = mxv(L, net_.weights[i], q.values);
            } else {
                auto src = net_.sources(i);
                if (L.combine == Combine::add || src.size() == 1) {
                    for (int s : src) {
                        auto part = mxv(L, net_.weights[i], outs[size_t(s)]);
                        if (acc.empty())
                            acc = part;
                        else
                            for (size_t k = 0; k < acc.size(); ++k) acc[k] += part[k];
                    }
                } else {
                    acc = mxv(L, net_.weights[i], concat(src, outs));
                }
            }
            auto [pooled, area] = pool(L, acc);
            const double scale = i == 0 ? q.scale : 1.0;
            if (L.activation == Activation::none) {
                std::vector<double> lg;
                for (auto v : pooled) lg.push_back(double(v) * scale * net_.final_scale / double(area));
                return lg;
            }
            std::vector<int64_t> act(pooled.size());
            for (size_t k = 0; k < pooled.size(); ++k)
                act[k] = double(pooled[k]) * scale >= net_.thresholds[i].tau[k % size_t(L.out_channels)] * double(area)
                             ? 1
                             : -1;
            outs.push_back(std::move(act));
        }
        return {};
    }

private:
    std::vector<int64_t> concat(const std::vector<int>& src, const std::vector<std::vector<int64_t>>& outs) const
    {
        std::vector<int64_t> chans;
        int64_t pixels = 0;
        for (int s : src) {
            auto sh = net_.layers[size_t(s)].out_shape();
            chans.push_back(sh.back());
            pixels = product(sh) / sh.back();
        }
        std::vector<int64_t> out;
        for (int64_t p = 0; p < pixels; ++p)
            for (size_t k = 0; k < src.size(); ++k)
                for (int64_t c = 0; c < chans[k]; ++c) out.push_back(outs[size_t(src[k])][size_t(p * chans[k] + c)]);
        return out;
    }

    static int64_t w_at(const PackedBinaryTensor& W, int64_t k, int64_t n) { return W.get(k * W.dims[1] + n); }

    /// Pre-pooling result, HWC with N channels (or N values for fc).
    std::vector<int64_t> mxv(const LayerDescriptor& L, const PackedBinaryTensor& W, const std::vector<int64_t>& a) const
    {
        const int64_t N = L.out_channels;
        if (L.kind == LayerKind::fc) {
            std::vector<int64_t> out(static_cast<size_t>(N), 0);
            for (int64_t n = 0; n < N; ++n)
                for (int64_t k = 0; k < int64_t(a.size()); ++k) out[size_t(n)] += a[size_t(k)] * w_at(W, k, n);
            return out;
        }
        const int64_t H = L.in_shape[0], Wd = L.in_shape[1], C = L.in_shape[2];
        auto hw = *L.conv_out_hw();
        std::vector<int64_t> out(static_cast<size_t>(hw.first * hw.second * N), 0);
        for (int64_t oy = 0; oy < hw.first; ++oy)
            for (int64_t ox = 0; ox < hw.second; ++ox)
                for (int64_t n = 0; n < N; ++n) {
                    int64_t s = 0;
                    for (int ky = 0; ky < L.kernel_h; ++ky)
                        for (int kx = 0; kx < L.kernel_w; ++kx) {
                            int64_t iy = oy * L.stride + ky - L.padding, ix = ox * L.stride + kx - L.padding;
                            if (iy < 0 || ix < 0 || iy >= H || ix >= Wd) continue;
                            for (int64_t c = 0; c < C; ++c)
                                s += a[size_t((iy * Wd + ix) * C + c)] * w_at(W, (ky * L.kernel_w + kx) * C + c, n);
                        }
                    out[size_t((oy * hw.second + ox) * N + n)] = s;
                }
        return out;
    }

    static std::pair<std::vector<int64_t>, int64_t> pool(const LayerDescriptor& L, const std::vector<int64_t>& acc)
    {
        if (!L.pool) return {acc, 1};
        const int64_t N = L.out_channels;
        auto in = *L.conv_out_hw();
        auto out = *L.out_hw();
        const int w = L.pool->window, st = L.pool->stride;
        std::vector<int64_t> res;
        for (int64_t py = 0; py < out.first; ++py)
            for (int64_t px = 0; px < out.second; ++px)
                for (int64_t n = 0; n < N; ++n) {
                    int64_t best = INT64_MIN, sum = 0;
                    for (int dy = 0; dy < w; ++dy)
                        for (int dx = 0; dx < w; ++dx) {
                            int64_t v = acc[size_t(((py * st + dy) * in.second + px * st + dx) * N + n)];
                            best = std::max(best, v);
                            sum += v;
                        }
                    res.push_back(L.pool->kind == PoolKind::max ? best : sum);
                }
        return {res, L.pool->kind == PoolKind::max ? 1 : int64_t(w) * w};
    }

    const NetworkDescriptor& net_;
};

} // namespace bnnpim
