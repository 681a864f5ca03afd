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

#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "packed_tensor.hpp"

namespace bnnpim {

enum class LayerKind { conv, fc };
enum class PoolKind { max, avg };
enum class Activation { sign, none };
enum class Combine { concat, add };

struct Pool {
    PoolKind kind = PoolKind::max;
    int window = 2;
    int stride = 2;
    bool operator==(const Pool&) const = default;
};

/// Index of the network input in LayerDescriptor::inputs.
inline constexpr int kNetworkInput = -1;

struct LayerDescriptor {
    LayerKind kind = LayerKind::fc;
    std::vector<int64_t> in_shape;  // {H, W, C} for conv, {features} for fc
    int64_t out_channels = 0;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;
    bool floor_mode = false;  // drop trailing rows/cols that do not fill a window
    std::optional<Pool> pool;
    Activation activation = Activation::sign;
    int input_precision_bits = 1;
    std::vector<int> inputs;  // source layers; empty means {index - 1}
    Combine combine = Combine::concat;

    int64_t fan_in() const
    {
        if (kind == LayerKind::fc) return in_shape.empty() ? 0 : product(in_shape);
        return in_shape.size() == 3 ? int64_t(kernel_h) * kernel_w * in_shape[2] : 0;
    }

    /// Spatial size before pooling; nullopt when the geometry is not integral.
    std::optional<std::pair<int64_t, int64_t>> conv_out_hw() const
    {
        if (kind == LayerKind::fc) return std::pair<int64_t, int64_t>{1, 1};
        if (in_shape.size() != 3 || stride < 1) return std::nullopt;
        int64_t nh = in_shape[0] + 2 * padding - kernel_h;
        int64_t nw = in_shape[1] + 2 * padding - kernel_w;
        if (nh < 0 || nw < 0 || (!floor_mode && (nh % stride || nw % stride))) return std::nullopt;
        return std::pair<int64_t, int64_t>{nh / stride + 1, nw / stride + 1};
    }

    /// Spatial size after pooling.
    std::optional<std::pair<int64_t, int64_t>> out_hw() const
    {
        auto hw = conv_out_hw();
        if (!hw || !pool) return hw;
        if (pool->window < 1 || pool->stride < 1) return std::nullopt;
        int64_t nh = hw->first - pool->window, nw = hw->second - pool->window;
        if (nh < 0 || nw < 0 || (!floor_mode && (nh % pool->stride || nw % pool->stride))) return std::nullopt;
        return std::pair<int64_t, int64_t>{nh / pool->stride + 1, nw / pool->stride + 1};
    }

    /// Output activation shape ({H, W, C} or {N}); empty when not integral.
    std::vector<int64_t> out_shape() const
    {
        if (kind == LayerKind::fc) return {out_channels};
        auto hw = out_hw();
        if (!hw) return {};
        return {hw->first, hw->second, out_channels};
    }

    /// MxV positions per image (output pixels before pooling).
    int64_t positions() const
    {
        auto hw = conv_out_hw();
        return hw ? hw->first * hw->second : 0;
    }

    bool operator==(const LayerDescriptor&) const = default;
};

struct ThresholdVector {
    std::vector<double> tau;
    bool operator==(const ThresholdVector&) const = default;
};

struct NetworkDescriptor {
    std::string name;
    int class_count = 0;
    double final_scale = 1.0;
    std::vector<LayerDescriptor> layers;
    std::vector<PackedBinaryTensor> weights;    // {fan_in, out_channels}; may be empty for topology-only nets
    std::vector<ThresholdVector> thresholds;    // empty entry for activation == none

    bool has_weights() const { return !weights.empty(); }

    std::vector<int> sources(size_t i) const
    {
        if (!layers[i].inputs.empty()) return layers[i].inputs;
        return {static_cast<int>(i) - 1};
    }

    bool operator==(const NetworkDescriptor&) const = default;
};

struct Diagnostic {
    int layer = -1;
    std::string rule;
    std::string message;
};

/// Shape seen by layer i after combining its sources; empty when the sources disagree.
inline std::vector<int64_t> combined_input_shape(const NetworkDescriptor& net, size_t i)
{
    std::vector<int64_t> shape;
    for (int s : net.sources(i)) {
        std::vector<int64_t> sh;
        if (s == kNetworkInput)
            sh = net.layers[0].in_shape;
        else if (s >= 0 && size_t(s) < i)
            sh = net.layers[size_t(s)].out_shape();
        else
            return {};
        if (sh.empty()) return {};
        if (shape.empty()) {
            shape = sh;
        } else if (net.layers[i].combine == Combine::add) {
            if (sh != shape) return {};
        } else {
            if (sh.size() != shape.size()) return {};
            for (size_t d = 0; d + 1 < sh.size(); ++d)
                if (sh[d] != shape[d]) return {};
            shape.back() += sh.back();
        }
    }
    return shape;
}

/// Checks shape/threshold invariants. With topology_only, weight and threshold
/// presence is not required (hardware descriptors carry shapes only).
inline std::vector<Diagnostic> validate_chain(const NetworkDescriptor& net, bool topology_only = false)
{
    std::vector<Diagnostic> out;
    auto diag = [&](size_t i, std::string rule, std::string msg) {
        out.push_back({static_cast<int>(i), std::move(rule), std::move(msg)});
    };
    const size_t n = net.layers.size();
    if (net.has_weights() && net.weights.size() != n)
        diag(0, "weight count", "expected one weight tensor per layer");
    if (!topology_only && net.thresholds.size() != n && n > 0)
        diag(0, "threshold count", "expected one threshold slot per layer");

    for (size_t i = 0; i < n; ++i) {
        const auto& L = net.layers[i];
        if (L.kind == LayerKind::conv && L.in_shape.size() != 3) {
            diag(i, "input rank", "conv input must be {H, W, C}");
            continue;
        }
        if (L.kind == LayerKind::fc && L.in_shape.size() != 1) {
            diag(i, "input rank", "fc input must be {features}");
            continue;
        }
        if (L.out_channels < 1 || L.fan_in() < 1) diag(i, "positive sizes", "fan_in and out_channels must be >= 1");
        if (L.kind == LayerKind::fc && L.pool) diag(i, "pool on fc", "pooling is only defined for conv layers");
        if (L.kind == LayerKind::conv && (L.kernel_h < 1 || L.kernel_w < 1 || L.stride < 1 || L.padding < 0))
            diag(i, "conv geometry", "kernel/stride must be >= 1 and padding >= 0");
        else if (L.out_shape().empty())
            diag(i, "non-integral output shape", "output spatial dims are not positive integers");

        if (i == 0 && L.input_precision_bits < 1) diag(i, "input precision", "first layer precision must be >= 1");
        if (L.input_precision_bits > 32) diag(i, "input precision", "precision above 32 bits");
        if (i > 0 && L.input_precision_bits != 1)
            diag(i, "input precision", "only the first layer may take multi-bit input");

        auto src = net.sources(i);
        bool src_ok = !src.empty();
        for (int s : src) {
            if (i == 0 ? s != kNetworkInput : (s < 0 || size_t(s) >= i)) src_ok = false;
        }
        if (!src_ok) {
            diag(i, "sources", i == 0 ? "first layer must read the network input only"
                                      : "sources must be earlier layers");
        } else if (i > 0) {
            auto cin = combined_input_shape(net, i);
            bool match = !cin.empty() &&
                         (L.kind == LayerKind::fc ? product(cin) == product(L.in_shape) : cin == L.in_shape);
            if (!match) diag(i, "shape chain", "input shape does not match combined source shapes");
        }

        bool last = i + 1 == n;
        if (last && L.activation != Activation::none) diag(i, "logit layer", "last layer must have activation none");
        if (!last && L.activation != Activation::sign) diag(i, "activation", "hidden layers must use sign activation");
        if (last && net.class_count != L.out_channels)
            diag(i, "class count", "last layer out_channels must equal class_count");

        if (!topology_only && L.activation == Activation::sign) {
            if (i >= net.thresholds.size() || net.thresholds[i].tau.empty())
                diag(i, "missing thresholds", "sign layer has no threshold vector");
            else if (int64_t(net.thresholds[i].tau.size()) != L.out_channels)
                diag(i, "threshold length", "threshold vector length must equal out_channels");
        }
        if (net.has_weights() && i < net.weights.size()) {
            const auto& w = net.weights[i];
            if (w.size() != L.fan_in() * L.out_channels)
                diag(i, "weight size", "weight element count must equal fan_in x out_channels");
        }
    }
    return out;
}

} // namespace bnnpim
