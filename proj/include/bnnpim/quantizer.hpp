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
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "common.hpp"
#include "model_ir.hpp"
#include "packed_tensor.hpp"

namespace bnnpim {

struct QuantizedTensor {
    std::vector<int64_t> dims;
    std::vector<int64_t> values;
    double scale = 1.0;
    int precision_bits = 1;

    int64_t min_value() const { return -(int64_t(1) << (precision_bits - 1)); }
    int64_t max_value() const { return (int64_t(1) << (precision_bits - 1)) - 1; }
};

/// Two's-complement bit planes, LSB first. plane[b][i] is bit b of element i.
struct BitPlaneSet {
    std::vector<int64_t> dims;
    int precision_bits = 1;
    std::vector<std::vector<uint8_t>> planes;

    /// 2^b, except the MSB plane which carries -2^(B-1).
    static int64_t weight(int b, int B)
    {
        int64_t w = int64_t(1) << b;
        return b == B - 1 ? -w : w;
    }

    std::vector<int64_t> reconstruct() const
    {
        std::vector<int64_t> out(planes.empty() ? 0 : planes[0].size(), 0);
        for (int b = 0; b < precision_bits; ++b) {
            int64_t w = weight(b, precision_bits);
            for (size_t i = 0; i < out.size(); ++i)
                if (planes[size_t(b)][i]) out[i] += w;
        }
        return out;
    }
};

/// Round half away from zero, as std::round.
inline double round_half_away(double v) { return std::round(v); }

/// Scale for a tensor whose largest magnitude is max_abs.
inline double dynamic_scale(double max_abs, int B)
{
    if (!(max_abs > 0)) return 1.0;
    if (B == 1) return max_abs;
    return max_abs / double((int64_t(1) << (B - 1)) - 1);
}

inline void check_precision(int B)
{
    if (B < 1 || B > 32) throw ConfigError("precision bits must be in 1..32, got " + std::to_string(B));
}

/// Quantizes with an explicit scale (shared-scale batches use this directly).
template <typename T>
QuantizedTensor quantize_with_scale(std::span<const T> x, std::vector<int64_t> dims, int B, double scale)
{
    check_precision(B);
    QuantizedTensor q;
    q.dims = std::move(dims);
    q.precision_bits = B;
    q.scale = scale;
    const int64_t lo = q.min_value(), hi = B == 1 ? 0 : q.max_value();
    q.values.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double r = round_half_away(double(x[i]) / scale);
        q.values[i] = std::clamp(static_cast<int64_t>(std::clamp(r, -9.0e18, 9.0e18)), lo, hi);
    }
    return q;
}

template <typename T>
double max_abs(std::span<const T> x)
{
    double m = 0;
    for (auto v : x) m = std::max(m, std::fabs(double(v)));
    return m;
}

template <typename T>
QuantizedTensor quantize_dynamic(std::span<const T> x, std::vector<int64_t> dims, int B)
{
    check_precision(B);
    if (x.empty()) throw ShapeError("quantize_dynamic: empty tensor");
    return quantize_with_scale(x, std::move(dims), B, dynamic_scale(max_abs(x), B));
}

inline QuantizedTensor quantize_dynamic(const std::vector<double>& x, int B)
{
    return quantize_dynamic(std::span<const double>(x), {int64_t(x.size())}, B);
}

inline BitPlaneSet bit_serialize(const QuantizedTensor& q)
{
    BitPlaneSet s;
    s.dims = q.dims;
    s.precision_bits = q.precision_bits;
    s.planes.assign(size_t(q.precision_bits), std::vector<uint8_t>(q.values.size(), 0));
    for (size_t i = 0; i < q.values.size(); ++i) {
        auto u = static_cast<uint64_t>(q.values[i]);
        for (int b = 0; b < q.precision_bits; ++b) s.planes[size_t(b)][i] = uint8_t((u >> b) & 1u);
    }
    return s;
}

/// +1 where x >= tau_c, else -1. The channel index is the fastest-varying one
/// (x is HWC or a flat feature vector).
template <typename T>
PackedBinaryTensor binarize(std::span<const T> x, std::vector<int64_t> dims, const ThresholdVector& tau)
{
    const size_t C = tau.tau.size();
    if (C == 0 || dims.empty() || int64_t(C) != dims.back() || int64_t(x.size()) != product(dims))
        throw ShapeError("binarize: channel count does not match threshold length");
    PackedBinaryTensor out(std::move(dims));
    for (size_t i = 0; i < x.size(); ++i)
        if (double(x[i]) >= tau.tau[i % C]) out.bits[i >> 3] |= uint8_t(1u << (i & 7));
    return out;
}

} // namespace bnnpim
