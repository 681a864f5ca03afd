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
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "common.hpp"
#include "packed_tensor.hpp"

namespace bnnpim {

/**
 * One R x C crossbar holding a block of a K x N signed binary weight matrix.
 * Each weight uses two cells: (g+, g-) = (1, 0) for +1 and (0, 1) for -1.
 * Cells are stored column-major, packed 64 rows per word.
 */
struct SubarrayTile {
    int64_t rows_used = 0;
    int64_t cols_used = 0;
    int64_t row_offset = 0;
    int64_t col_offset = 0;
    int64_t words_per_col = 0;
    std::vector<uint64_t> pos;
    std::vector<uint64_t> neg;

    int g_pos(int64_t r, int64_t c) const { return int((pos[size_t(c * words_per_col + (r >> 6))] >> (r & 63)) & 1u); }
    int g_neg(int64_t r, int64_t c) const { return int((neg[size_t(c * words_per_col + (r >> 6))] >> (r & 63)) & 1u); }
    int weight(int64_t r, int64_t c) const { return g_pos(r, c) - g_neg(r, c); }
};

/// Splits W (dims {K, N}) into ceil(K/R) x ceil(N/C) tiles, row-tile major.
inline std::vector<SubarrayTile> map_weights(const PackedBinaryTensor& W, int64_t R, int64_t C)
{
    if (W.dims.size() != 2 || W.dims[0] < 1 || W.dims[1] < 1) throw ShapeError("map_weights: W must be K x N");
    if (R < 1 || C < 1) throw ConfigError("map_weights: subarray dims must be >= 1");
    const int64_t K = W.dims[0], N = W.dims[1];
    std::vector<SubarrayTile> tiles;
    tiles.reserve(size_t(ceil_div(K, R) * ceil_div(N, C)));
    for (int64_t r0 = 0; r0 < K; r0 += R) {
        for (int64_t c0 = 0; c0 < N; c0 += C) {
            SubarrayTile t;
            t.row_offset = r0;
            t.col_offset = c0;
            t.rows_used = std::min(R, K - r0);
            t.cols_used = std::min(C, N - c0);
            t.words_per_col = ceil_div(t.rows_used, 64);
            t.pos.assign(size_t(t.words_per_col * t.cols_used), 0);
            t.neg.assign(t.pos.size(), 0);
            for (int64_t r = 0; r < t.rows_used; ++r) {
                for (int64_t c = 0; c < t.cols_used; ++c) {
                    uint64_t bit = uint64_t(1) << (r & 63);
                    size_t w = size_t(c * t.words_per_col + (r >> 6));
                    if (W.get((r0 + r) * N + c0 + c) > 0)
                        t.pos[w] |= bit;
                    else
                        t.neg[w] |= bit;
                }
            }
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

enum class DriveMode { xnor, bitplane };

/**
 * Wordline drive pattern for one tile. In xnor mode `hi` marks rows driven as
 * +1 and `lo` rows driven as -1; rows in neither are masked (zero padding).
 * In bitplane mode `hi` marks rows with v = 1 and `lo` is unused.
 */
struct Drive {
    DriveMode mode = DriveMode::xnor;
    int64_t length = 0;
    std::vector<uint64_t> hi;
    std::vector<uint64_t> lo;

    void reset(DriveMode m, int64_t n)
    {
        mode = m;
        length = n;
        hi.assign(size_t(ceil_div(n, 64)), 0);
        lo.assign(hi.size(), 0);
    }

    /// a in {-1, 0, +1}; 0 masks the row.
    static Drive xnor(std::span<const int8_t> a)
    {
        Drive d;
        d.reset(DriveMode::xnor, int64_t(a.size()));
        for (size_t i = 0; i < a.size(); ++i) {
            if (a[i] > 0) d.hi[i >> 6] |= uint64_t(1) << (i & 63);
            if (a[i] < 0) d.lo[i >> 6] |= uint64_t(1) << (i & 63);
        }
        return d;
    }

    /// v in {0, 1}.
    static Drive bitplane(std::span<const uint8_t> v)
    {
        Drive d;
        d.reset(DriveMode::bitplane, int64_t(v.size()));
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i]) d.hi[i >> 6] |= uint64_t(1) << (i & 63);
        return d;
    }
};

/// Ideal column currents in integer units, written to out[0 .. cols_used).
inline void column_sums_into(const SubarrayTile& t, const Drive& d, int64_t* out)
{
    if (d.length != t.rows_used)
        throw ShapeError("column_sums: drive length " + std::to_string(d.length) + " != rows_used " +
                         std::to_string(t.rows_used));
    const int64_t W = t.words_per_col;
    for (int64_t c = 0; c < t.cols_used; ++c) {
        const uint64_t* gp = &t.pos[size_t(c * W)];
        const uint64_t* gn = &t.neg[size_t(c * W)];
        int64_t s = 0;
        if (d.mode == DriveMode::xnor) {
            for (int64_t w = 0; w < W; ++w) {
                uint64_t h = d.hi[size_t(w)], l = d.lo[size_t(w)];
                s += std::popcount(h & gp[w]) + std::popcount(l & gn[w]) - std::popcount(h & gn[w]) -
                     std::popcount(l & gp[w]);
            }
        } else {
            for (int64_t w = 0; w < W; ++w) {
                uint64_t v = d.hi[size_t(w)];
                s += std::popcount(v & gp[w]) - std::popcount(v & gn[w]);
            }
        }
        out[c] = s;
    }
}

inline std::vector<int64_t> column_sums(const SubarrayTile& t, const Drive& d)
{
    std::vector<int64_t> out(static_cast<size_t>(t.cols_used));
    column_sums_into(t, d, out.data());
    return out;
}

/// Linear integer ADC: 2^A codes, step delta, levels clip_lo + code * delta.
struct AdcSpec {
    int resolution_bits = 8;
    int64_t clip_lo = 0;
    int64_t clip_hi = 0;
    int64_t step = 1;

    static AdcSpec make(int A, int64_t lo, int64_t hi)
    {
        if (A < 1 || A > 30) throw ConfigError("ADC resolution must be in 1..30");
        if (lo > hi) throw ConfigError("ADC clip_lo > clip_hi");
        AdcSpec s;
        s.resolution_bits = A;
        s.clip_lo = lo;
        s.clip_hi = hi;
        s.step = std::max<int64_t>(1, ceil_div(hi - lo + 1, int64_t(1) << A));
        return s;
    }

    int64_t max_code() const { return (int64_t(1) << resolution_bits) - 1; }

    /// True when every integer in the clip range has its own code.
    bool lossless() const { return (int64_t(1) << resolution_bits) >= clip_hi - clip_lo + 1; }

    bool operator==(const AdcSpec&) const = default;
};

inline int64_t adc_quantize(int64_t s, const AdcSpec& a)
{
    int64_t n = std::clamp(s, a.clip_lo, a.clip_hi) - a.clip_lo;
    int64_t code = (2 * n + a.step) / (2 * a.step);  // round half up; n >= 0
    code = std::clamp<int64_t>(code, 0, a.max_code());
    return a.clip_lo + code * a.step;
}

/// Smallest ADC that passes every sum of a tile with rows_used rows unchanged.
inline AdcSpec lossless_adc(int64_t rows_used)
{
    int A = 1;
    while ((int64_t(1) << A) < 2 * rows_used + 1) ++A;
    return AdcSpec::make(A, -rows_used, rows_used);
}

struct CalibrationPolicy {
    enum class Kind { full_range, percentile };
    Kind kind = Kind::full_range;
    double percentile = 99.9;

    static CalibrationPolicy full_range() { return {}; }
    static CalibrationPolicy central(double p) { return {Kind::percentile, p}; }
};

/// Nearest-rank quantile of a sorted sample set.
inline int64_t sorted_quantile(const std::vector<int64_t>& sorted, double q)
{
    if (sorted.empty()) return 0;
    double rank = std::ceil(q * double(sorted.size()));
    auto idx = static_cast<int64_t>(rank) - 1;
    idx = std::clamp<int64_t>(idx, 0, int64_t(sorted.size()) - 1);
    return sorted[size_t(idx)];
}

/**
 * full_range: clip to [-rows_used, rows_used].
 * percentile p: take the central p% of the samples and symmetrize around zero.
 */
inline AdcSpec calibrate_adc(std::span<const int64_t> samples, int A, const CalibrationPolicy& policy,
                             int64_t rows_used)
{
    if (policy.kind == CalibrationPolicy::Kind::full_range) return AdcSpec::make(A, -rows_used, rows_used);
    if (!(policy.percentile > 0 && policy.percentile <= 100))
        throw ConfigError("calibration percentile must be in (0, 100]");
    if (samples.empty()) throw ConfigError("percentile calibration needs at least one sample");
    std::vector<int64_t> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    double tail = (1.0 - policy.percentile / 100.0) / 2.0;
    int64_t lo = sorted_quantile(v, tail), hi = sorted_quantile(v, 1.0 - tail);
    int64_t c = std::max(std::abs(lo), std::abs(hi));
    if (rows_used > 0) c = std::min(c, rows_used);
    return AdcSpec::make(A, -c, c);
}

} // namespace bnnpim
