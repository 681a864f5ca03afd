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
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "model_ir.hpp"
#include "parallel.hpp"
#include "quantizer.hpp"
#include "xbar.hpp"

namespace bnnpim {

enum class QuantScope { per_image, per_batch };

struct ExecutionConfig {
    int input_precision_bits = 8;
    int adc_resolution_bits = 8;
    int64_t rows = 128;
    int64_t cols = 128;
    CalibrationPolicy calibration;
    bool exact_mode = false;
    QuantScope quant_scope = QuantScope::per_image;

    void validate() const
    {
        if (input_precision_bits < 1 || input_precision_bits > 32) throw ConfigError("input precision out of range");
        if (!exact_mode && (adc_resolution_bits < 1 || adc_resolution_bits > 30))
            throw ConfigError("ADC resolution out of range");
        if (rows < 1 || cols < 1) throw ConfigError("subarray dims must be >= 1");
    }
};

struct LayerTrace {
    int64_t images = 0;
    int64_t tiles = 0;
    int64_t bitplanes = 0;
    int64_t adc_conversions = 0;
    int64_t macs = 0;
    uint64_t checksum = 0xcbf29ce484222325ull;

    bool operator==(const LayerTrace&) const = default;
};

inline uint64_t fnv1a(uint64_t h, const void* data, size_t n)
{
    auto p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Row-major P x K patch matrix.
template <typename T>
struct Patches {
    int64_t P = 0;
    int64_t K = 0;
    std::vector<T> v;
    std::span<const T> row(int64_t p) const { return {v.data() + p * K, size_t(K)}; }
};

/**
 * im2col lowering. act is HWC with the layer's in_shape; patch columns are
 * ordered (kh, kw, c_in) and padded positions hold 0. fc layers yield a
 * single row equal to the flattened input.
 */
template <typename T>
Patches<T> lower_conv(const LayerDescriptor& L, std::span<const T> act)
{
    if (int64_t(act.size()) != product(L.in_shape)) throw ShapeError("lower_conv: activation size mismatch");
    Patches<T> out;
    if (L.kind == LayerKind::fc) {
        out.P = 1;
        out.K = int64_t(act.size());
        out.v.assign(act.begin(), act.end());
        return out;
    }
    auto hw = L.conv_out_hw();
    if (!hw) throw ShapeError("lower_conv: non-integral output shape");
    const int64_t H = L.in_shape[0], W = L.in_shape[1], C = L.in_shape[2];
    const int64_t OH = hw->first, OW = hw->second;
    out.P = OH * OW;
    out.K = L.fan_in();
    out.v.assign(size_t(out.P * out.K), T(0));
    for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
            T* dst = &out.v[size_t((oy * OW + ox) * out.K)];
            for (int ky = 0; ky < L.kernel_h; ++ky) {
                int64_t iy = oy * L.stride - L.padding + ky;
                for (int kx = 0; kx < L.kernel_w; ++kx) {
                    int64_t ix = ox * L.stride - L.padding + kx;
                    T* d = dst + (int64_t(ky) * L.kernel_w + kx) * C;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                    const T* s = act.data() + (iy * W + ix) * C;
                    std::copy(s, s + C, d);
                }
            }
        }
    }
    return out;
}

/// Weight matrix of a layer mapped onto subarrays with one ADC spec per row tile.
struct CompiledLayer {
    std::vector<SubarrayTile> tiles;
    int64_t row_tiles = 0;
    int64_t col_tiles = 0;
    std::vector<AdcSpec> adc;
};

/// Histogram of raw column sums per layer, offset by +max_rows.
struct SumHistogram {
    int64_t offset = 0;
    std::vector<std::vector<uint64_t>> per_layer;
};

struct LayerResult {
    std::vector<int64_t> acc;        // P x N integer MxV result (after ADC and shift-add)
    std::vector<int64_t> pooled;     // after pooling (equal to acc when unpooled); sums for avg
    std::vector<int64_t> out_dims;
    std::vector<int8_t> act;         // +-1 HWC, sign layers
    std::vector<double> logits;      // logit layer
    double input_scale = 1.0;        // first layer only
    LayerTrace trace;
};

/**
 * A network bound to an execution config: weights are tiled once and ADC
 * clip ranges fixed, after which all forward calls are const and thread-safe.
 */
class Simulator {
public:
    Simulator(const NetworkDescriptor& net, ExecutionConfig cfg, const Dataset* calibration = nullptr)
        : net_(net), cfg_(cfg)
    {
        cfg_.validate();
        if (!net_.has_weights()) throw ConfigError("simulator needs a network with weights");
        auto diags = validate_chain(net_);
        if (!diags.empty()) throw ShapeError("invalid network: layer " + std::to_string(diags[0].layer) + " " + diags[0].rule);
        layers_.resize(net_.layers.size());
        for (size_t i = 0; i < net_.layers.size(); ++i) {
            auto& cl = layers_[i];
            cl.tiles = map_weights(net_.weights[i], cfg_.rows, cfg_.cols);
            cl.row_tiles = ceil_div(net_.layers[i].fan_in(), cfg_.rows);
            cl.col_tiles = ceil_div(net_.layers[i].out_channels, cfg_.cols);
            for (int64_t rt = 0; rt < cl.row_tiles; ++rt) cl.adc.push_back(lossless_adc(rows_in(i, rt)));
        }
        if (cfg_.exact_mode) return;
        if (cfg_.calibration.kind == CalibrationPolicy::Kind::full_range) {
            for (size_t i = 0; i < layers_.size(); ++i)
                for (int64_t rt = 0; rt < layers_[i].row_tiles; ++rt) {
                    int64_t r = rows_in(i, rt);
                    layers_[i].adc[size_t(rt)] = AdcSpec::make(cfg_.adc_resolution_bits, -r, r);
                }
            return;
        }
        if (!calibration || calibration->count() == 0)
            throw ConfigError("percentile calibration needs calibration samples");
        calibrate(*calibration);
    }

    const NetworkDescriptor& network() const { return net_; }
    const ExecutionConfig& config() const { return cfg_; }
    const CompiledLayer& layer(size_t i) const { return layers_[i]; }

    /// Scale the first layer would use for a batch under the configured scope.
    double batch_scale(std::span<const float> batch) const
    {
        return dynamic_scale(max_abs(batch), cfg_.input_precision_bits);
    }

    /**
     * Layer i on explicit inputs. For layer 0 pass `real` (the raw image) and
     * the quantization scale; otherwise pass the +-1 source activations (one per
     * add source, or one pre-concatenated tensor).
     */
    LayerResult run_layer(size_t i, std::span<const float> real, double scale,
                          const std::vector<std::vector<int8_t>>& sources, SumHistogram* hist = nullptr) const
    {
        const auto& L = net_.layers[i];
        const auto& cl = layers_[i];
        const int64_t N = L.out_channels;
        LayerResult r;
        r.trace.images = 1;
        r.trace.tiles = cl.row_tiles * cl.col_tiles;
        std::vector<int64_t> col_buf(static_cast<size_t>(cfg_.cols));
        Drive drive;
        int64_t P = 0;
        std::vector<uint64_t>* h = hist ? &hist->per_layer[i] : nullptr;

        auto emit = [&](int64_t rt, int64_t* sums, int64_t ncols, int64_t* acc_row, int64_t w) {
            const auto& spec = cl.adc[size_t(rt)];
            for (int64_t c = 0; c < ncols; ++c) {
                if (h) (*h)[size_t(sums[c] + hist->offset)]++;
                acc_row[c] += w * adc_quantize(sums[c], spec);
            }
        };

        if (i == 0) {
            const int B = cfg_.input_precision_bits;
            auto q = quantize_with_scale(real, L.in_shape, B, scale);
            r.input_scale = scale;
            auto pt = lower_conv<int64_t>(L, std::span<const int64_t>(q.values));
            P = pt.P;
            r.acc.assign(size_t(P * N), 0);
            r.trace.bitplanes = B;
            std::vector<uint8_t> plane;
            for (int64_t p = 0; p < P; ++p) {
                auto row = pt.row(p);
                for (int b = 0; b < B; ++b) {
                    int64_t w = BitPlaneSet::weight(b, B);
                    for (int64_t rt = 0; rt < cl.row_tiles; ++rt) {
                        const auto& t0 = cl.tiles[size_t(rt * cl.col_tiles)];
                        drive.reset(DriveMode::bitplane, t0.rows_used);
                        for (int64_t k = 0; k < t0.rows_used; ++k)
                            if ((static_cast<uint64_t>(row[size_t(t0.row_offset + k)]) >> b) & 1u)
                                drive.hi[size_t(k >> 6)] |= uint64_t(1) << (k & 63);
                        for (int64_t ct = 0; ct < cl.col_tiles; ++ct) {
                            const auto& t = cl.tiles[size_t(rt * cl.col_tiles + ct)];
                            column_sums_into(t, drive, col_buf.data());
                            emit(rt, col_buf.data(), t.cols_used, &r.acc[size_t(p * N + t.col_offset)], w);
                            r.trace.adc_conversions += t.cols_used;
                        }
                    }
                }
            }
        } else {
            if (sources.empty()) throw ShapeError("layer " + std::to_string(i) + ": no input activations");
            r.trace.bitplanes = int64_t(sources.size());
            for (const auto& src : sources) {
                auto pt = lower_conv<int8_t>(L, std::span<const int8_t>(src));
                if (P == 0) {
                    P = pt.P;
                    r.acc.assign(size_t(P * N), 0);
                }
                for (int64_t p = 0; p < P; ++p) {
                    auto row = pt.row(p);
                    for (int64_t rt = 0; rt < cl.row_tiles; ++rt) {
                        const auto& t0 = cl.tiles[size_t(rt * cl.col_tiles)];
                        drive.reset(DriveMode::xnor, t0.rows_used);
                        for (int64_t k = 0; k < t0.rows_used; ++k) {
                            int8_t a = row[size_t(t0.row_offset + k)];
                            if (a > 0) drive.hi[size_t(k >> 6)] |= uint64_t(1) << (k & 63);
                            if (a < 0) drive.lo[size_t(k >> 6)] |= uint64_t(1) << (k & 63);
                        }
                        for (int64_t ct = 0; ct < cl.col_tiles; ++ct) {
                            const auto& t = cl.tiles[size_t(rt * cl.col_tiles + ct)];
                            column_sums_into(t, drive, col_buf.data());
                            emit(rt, col_buf.data(), t.cols_used, &r.acc[size_t(p * N + t.col_offset)], 1);
                            r.trace.adc_conversions += t.cols_used;
                        }
                    }
                }
            }
        }
        r.trace.macs = P * L.fan_in() * N;
        r.trace.checksum = fnv1a(r.trace.checksum, r.acc.data(), r.acc.size() * sizeof(int64_t));
        finish_layer(i, r);
        return r;
    }

    /// Full forward pass for one image; per-layer results are kept when detail is non-null.
    std::vector<double> forward_sample(std::span<const float> x, double scale, std::vector<LayerResult>* detail = nullptr,
                                       std::vector<LayerTrace>* traces = nullptr, SumHistogram* hist = nullptr) const
    {
        const size_t n = net_.layers.size();
        std::vector<std::vector<int8_t>> outs(n);
        std::vector<double> logits;
        if (detail) detail->clear();
        for (size_t i = 0; i < n; ++i) {
            auto r = run_layer(i, x, scale, i == 0 ? std::vector<std::vector<int8_t>>{} : gather(i, outs), hist);
            if (traces) accumulate((*traces)[i], r.trace);
            if (i + 1 == n) logits = r.logits;
            outs[i] = r.act;
            if (detail) detail->push_back(std::move(r));
        }
        return logits;
    }

    struct BatchResult {
        std::vector<double> logits;  // count x class_count
        std::vector<LayerTrace> traces;
    };

    /// Batched forward; samples run in parallel and are merged in sample order.
    BatchResult forward_network(std::span<const float> batch, int64_t count, int workers = 1) const
    {
        const int64_t S = product(net_.layers[0].in_shape);
        if (count < 1 || int64_t(batch.size()) != count * S) throw ShapeError("forward_network: batch shape mismatch");
        const size_t n = net_.layers.size();
        const int64_t classes = net_.layers.back().out_channels;
        double shared = cfg_.quant_scope == QuantScope::per_batch ? batch_scale(batch) : 0.0;
        BatchResult out;
        out.logits.assign(size_t(count * classes), 0.0);
        std::vector<std::vector<LayerTrace>> per(static_cast<size_t>(count), std::vector<LayerTrace>(n));
        parallel_for(count, workers, [&](int64_t s) {
            auto x = batch.subspan(size_t(s * S), size_t(S));
            double scale = cfg_.quant_scope == QuantScope::per_batch ? shared : batch_scale(x);
            auto lg = forward_sample(x, scale, nullptr, &per[size_t(s)]);
            std::copy(lg.begin(), lg.end(), out.logits.begin() + s * classes);
        });
        out.traces.assign(n, LayerTrace{});
        for (int64_t s = 0; s < count; ++s)
            for (size_t i = 0; i < n; ++i) accumulate(out.traces[i], per[size_t(s)][i]);
        return out;
    }

    /// Top-1 accuracy; argmax ties resolve to the lowest class index.
    double evaluate_accuracy(const Dataset& data, int workers = 1) const
    {
        if (data.count() == 0) throw ConfigError("evaluate_accuracy: empty dataset");
        if (data.sample_shape != net_.layers[0].in_shape && data.sample_size() != product(net_.layers[0].in_shape))
            throw ShapeError("dataset sample shape does not match the network input");
        for (auto l : data.labels)
            if (l < 0 || l >= net_.class_count) throw FormatError("dataset label outside [0, class_count)");
        auto res = forward_network(data.data, data.count(), workers);
        const int64_t classes = net_.layers.back().out_channels;
        int64_t correct = 0;
        for (int64_t s = 0; s < data.count(); ++s)
            if (argmax(std::span<const double>(res.logits).subspan(size_t(s * classes), size_t(classes))) ==
                data.labels[size_t(s)])
                ++correct;
        return double(correct) / double(data.count());
    }

    static int argmax(std::span<const double> v)
    {
        int best = 0;
        for (size_t j = 1; j < v.size(); ++j)
            if (v[j] > v[size_t(best)]) best = int(j);
        return best;
    }

    /// Source activations for layer i: one tensor per add source, or one concatenated tensor.
    std::vector<std::vector<int8_t>> gather(size_t i, const std::vector<std::vector<int8_t>>& outs) const
    {
        auto src = net_.sources(i);
        std::vector<std::vector<int8_t>> res;
        if (net_.layers[i].combine == Combine::add || src.size() == 1) {
            for (int s : src) res.push_back(outs[size_t(s)]);
            return res;
        }
        // concat along channels, pixel by pixel
        std::vector<int64_t> chans;
        int64_t pixels = 0;
        for (int s : src) {
            auto sh = net_.layers[size_t(s)].out_shape();
            chans.push_back(sh.back());
            pixels = product(sh) / sh.back();
        }
        std::vector<int8_t> cat;
        cat.reserve(size_t(pixels * std::accumulate(chans.begin(), chans.end(), int64_t(0))));
        for (int64_t px = 0; px < pixels; ++px)
            for (size_t k = 0; k < src.size(); ++k) {
                const auto& o = outs[size_t(src[k])];
                cat.insert(cat.end(), o.begin() + px * chans[k], o.begin() + (px + 1) * chans[k]);
            }
        res.push_back(std::move(cat));
        return res;
    }

private:
    int64_t rows_in(size_t i, int64_t rt) const
    {
        return std::min(cfg_.rows, net_.layers[i].fan_in() - rt * cfg_.rows);
    }

    static void accumulate(LayerTrace& into, const LayerTrace& t)
    {
        into.images += t.images;
        into.tiles = t.tiles;
        into.bitplanes = t.bitplanes;
        into.adc_conversions += t.adc_conversions;
        into.macs += t.macs;
        into.checksum = fnv1a(into.checksum, &t.checksum, sizeof t.checksum);
    }

    void finish_layer(size_t i, LayerResult& r) const
    {
        const auto& L = net_.layers[i];
        const int64_t N = L.out_channels;
        int64_t area = 1;
        if (L.pool) {
            auto hw = L.conv_out_hw();
            auto ohw = L.out_hw();
            const int64_t OH = hw->first, OW = hw->second, PH = ohw->first, PW = ohw->second;
            const int win = L.pool->window, st = L.pool->stride;
            area = int64_t(win) * win;
            r.pooled.assign(size_t(PH * PW * N), 0);
            for (int64_t py = 0; py < PH; ++py)
                for (int64_t px = 0; px < PW; ++px)
                    for (int64_t c = 0; c < N; ++c) {
                        int64_t acc = L.pool->kind == PoolKind::max ? std::numeric_limits<int64_t>::min() : 0;
                        for (int dy = 0; dy < win; ++dy)
                            for (int dx = 0; dx < win; ++dx) {
                                int64_t v = r.acc[size_t(((py * st + dy) * OW + px * st + dx) * N + c)];
                                acc = L.pool->kind == PoolKind::max ? std::max(acc, v) : acc + v;
                            }
                        r.pooled[size_t((py * PW + px) * N + c)] = acc;
                    }
            if (L.pool->kind == PoolKind::max) area = 1;
            (void)OH;
        } else {
            r.pooled = r.acc;
        }
        r.out_dims = L.out_shape();
        const double scale = i == 0 ? r.input_scale : 1.0;
        if (L.activation == Activation::sign) {
            const auto& tau = net_.thresholds[i].tau;
            r.act.resize(r.pooled.size());
            for (size_t k = 0; k < r.pooled.size(); ++k) {
                double lhs = double(r.pooled[k]) * scale;
                double rhs = tau[k % size_t(N)] * double(area);
                r.act[k] = lhs >= rhs ? int8_t(1) : int8_t(-1);
            }
        } else {
            r.logits.resize(r.pooled.size());
            for (size_t k = 0; k < r.pooled.size(); ++k)
                r.logits[k] = double(r.pooled[k]) * scale * net_.final_scale / double(area);
        }
    }

    void calibrate(const Dataset& calib)
    {
        SumHistogram hist;
        int64_t maxr = cfg_.rows;
        hist.offset = maxr;
        hist.per_layer.assign(layers_.size(), std::vector<uint64_t>(size_t(2 * maxr + 1), 0));
        for (int64_t s = 0; s < calib.count(); ++s) {
            auto x = calib.sample(s);
            forward_sample(x, batch_scale(x), nullptr, nullptr, &hist);
        }
        const double tail = (1.0 - cfg_.calibration.percentile / 100.0) / 2.0;
        for (size_t i = 0; i < layers_.size(); ++i) {
            const auto& h = hist.per_layer[i];
            uint64_t total = 0;
            for (auto c : h) total += c;
            auto quant = [&](double q) {
                auto rank = std::max<uint64_t>(1, uint64_t(std::ceil(q * double(total))));
                uint64_t run = 0;
                for (size_t k = 0; k < h.size(); ++k) {
                    run += h[k];
                    if (run >= rank) return int64_t(k) - hist.offset;
                }
                return int64_t(h.size()) - 1 - hist.offset;
            };
            int64_t c = total ? std::max(std::abs(quant(tail)), std::abs(quant(1.0 - tail))) : 0;
            for (int64_t rt = 0; rt < layers_[i].row_tiles; ++rt) {
                int64_t r = rows_in(i, rt);
                layers_[i].adc[size_t(rt)] = AdcSpec::make(cfg_.adc_resolution_bits, -std::min(c, r), std::min(c, r));
            }
        }
    }

    NetworkDescriptor net_;
    ExecutionConfig cfg_;
    std::vector<CompiledLayer> layers_;
};

/// Convenience wrapper matching the single-call form.
inline double evaluate_accuracy(const NetworkDescriptor& net, const Dataset& data, const ExecutionConfig& cfg,
                                int workers = 1, const Dataset* calibration = nullptr)
{
    return Simulator(net, cfg, calibration).evaluate_accuracy(data, workers);
}

} // namespace bnnpim
