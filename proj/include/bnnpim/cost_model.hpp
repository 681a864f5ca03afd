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
#include <string>
#include <vector>

#include "common.hpp"
#include "hw_config.hpp"
#include "model_ir.hpp"

namespace bnnpim {

/// Per-image event counts for one layer.
struct LayerCounts {
    int index = -1;
    int64_t fan_in = 0;
    int64_t out_channels = 0;
    int64_t positions = 0;
    int64_t planes = 0;       // input bit-planes for the first layer, add sources otherwise
    int64_t row_tiles = 0;
    int64_t col_tiles = 0;
    int64_t n_tiles = 0;      // ceil(K/R) * ceil(N/C)
    int64_t n_subarrays = 0;  // allocated, rounded up to whole macro tiles
    int64_t n_adc_convs = 0;
    int64_t n_buffer_accesses = 0;
    int64_t n_ic_transfers = 0;
    int64_t n_accum_ops = 0;
    int64_t n_macs = 0;
    // serialized steps that set the stage latency
    int64_t adc_steps = 0;
    int64_t accum_steps = 0;
    int64_t drive_steps = 0;

    void add(const LayerCounts& o)
    {
        n_tiles += o.n_tiles;
        n_subarrays += o.n_subarrays;
        n_adc_convs += o.n_adc_convs;
        n_buffer_accesses += o.n_buffer_accesses;
        n_ic_transfers += o.n_ic_transfers;
        n_accum_ops += o.n_accum_ops;
        n_macs += o.n_macs;
        adc_steps += o.adc_steps;
        accum_steps += o.accum_steps;
        drive_steps += o.drive_steps;
    }
};

struct MappingSummary {
    std::vector<LayerCounts> layers;
    LayerCounts totals;
};

/// Counting rules applied layer by layer; works on shape-only descriptors.
inline MappingSummary compute_mapping(const NetworkDescriptor& net, const HardwareConfig& hw)
{
    MappingSummary m;
    const int64_t R = hw.rows, C = hw.cols, M = hw.mux, W = hw.bus_width_bits;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const auto& L = net.layers[i];
        LayerCounts c;
        c.index = int(i);
        c.fan_in = L.fan_in();
        c.out_channels = L.out_channels;
        c.positions = L.positions();
        c.planes = i == 0 ? L.input_precision_bits
                          : (L.combine == Combine::add ? int64_t(net.sources(i).size()) : 1);
        c.row_tiles = ceil_div(c.fan_in, R);
        c.col_tiles = ceil_div(c.out_channels, C);
        c.n_tiles = c.row_tiles * c.col_tiles;
        c.n_subarrays = round_up(c.row_tiles, hw.macro_rows) * round_up(c.col_tiles, hw.macro_cols);
        const int64_t P = c.positions, Pl = c.planes;
        c.n_adc_convs = P * c.n_tiles * ceil_div(C, M) * Pl;
        const int64_t in_words = ceil_div(c.fan_in * Pl, W), out_words = ceil_div(c.out_channels, W);
        c.n_buffer_accesses = P * (in_words + out_words);
        c.n_ic_transfers = P * (c.col_tiles * in_words + c.row_tiles * out_words);
        c.n_accum_ops = P * c.out_channels * (c.row_tiles * Pl - 1);
        c.n_macs = P * c.fan_in * c.out_channels;
        c.adc_steps = P * Pl * M;
        c.accum_steps = P * Pl * c.row_tiles;
        c.drive_steps = P * Pl;
        m.totals.add(c);
        m.layers.push_back(c);
    }
    return m;
}

struct AreaBreakdown {  // mm^2
    double chip = 0, cim = 0, ic = 0, adc = 0, accum = 0, other = 0;
    int64_t n_adc_instances = 0;
};

struct LatencyBreakdown {  // ns per image
    double total = 0, buffer = 0, ic = 0, adc = 0, accum = 0, other = 0;
    int bottleneck_layer = -1;
    std::vector<double> stage_ns;
};

struct EnergyBreakdown {  // pJ per image
    double total = 0, dynamic = 0, leakage = 0, buffer = 0, ic = 0, adc = 0, accum = 0, other = 0;
};

struct Metrics {
    double fps = 0, tops = 0, tops_per_w = 0, tops_per_cm2 = 0;
};

struct ChipReport {
    int adc_bits = 0;
    double clock_period_ns = 0;
    int64_t total_macs = 0;
    AreaBreakdown area;
    LatencyBreakdown latency;
    EnergyBreakdown energy;
    Metrics metrics;
};

inline constexpr double kUm2PerMm2 = 1e6;

inline AreaBreakdown area_report(const MappingSummary& m, const HardwareConfig& hw, int A)
{
    hw.require(A);
    AreaBreakdown a;
    const double S = double(m.totals.n_subarrays);
    a.n_adc_instances = m.totals.n_subarrays * hw.adcs_per_subarray();
    const double per_adc = double(a.n_adc_instances);
    a.cim = S * double(hw.rows * hw.cols) * 2.0 * hw.cim_cell_area_um2 / kUm2PerMm2;
    a.adc = per_adc * hw.adc_area_um2.at(A) / kUm2PerMm2;
    a.accum = per_adc * hw.accum_area_um2.at(A) / kUm2PerMm2;
    if (m.totals.n_subarrays > 0) {
        a.ic = (hw.ic_area_um2_per_chip.at(A) + S * hw.ic_area_um2_per_subarray.at(A)) / kUm2PerMm2;
        a.other = (hw.periphery_area_um2_per_chip.at(A) + S * hw.periphery_area_um2_per_subarray.at(A) +
                   hw.buffer_area_um2.at(A)) /
                  kUm2PerMm2;
    }
    a.chip = a.cim + a.ic + a.adc + a.accum + a.other;
    return a;
}

/// One layer's stage latency split into components (ns).
inline LatencyBreakdown stage_latency(const LayerCounts& c, const HardwareConfig& hw, int A)
{
    LatencyBreakdown s;
    s.buffer = double(c.n_buffer_accesses) * hw.buffer_latency_cycles.at(A) * hw.clock_period_ns.at(A);
    s.ic = double(c.n_ic_transfers) * hw.ic_latency_ns.at(A);
    s.adc = double(c.adc_steps) * hw.adc_latency_ns.at(A);
    s.accum = double(c.accum_steps) * hw.accum_latency_ns.at(A);
    s.other = double(c.drive_steps) * hw.periphery_latency_ns.at(A);
    s.total = s.buffer + s.ic + s.adc + s.accum + s.other;
    return s;
}

/**
 * Pipelined: the slowest layer sets the per-image latency and its components
 * are reported. Unpipelined: layers run back to back and components add up.
 */
inline LatencyBreakdown latency_report(const MappingSummary& m, const HardwareConfig& hw, int A)
{
    hw.require(A);
    LatencyBreakdown out;
    for (const auto& c : m.layers) {
        auto s = stage_latency(c, hw, A);
        out.stage_ns.push_back(s.total);
        if (hw.pipeline) {
            if (out.bottleneck_layer < 0 || s.total > out.total) {
                auto stages = std::move(out.stage_ns);
                out = s;
                out.stage_ns = std::move(stages);
                out.bottleneck_layer = c.index;
            }
        } else {
            out.buffer += s.buffer;
            out.ic += s.ic;
            out.adc += s.adc;
            out.accum += s.accum;
            out.other += s.other;
            out.total += s.total;
        }
    }
    return out;
}

inline EnergyBreakdown energy_report(const MappingSummary& m, const HardwareConfig& hw, int A,
                                     const AreaBreakdown& area, const LatencyBreakdown& lat)
{
    hw.require(A);
    EnergyBreakdown e;
    const auto& t = m.totals;
    e.buffer = double(t.n_buffer_accesses) * hw.buffer_energy_pJ.at(A);
    e.ic = double(t.n_ic_transfers) * hw.ic_energy_pJ.at(A);
    e.adc = double(t.n_adc_convs) * hw.adc_energy_pJ.at(A);
    e.accum = double(t.n_accum_ops) * hw.accum_energy_pJ.at(A);
    e.other = double(t.n_macs) * hw.other_energy_pJ_per_mac.at(A);
    e.dynamic = e.buffer + e.ic + e.adc + e.accum + e.other;
    // W/mm^2 * mm^2 * ns = 1e-9 J = 1e3 pJ
    e.leakage = hw.leakage_w_per_mm2 * area.chip * lat.total * 1e3;
    e.total = e.dynamic + e.leakage;
    return e;
}

inline Metrics metrics(const AreaBreakdown& area, const LatencyBreakdown& lat, const EnergyBreakdown& energy,
                       const MappingSummary& m)
{
    Metrics x;
    if (lat.total <= 0) return x;
    x.fps = 1e9 / lat.total;
    x.tops = 2.0 * double(m.totals.n_macs) * x.fps * 1e-12;
    double joules = energy.total * 1e-12;
    if (joules > 0) x.tops_per_w = x.tops / (joules * x.fps);
    if (area.chip > 0) x.tops_per_cm2 = x.tops / (area.chip / 100.0);
    return x;
}

inline ChipReport chip_report(const MappingSummary& m, const HardwareConfig& hw, int A)
{
    ChipReport r;
    r.adc_bits = A;
    r.clock_period_ns = hw.clock_period_ns.at(A);
    r.total_macs = m.totals.n_macs;
    r.area = area_report(m, hw, A);
    r.latency = latency_report(m, hw, A);
    r.energy = energy_report(m, hw, A, r.area, r.latency);
    r.metrics = metrics(r.area, r.latency, r.energy, m);
    return r;
}

inline bool close_rel(double a, double b, double rel = 1e-9)
{
    return std::fabs(a - b) <= rel * std::max({1.0, std::fabs(a), std::fabs(b)});
}

/// Definitional checks on a report; returns one message per violation.
inline std::vector<std::string> check_report(const ChipReport& r, const HardwareConfig& hw)
{
    std::vector<std::string> bad;
    const auto& a = r.area;
    if (!close_rel(a.chip, a.cim + a.ic + a.adc + a.accum + a.other)) bad.push_back("area partition");
    const auto& l = r.latency;
    if (!close_rel(l.total, l.buffer + l.ic + l.adc + l.accum + l.other)) bad.push_back("latency partition");
    const auto& e = r.energy;
    if (!close_rel(e.dynamic, e.buffer + e.ic + e.adc + e.accum + e.other)) bad.push_back("energy partition");
    if (!close_rel(e.total, e.dynamic + e.leakage)) bad.push_back("energy total");
    if (!close_rel(e.leakage, hw.leakage_w_per_mm2 * a.chip * l.total * 1e3)) bad.push_back("leakage definition");
    if (l.total > 0) {
        const auto& x = r.metrics;
        if (!close_rel(x.fps, 1e9 / l.total)) bad.push_back("fps definition");
        if (!close_rel(x.tops, 2.0 * double(r.total_macs) * x.fps * 1e-12)) bad.push_back("tops definition");
        if (e.total > 0 && !close_rel(x.tops_per_w, x.tops / (e.total * 1e-12 * x.fps)))
            bad.push_back("tops/W definition");
        if (a.chip > 0 && !close_rel(x.tops_per_cm2, x.tops / (a.chip / 100.0))) bad.push_back("tops/cm2 definition");
    }
    if (r.clock_period_ns != hw.clock_period_ns.at(r.adc_bits)) bad.push_back("clock period");
    return bad;
}

} // namespace bnnpim
