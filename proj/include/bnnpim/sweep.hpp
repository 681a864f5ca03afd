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

#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "cost_model.hpp"
#include "dataset.hpp"
#include "engine.hpp"
#include "hw_config.hpp"
#include "model_io.hpp"
#include "parallel.hpp"

namespace bnnpim {

struct Range {
    int lo = 0;
    int hi = 0;

    /// "LO..HI" or a single value.
    static Range parse(const std::string& s)
    {
        Range r;
        auto dots = s.find("..");
        try {
            size_t used = 0;
            if (dots == std::string::npos) {
                r.lo = r.hi = std::stoi(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
            } else {
                r.lo = std::stoi(s.substr(0, dots), &used);
                if (used != dots) throw std::invalid_argument(s);
                auto tail = s.substr(dots + 2);
                r.hi = std::stoi(tail, &used);
                if (used != tail.size()) throw std::invalid_argument(s);
            }
        } catch (const std::exception&) {
            throw ConfigError("bad range '" + s + "', expected LO..HI");
        }
        if (r.lo > r.hi) throw ConfigError("empty range '" + s + "'");
        return r;
    }

    std::vector<int> values() const
    {
        std::vector<int> v;
        for (int x = lo; x <= hi; ++x) v.push_back(x);
        return v;
    }
};

enum class SweepMode { accuracy, hardware, all };

struct SweepSpec {
    std::filesystem::path model;
    std::filesystem::path dataset;
    std::filesystem::path hw;
    std::filesystem::path out;
    Range input_bits{1, 8};
    Range adc_bits{3, 8};
    SweepMode mode = SweepMode::all;
    uint64_t seed = 0;
    int workers = 1;
    int64_t subsample = 0;
    CalibrationPolicy calibration;
};

inline std::string fmt_num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// Minimal CSV table: header plus rows of numbers.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string str() const
    {
        std::string s;
        for (size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
        s += "\n";
        for (const auto& r : rows) {
            for (size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + fmt_num(r[i]);
            s += "\n";
        }
        return s;
    }

    size_t col(const std::string& name) const
    {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw FormatError("csv has no column '" + name + "'");
    }

    static CsvTable parse(const std::string& text)
    {
        CsvTable t;
        std::istringstream in(text);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            if (first) {
                t.header = cells;
                first = false;
                continue;
            }
            std::vector<double> r;
            for (auto& c : cells) {
                try {
                    r.push_back(std::stod(c));
                } catch (const std::exception&) {
                    throw FormatError("csv cell '" + c + "' is not a number");
                }
            }
            if (r.size() != t.header.size()) throw FormatError("csv row width does not match header");
            t.rows.push_back(std::move(r));
        }
        return t;
    }

    static CsvTable load(const std::filesystem::path& p) { return parse(read_text(p)); }
};

struct AccuracyGrid {
    std::vector<int> input_bits;
    std::vector<int> adc_bits;
    std::vector<std::vector<double>> acc;  // [B][A]
    std::vector<double> exact;             // exact_mode accuracy per B
    int64_t samples = 0;
};

inline AccuracyGrid run_accuracy_grid(const NetworkDescriptor& net, const Dataset& data, const SweepSpec& spec,
                                      int64_t rows, int64_t cols, const Dataset* calibration)
{
    AccuracyGrid g;
    g.input_bits = spec.input_bits.values();
    g.adc_bits = spec.adc_bits.values();
    g.samples = data.count();
    const size_t nb = g.input_bits.size(), na = g.adc_bits.size();
    const size_t ncols = na + 1;  // last column is exact_mode
    std::vector<double> cells(nb * ncols, 0.0);
    parallel_for(int64_t(cells.size()), spec.workers, [&](int64_t k) {
        ExecutionConfig cfg;
        cfg.input_precision_bits = g.input_bits[size_t(k) / ncols];
        size_t a = size_t(k) % ncols;
        cfg.exact_mode = a == na;
        cfg.adc_resolution_bits = cfg.exact_mode ? 16 : g.adc_bits[a];
        cfg.rows = rows;
        cfg.cols = cols;
        cfg.calibration = spec.calibration;
        cells[size_t(k)] = Simulator(net, cfg, calibration).evaluate_accuracy(data, 1);
    });
    g.acc.assign(nb, std::vector<double>(na));
    g.exact.assign(nb, 0.0);
    for (size_t b = 0; b < nb; ++b) {
        for (size_t a = 0; a < na; ++a) g.acc[b][a] = cells[b * ncols + a];
        g.exact[b] = cells[b * ncols + na];
    }
    return g;
}

inline CsvTable accuracy_table(const AccuracyGrid& g)
{
    CsvTable t;
    t.header.push_back("B");
    for (int a : g.adc_bits) t.header.push_back("A" + std::to_string(a));
    for (size_t b = 0; b < g.input_bits.size(); ++b) {
        std::vector<double> r{double(g.input_bits[b])};
        for (double v : g.acc[b]) r.push_back(v * 100.0);
        t.rows.push_back(std::move(r));
    }
    return t;
}

/// Runs the (B, A) grid and writes accuracy.csv, accuracy_exact.csv and accuracy.json.
inline AccuracyGrid run_accuracy_sweep(const SweepSpec& spec)
{
    auto net = load_model(spec.model);
    auto data = load_dataset(spec.dataset).subsample(spec.subsample, spec.seed);
    if (data.count() == 0) throw ConfigError("dataset is empty");
    int64_t rows = 128, cols = 128;
    if (!spec.hw.empty()) {
        auto hw = load_hw_config(spec.hw);
        rows = hw.rows;
        cols = hw.cols;
    }
    Dataset calib;
    const Dataset* calib_ptr = nullptr;
    if (spec.calibration.kind == CalibrationPolicy::Kind::percentile) {
        auto cdir = spec.model / "calibration";
        calib = std::filesystem::exists(cdir) ? load_dataset(cdir) : data.head(256);
        calib_ptr = &calib;
    }
    auto g = run_accuracy_grid(net, data, spec, rows, cols, calib_ptr);

    std::filesystem::create_directories(spec.out);
    write_text(spec.out / "accuracy.csv", accuracy_table(g).str());
    CsvTable ex;
    ex.header = {"B", "exact"};
    for (size_t b = 0; b < g.input_bits.size(); ++b) ex.rows.push_back({double(g.input_bits[b]), g.exact[b] * 100.0});
    write_text(spec.out / "accuracy_exact.csv", ex.str());

    nlohmann::json j;
    j["model"] = net.name;
    j["subarray"] = {rows, cols};
    j["calibration"] = spec.calibration.kind == CalibrationPolicy::Kind::full_range ? "full_range" : "percentile";
    j["seed"] = spec.seed;
    j["cells"] = nlohmann::json::array();
    for (size_t b = 0; b < g.input_bits.size(); ++b)
        for (size_t a = 0; a < g.adc_bits.size(); ++a)
            j["cells"].push_back({{"B", g.input_bits[b]},
                                  {"A", g.adc_bits[a]},
                                  {"samples", g.samples},
                                  {"correct", int64_t(std::llround(g.acc[b][a] * double(g.samples)))},
                                  {"accuracy", g.acc[b][a]}});
    j["exact"] = nlohmann::json::array();
    for (size_t b = 0; b < g.input_bits.size(); ++b)
        j["exact"].push_back({{"B", g.input_bits[b]}, {"samples", g.samples}, {"accuracy", g.exact[b]}});
    write_text(spec.out / "accuracy.json", j.dump(2) + "\n");

    // re-read and compare
    auto back = CsvTable::load(spec.out / "accuracy.csv");
    if (back.rows.size() != g.input_bits.size()) throw InvariantError("accuracy.csv row count mismatch");
    return g;
}

inline nlohmann::json mapping_json(const MappingSummary& m)
{
    auto one = [](const LayerCounts& c) {
        return nlohmann::json{{"layer", c.index},
                              {"fan_in", c.fan_in},
                              {"out_channels", c.out_channels},
                              {"positions", c.positions},
                              {"planes", c.planes},
                              {"row_tiles", c.row_tiles},
                              {"col_tiles", c.col_tiles},
                              {"n_tiles", c.n_tiles},
                              {"n_subarrays", c.n_subarrays},
                              {"n_adc_convs", c.n_adc_convs},
                              {"n_buffer_accesses", c.n_buffer_accesses},
                              {"n_ic_transfers", c.n_ic_transfers},
                              {"n_accum_ops", c.n_accum_ops},
                              {"n_macs", c.n_macs},
                              {"adc_steps", c.adc_steps},
                              {"accum_steps", c.accum_steps},
                              {"drive_steps", c.drive_steps}};
    };
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const auto& c : m.layers) j["layers"].push_back(one(c));
    j["totals"] = one(m.totals);
    j["totals"].erase("layer");
    return j;
}

inline nlohmann::json report_json(const ChipReport& r)
{
    return {{"A", r.adc_bits},
            {"clock_period_ns", r.clock_period_ns},
            {"total_macs", r.total_macs},
            {"area_mm2",
             {{"chip", r.area.chip},
              {"cim", r.area.cim},
              {"ic", r.area.ic},
              {"adc", r.area.adc},
              {"accum", r.area.accum},
              {"other", r.area.other},
              {"adc_instances", r.area.n_adc_instances}}},
            {"latency_ns",
             {{"total", r.latency.total},
              {"buffer", r.latency.buffer},
              {"ic", r.latency.ic},
              {"adc", r.latency.adc},
              {"accum", r.latency.accum},
              {"other", r.latency.other},
              {"bottleneck_layer", r.latency.bottleneck_layer}}},
            {"energy_pJ",
             {{"total", r.energy.total},
              {"dynamic", r.energy.dynamic},
              {"leakage", r.energy.leakage},
              {"buffer", r.energy.buffer},
              {"ic", r.energy.ic},
              {"adc", r.energy.adc},
              {"accum", r.energy.accum},
              {"other", r.energy.other}}},
            {"metrics",
             {{"fps", r.metrics.fps},
              {"tops", r.metrics.tops},
              {"tops_per_w", r.metrics.tops_per_w},
              {"tops_per_cm2", r.metrics.tops_per_cm2}}}};
}

/// Table families in the units of the published tables (mm^2, ms/us, uJ).
inline std::map<std::string, CsvTable> hardware_tables(const std::vector<ChipReport>& reports)
{
    std::map<std::string, CsvTable> t;
    t["area"].header = {"A", "chip_mm2", "cim_mm2", "ic_mm2", "adc_mm2", "accum_mm2", "other_mm2", "adc_share_pct"};
    t["latency"].header = {"A",      "clock_ns", "total_ms",  "buffer_ms", "ic_ms",
                           "adc_us", "accum_us", "other_ms", "bottleneck_layer"};
    t["energy"].header = {"A",       "dynamic_uJ", "leakage_uJ", "buffer_uJ", "ic_uJ",
                          "adc_uJ",  "accum_uJ",   "other_uJ",   "total_uJ"};
    t["metrics"].header = {"A", "tops_per_w", "tops", "fps", "tops_per_cm2"};
    for (const auto& r : reports) {
        const double A = r.adc_bits;
        const auto& a = r.area;
        t["area"].rows.push_back({A, a.chip, a.cim, a.ic, a.adc, a.accum, a.other, 100.0 * a.adc / a.chip});
        const auto& l = r.latency;
        t["latency"].rows.push_back({A, r.clock_period_ns, l.total * 1e-6, l.buffer * 1e-6, l.ic * 1e-6, l.adc * 1e-3,
                                     l.accum * 1e-3, l.other * 1e-6, double(l.bottleneck_layer)});
        const auto& e = r.energy;
        t["energy"].rows.push_back({A, e.dynamic * 1e-6, e.leakage * 1e-6, e.buffer * 1e-6, e.ic * 1e-6, e.adc * 1e-6,
                                    e.accum * 1e-6, e.other * 1e-6, e.total * 1e-6});
        const auto& m = r.metrics;
        t["metrics"].rows.push_back({A, m.tops_per_w, m.tops, m.fps, m.tops_per_cm2});
    }
    return t;
}

struct HardwareSweep {
    MappingSummary mapping;
    std::vector<ChipReport> reports;
};

inline HardwareSweep hardware_sweep(const NetworkDescriptor& net, const HardwareConfig& hw, const Range& adc)
{
    HardwareSweep s;
    s.mapping = compute_mapping(net, hw);
    for (int A : adc.values()) hw.require(A);
    for (int A : adc.values()) s.reports.push_back(chip_report(s.mapping, hw, A));
    return s;
}

/// Writes one CSV per table family plus hardware.json and mapping.json, then
/// re-reads the area table to confirm the partition held after formatting.
inline HardwareSweep run_hardware_sweep(const SweepSpec& spec)
{
    auto net = load_topology(spec.model);
    auto hw = load_hw_config(spec.hw);
    auto s = hardware_sweep(net, hw, spec.adc_bits);
    for (const auto& r : s.reports) {
        auto bad = check_report(r, hw);
        if (!bad.empty()) throw InvariantError("A=" + std::to_string(r.adc_bits) + ": " + bad[0]);
    }
    std::filesystem::create_directories(spec.out);
    auto tables = hardware_tables(s.reports);
    for (const auto& [name, t] : tables) write_text(spec.out / (name + ".csv"), t.str());
    nlohmann::json j;
    j["model"] = net.name;
    j["hw_config"] = spec.hw.filename().string();
    j["reports"] = nlohmann::json::array();
    for (const auto& r : s.reports) j["reports"].push_back(report_json(r));
    write_text(spec.out / "hardware.json", j.dump(2) + "\n");
    write_text(spec.out / "mapping.json", mapping_json(s.mapping).dump(2) + "\n");

    auto area = CsvTable::load(spec.out / "area.csv");
    for (const auto& row : area.rows) {
        double parts = row[area.col("cim_mm2")] + row[area.col("ic_mm2")] + row[area.col("adc_mm2")] +
                       row[area.col("accum_mm2")] + row[area.col("other_mm2")];
        if (!close_rel(parts, row[area.col("chip_mm2")], 1e-8)) throw InvariantError("area.csv partition does not hold");
    }
    return s;
}

/// Long-format series file (series, x, y) with a JSON sidecar describing axes.
inline void write_series(const std::filesystem::path& dir, const std::string& name,
                         const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                         const std::string& x_label, const std::string& y_label, bool log_scale)
{
    std::string s = "series,x,y\n";
    for (const auto& [label, pts] : series)
        for (auto [x, y] : pts) s += label + "," + fmt_num(x) + "," + fmt_num(y) + "\n";
    write_text(dir / (name + ".csv"), s);
    nlohmann::json meta{{"x", x_label}, {"y", y_label}, {"log_scale", log_scale}, {"series", nlohmann::json::array()}};
    for (const auto& [label, pts] : series) meta["series"].push_back(label);
    write_text(dir / (name + ".meta.json"), meta.dump(2) + "\n");
}

/// Converts whatever sweep outputs exist in `results` into plot series under results/plots.
inline std::vector<std::string> emit_plots(const std::filesystem::path& results)
{
    namespace fs = std::filesystem;
    std::vector<std::string> written;
    auto plots = results / "plots";
    bool any = false;
    if (fs::exists(results / "accuracy.csv")) {
        fs::create_directories(plots);
        auto t = CsvTable::load(results / "accuracy.csv");
        std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
        for (const auto& row : t.rows) {
            std::vector<std::pair<double, double>> pts;
            for (size_t c = 1; c < t.header.size(); ++c) pts.push_back({std::stod(t.header[c].substr(1)), row[c]});
            series.push_back({"B" + std::to_string(int(row[0])), pts});
        }
        write_series(plots, "accuracy_vs_adc", series, "A", "top1_pct", false);
        written.push_back("accuracy_vs_adc");
        any = true;
    }
    struct Family {
        const char* file;
        const char* name;
        const char* y;
        bool log;
        std::vector<std::string> cols;
    };
    std::vector<Family> fams{
        {"area.csv", "area_vs_adc", "mm2", true, {"cim_mm2", "ic_mm2", "adc_mm2", "accum_mm2", "other_mm2", "chip_mm2"}},
        {"latency.csv", "latency_vs_adc", "ms", false, {"buffer_ms", "ic_ms", "adc_us", "accum_us", "total_ms"}},
        {"energy.csv", "energy_vs_adc", "uJ", true,
         {"buffer_uJ", "ic_uJ", "adc_uJ", "accum_uJ", "other_uJ", "leakage_uJ", "total_uJ"}},
        {"metrics.csv", "metrics_vs_adc", "value", false, {"tops_per_w", "tops", "fps", "tops_per_cm2"}},
    };
    for (const auto& f : fams) {
        if (!fs::exists(results / f.file)) continue;
        fs::create_directories(plots);
        auto t = CsvTable::load(results / f.file);
        std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
        for (const auto& c : f.cols) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& row : t.rows) pts.push_back({row[0], row[t.col(c)]});
            series.push_back({c, pts});
        }
        write_series(plots, f.name, series, "A", f.y, f.log);
        written.push_back(f.name);
        any = true;
    }
    if (!any) throw IoError("no sweep outputs found in " + results.string());
    return written;
}

} // namespace bnnpim
