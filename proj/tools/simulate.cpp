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

// simulate: accuracy and hardware sweeps for binarized networks on crossbar arrays.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bnnpim/bnnpim.hpp"

namespace {

enum Exit { kOk = 0, kBadArgs = 2, kIo = 3, kInvariant = 4 };

struct Options {
    std::string model, dataset, hw, out;
    std::string input_precision = "1..8";
    std::string adc = "3..8";
    uint64_t seed = 0;
    int workers = 1;
    int64_t subsample = 0;
    std::string calibration = "full_range";
    double percentile = 99.9;
};

void add_common(CLI::App* sub, Options& o, bool need_data)
{
    sub->add_option("--model", o.model, "model bundle or shape-only descriptor directory")->required();
    auto* d = sub->add_option("--dataset", o.dataset, "dataset directory (data.bin, labels.bin, shape.json)");
    if (need_data) d->required();
    sub->add_option("--hw", o.hw, "hardware config JSON");
    sub->add_option("--input-precision", o.input_precision, "first-layer input bits, LO..HI");
    sub->add_option("--adc", o.adc, "ADC resolution bits, LO..HI");
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "subsampling seed");
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--subsample", o.subsample, "evaluate at most N samples (0 = all)")->check(CLI::NonNegativeNumber);
    sub->add_option("--calibration", o.calibration, "ADC clip policy")
        ->check(CLI::IsMember({"full_range", "percentile"}));
    sub->add_option("--percentile", o.percentile, "central mass kept by percentile calibration");
}

bnnpim::SweepSpec to_spec(const Options& o, bnnpim::SweepMode mode)
{
    bnnpim::SweepSpec s;
    s.model = o.model;
    s.dataset = o.dataset;
    s.hw = o.hw;
    s.out = o.out;
    s.mode = mode;
    s.seed = o.seed;
    s.workers = o.workers;
    s.subsample = o.subsample;
    s.input_bits = bnnpim::Range::parse(o.input_precision);
    s.adc_bits = bnnpim::Range::parse(o.adc);
    if (s.input_bits.lo < 1 || s.input_bits.hi > 8) throw bnnpim::ConfigError("input precision must lie in 1..8");
    if (s.adc_bits.lo < 1 || s.adc_bits.hi > 16) throw bnnpim::ConfigError("ADC resolution must lie in 1..16");
    if (o.calibration == "percentile") s.calibration = bnnpim::CalibrationPolicy::central(o.percentile);
    return s;
}

void print_grid(const bnnpim::AccuracyGrid& g)
{
    std::printf("top-1 accuracy (%%), %lld samples\n  B\\A", static_cast<long long>(g.samples));
    for (int a : g.adc_bits) std::printf("%8d", a);
    std::printf("   exact\n");
    for (size_t b = 0; b < g.input_bits.size(); ++b) {
        std::printf("%5d", g.input_bits[b]);
        for (double v : g.acc[b]) std::printf("%8.2f", 100.0 * v);
        std::printf("%8.2f\n", 100.0 * g.exact[b]);
    }
}

void print_hw(const bnnpim::HardwareSweep& s)
{
    std::printf("%3s %10s %9s %9s %10s %10s %9s\n", "A", "chip_mm2", "adc_%", "clock_ns", "latency_ms", "energy_uJ",
                "fps");
    for (const auto& r : s.reports)
        std::printf("%3d %10.2f %9.1f %9.2f %10.3f %10.2f %9.1f\n", r.adc_bits, r.area.chip,
                    100.0 * r.area.adc / r.area.chip, r.clock_period_ns, r.latency.total * 1e-6,
                    r.energy.total * 1e-6, r.metrics.fps);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Binarized network crossbar simulator"};
    app.require_subcommand(1);
    Options o;
    auto* acc = app.add_subcommand("accuracy", "input-precision x ADC-resolution accuracy grid");
    auto* hw = app.add_subcommand("hardware", "area/latency/energy/throughput sweep over ADC resolution");
    auto* all = app.add_subcommand("all", "both sweeps plus plot series");
    add_common(acc, o, true);
    add_common(hw, o, false);
    add_common(all, o, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kBadArgs;
    }

    try {
        if (acc->parsed()) {
            auto spec = to_spec(o, bnnpim::SweepMode::accuracy);
            print_grid(bnnpim::run_accuracy_sweep(spec));
            bnnpim::emit_plots(spec.out);
        } else if (hw->parsed()) {
            if (o.hw.empty()) throw bnnpim::ConfigError("--hw is required for hardware sweeps");
            auto spec = to_spec(o, bnnpim::SweepMode::hardware);
            print_hw(bnnpim::run_hardware_sweep(spec));
            bnnpim::emit_plots(spec.out);
        } else {
            if (o.hw.empty()) throw bnnpim::ConfigError("--hw is required for hardware sweeps");
            auto spec = to_spec(o, bnnpim::SweepMode::all);
            print_grid(bnnpim::run_accuracy_sweep(spec));
            print_hw(bnnpim::run_hardware_sweep(spec));
            bnnpim::emit_plots(spec.out);
        }
    } catch (const bnnpim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadArgs;
    } catch (const bnnpim::InvariantError& e) {
        std::cerr << "invariant violated: " << e.what() << "\n";
        return kInvariant;
    } catch (const bnnpim::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const bnnpim::FormatError& e) {
        std::cerr << "bad input: " << e.what() << "\n";
        return kIo;
    } catch (const bnnpim::ShapeError& e) {
        std::cerr << "bad input: " << e.what() << "\n";
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    }
    return kOk;
}
