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

// acceptance: one PASS/FAIL line per release criterion, details indented below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bnnpim/bnnpim.hpp"

namespace {

namespace fs = std::filesystem;
using namespace bnnpim;

struct Options {
    fs::path root = BNNPIM_SOURCE_DIR;
    int workers = 4;
    int64_t subsample = 0;
};

struct Outcome {
    bool pass = true;
    std::string summary;
    std::vector<std::string> details;

    void note(const char* fmt, ...) __attribute__((format(printf, 2, 3)))
    {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, ap);
        va_end(ap);
        details.emplace_back(buf);
    }

    /// Records a gated check; any failing check fails the criterion.
    void check(bool ok, const std::string& what)
    {
        details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
        pass = pass && ok;
    }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

const std::vector<std::string> kPresets{"tiny-alexnet", "tiny-resnet", "tiny-densenet"};
const std::vector<std::string> kFullModels{"alexnet", "resnet18", "densenet28"};

ExecutionConfig exact_cfg(int B, int64_t R = 128, int64_t C = 128)
{
    ExecutionConfig c;
    c.input_precision_bits = B;
    c.exact_mode = true;
    c.rows = R;
    c.cols = C;
    return c;
}

// ---------------------------------------------------------------------------

Outcome oracle(const Options& o)
{
    Outcome r;
    int64_t compared = 0;
    for (const auto& p : kPresets) {
        auto dir = o.root / "data" / "desk" / p;
        auto net = load_model(dir);
        auto inputs = load_dataset(dir / "reference" / "inputs");
        auto ref = nlohmann::json::parse(read_text(dir / "reference" / "reference.json"));
        const ReferenceForward oracle(net);
        const int64_t K = net.class_count;
        for (const auto& c : ref["cases"]) {
            if (!c["exact"].get<bool>()) continue;
            const int B = c["B"].get<int>();
            Simulator sim(net, exact_cfg(B, c["rows"].get<int64_t>(), c["cols"].get<int64_t>()));
            auto got = sim.forward_network(inputs.data, inputs.count(), o.workers).logits;
            auto file = decode_le<double>(read_bytes(dir / "reference" / c["logits"].get<std::string>()), "logits");
            int64_t vs_direct = 0, vs_file = 0;
            for (int64_t s = 0; s < inputs.count(); ++s) {
                auto want = oracle.logits(inputs.sample(s), B);
                for (int64_t k = 0; k < K; ++k) {
                    const size_t i = size_t(s * K + k);
                    vs_direct += got[i] != want[size_t(k)];
                    vs_file += i >= file.size() || got[i] != file[i];
                }
            }
            compared += inputs.count();
            r.check(vs_direct == 0 && vs_file == 0 && file.size() == got.size(),
                    fmt("%s %s: %lld samples, %lld logits differ from direct inference, %lld from exported file", p.c_str(),
                        c["id"].get<std::string>().c_str(), (long long)inputs.count(), (long long)vs_direct,
                        (long long)vs_file));
        }
    }
    r.summary = fmt("exact-mode logits bit-exact on %lld sample runs across %zu presets", (long long)compared,
                    kPresets.size());
    return r;
}

Outcome adc(const Options&)
{
    Outcome r;
    // bound on symmetric clips, the case every engine tile uses
    int64_t sym_bad = 0, sym_pairs = 0, first_c = -1, first_A = -1;
    for (int64_t c = 1; c <= 256; ++c)
        for (int A = 1; A <= 9; ++A) {
            auto a = AdcSpec::make(A, -c, c);
            bool bad = false;
            for (int64_t s = -c - 4; s <= c + 4; ++s)
                bad = bad || std::abs(adc_quantize(s, a) - std::clamp(s, -c, c)) > ceil_div(a.step, 2);
            ++sym_pairs;
            if (bad && sym_bad++ == 0) first_c = c, first_A = A;
        }
    // every range inside [-256, 256]
    int64_t all_bad = 0, all_pairs = 0, pass_bad = 0, pass_pairs = 0;
    int64_t worst_excess = 0;
    for (int64_t lo = -256; lo <= 256; ++lo)
        for (int64_t hi = lo; hi <= 256; ++hi)
            for (int A = 1; A <= 9; ++A) {
                auto a = AdcSpec::make(A, lo, hi);
                const int64_t bound = ceil_div(a.step, 2);
                const bool lossless = a.lossless();
                bool bad = false, pbad = false;
                for (int64_t s = lo - 2; s <= hi + 2; ++s) {
                    const int64_t err = std::abs(adc_quantize(s, a) - std::clamp(s, lo, hi));
                    if (err > bound) {
                        bad = true;
                        worst_excess = std::max(worst_excess, err - bound);
                    }
                    if (lossless && err != 0) pbad = true;
                }
                ++all_pairs;
                all_bad += bad;
                if (lossless) {
                    ++pass_pairs;
                    pass_bad += pbad;
                }
            }
    r.check(pass_bad == 0, fmt("pass-through: %lld of %lld lossless (range, A) pairs reproduce clamp(s) exactly",
                               (long long)(pass_pairs - pass_bad), (long long)pass_pairs));
    r.check(sym_bad == 0, fmt("symmetric clips c<=256, A 1..9: %lld of %lld pairs exceed ceil(step/2)%s", (long long)sym_bad,
                              (long long)sym_pairs,
                              sym_bad ? fmt(", first at c=%lld A=%lld", (long long)first_c, (long long)first_A).c_str()
                                      : ""));
    r.check(all_bad == 0, fmt("all ranges in [-256,256], A 1..9: %lld of %lld pairs exceed the bound, worst excess %lld",
                              (long long)all_bad, (long long)all_pairs, (long long)worst_excess));
    r.note("cause: the top level clip_lo + max_code*step can sit up to step-1 below clip_hi, so inputs");
    r.note("near clip_hi land more than half a step from it whenever that gap is large");
    r.summary = r.pass ? "reconstruction bound and pass-through hold" : "reconstruction bound violated by the integer-step ADC";
    return r;
}

Outcome bitserial(const Options& o)
{
    Outcome r;
    for (int B = 1; B <= 8; ++B) {
        QuantizedTensor q;
        q.precision_bits = B;
        for (int64_t v = q.min_value(); v <= q.max_value(); ++v) q.values.push_back(v);
        q.dims = {int64_t(q.values.size())};
        auto planes = bit_serialize(q);
        bool binary = true;
        for (const auto& p : planes.planes)
            for (auto bit : p) binary = binary && bit <= 1;
        r.check(planes.reconstruct() == q.values && binary && int(planes.planes.size()) == B,
                fmt("B=%d: %zu values rebuilt from %zu planes", B, q.values.size(), planes.planes.size()));
    }
    const std::vector<int64_t> dims{32, 64, 128, 256};
    for (const auto& p : kPresets) {
        auto dir = o.root / "data" / "desk" / p;
        auto net = load_model(dir);
        auto inputs = load_dataset(dir / "reference" / "inputs");
        for (int B : {4, 8}) {
            auto base = Simulator(net, exact_cfg(B)).forward_network(inputs.data, inputs.count(), o.workers).logits;
            int differing = 0;
            for (int64_t R : dims)
                for (int64_t C : dims) {
                    auto got = Simulator(net, exact_cfg(B, R, C)).forward_network(inputs.data, inputs.count(), o.workers);
                    differing += got.logits != base;
                }
            r.check(differing == 0, fmt("%s B=%d: %d of 16 (R,C) tilings differ from 128x128", p.c_str(), B, differing));
        }
    }
    r.summary = r.pass ? "two's-complement planes exact for B 1..8, exact mode invariant to tiling"
                       : "bit-serial reconstruction or tiling invariance broken";
    return r;
}

Outcome accuracy(const Options& o)
{
    Outcome r;
    auto dir = o.root / "data" / "desk" / "tiny-alexnet";
    auto net = load_model(dir);
    auto data = load_dataset(o.root / "data" / "desk" / "digits-test").subsample(o.subsample, 0);
    SweepSpec spec;
    spec.input_bits = {1, 8};
    spec.adc_bits = {3, 8};
    spec.workers = o.workers;
    auto g = run_accuracy_grid(net, data, spec, 128, 128, nullptr);
    auto at = [&](int B, int A) { return 100.0 * g.acc[size_t(B - 1)][size_t(A - 3)]; };
    const double ex8 = 100.0 * g.exact[7], ex4 = 100.0 * g.exact[3];

    std::string head = "  B ";
    for (int A = 3; A <= 8; ++A) head += fmt("   A=%d", A);
    r.note("%s  exact", head.c_str());
    for (int B = 1; B <= 8; ++B) {
        std::string row = fmt("  %d ", B);
        for (int A = 3; A <= 8; ++A) row += fmt(" %5.1f", at(B, A));
        r.note("%s  %5.1f", row.c_str(), 100.0 * g.exact[size_t(B - 1)]);
    }
    r.check(at(1, 8) <= at(4, 8) - 10.0, fmt("(a) B1A8 %.2f%% at least 10 points below B4A8 %.2f%%", at(1, 8), at(4, 8)));
    r.check(std::abs(at(4, 8) - ex8) <= 2.0,
            fmt("(b) B4A8 %.2f%% within 2 points of exact mode at the model's 8-bit input %.2f%%", at(4, 8), ex8));
    r.check(std::abs(at(4, 8) - ex4) <= 2.0,
            fmt("(b) B4A8 %.2f%% within 2 points of exact mode at B=4 %.2f%%", at(4, 8), ex4));
    std::vector<double> avg;
    for (int A = 3; A <= 8; ++A) {
        double s = 0;
        for (int B = 1; B <= 8; ++B) s += at(B, A);
        avg.push_back(s / 8.0);
    }
    std::string steps;
    double worst = 1e9;
    for (int A = 4; A <= 8; ++A) {
        steps += fmt(" A%d %.2f", A, avg[size_t(A - 3)]);
        if (A > 4) worst = std::min(worst, avg[size_t(A - 3)] - avg[size_t(A - 4)]);
    }
    r.check(worst >= -1.0, fmt("(c) row averages%s, worst step %+.2f (noise allowance 1 point)", steps.c_str(), worst));
    r.note("row average at A=3 is %.2f; full-range clips put zero on a level at A=3 but not at A=4", avg[0]);
    r.summary = fmt("tiny-alexnet on %lld test digits, full-range ADC clips", (long long)g.samples);
    return r;
}

double target(const nlohmann::json& t, const std::string& m, const char* table, int A, const char* key)
{
    return t["models"][m][table][std::to_string(A)][key].get<double>();
}

Outcome cost(const Options& o)
{
    Outcome r;
    auto hw = load_hw_config(o.root / "configs" / "fitted_hw.json");
    auto t = nlohmann::json::parse(read_text(o.root / "configs" / "calibration_targets.json"));
    std::map<std::string, std::vector<ChipReport>> rep;
    for (const auto& m : kFullModels) {
        auto map = compute_mapping(load_topology(o.root / "descriptors" / m), hw);
        for (int A = 3; A <= 8; ++A) rep[m].push_back(chip_report(map, hw, A));
    }
    auto R = [&](const std::string& m, int A) -> const ChipReport& { return rep[m][size_t(A - 3)]; };

    int area_ok = 0;
    double worst = 0;
    for (const auto& m : kFullModels)
        for (int A = 3; A <= 8; ++A) {
            const double want = target(t, m, "area_mm2", A, "chip"), got = R(m, A).area.chip;
            const double err = 100.0 * (got / want - 1.0);
            worst = std::max(worst, std::abs(err));
            area_ok += std::abs(err) <= 5.0;
            r.note("area %-10s A=%d %8.2f mm2 vs %8.2f (%+.1f%%)", m.c_str(), A, got, want, err);
        }
    r.check(area_ok == 18, fmt("chip area within 5%% on %d of 18 rows, worst %.1f%%", area_ok, worst));

    const auto& a3 = R("alexnet", 3).area;
    const auto& a8 = R("alexnet", 8).area;
    const double s3 = 100.0 * a3.adc / a3.chip, s8 = 100.0 * a8.adc / a8.chip;
    r.check(std::abs(s3 - 13.0) <= 3.0 && std::abs(s8 - 89.0) <= 3.0,
            fmt("alexnet ADC area share %.1f%% at A=3, %.1f%% at A=8 (13 and 89, +-3 points)", s3, s8));

    bool clocks = true;
    for (int A = 3; A <= 8; ++A)
        for (const auto& m : kFullModels)
            clocks = clocks && R(m, A).clock_period_ns == target(t, m, "latency", A, "clock_ns");
    r.check(clocks, fmt("clock periods equal the tabulated inputs (%.2f ns at A=3, %.2f ns at A=8)",
                        R("alexnet", 3).clock_period_ns, R("alexnet", 8).clock_period_ns));

    double fps_sim = 0, fps_tab = 0;
    for (const auto& m : kFullModels)
        for (int A = 3; A <= 8; ++A) {
            const auto& x = R(m, A);
            fps_sim = std::max(fps_sim, std::abs(x.metrics.fps * x.latency.total * 1e-9 - 1.0));
            const double tab = target(t, m, "metrics", A, "fps") * target(t, m, "latency", A, "total_ms") * 1e-3;
            fps_tab = std::max(fps_tab, std::abs(tab - 1.0));
        }
    r.check(fps_sim <= 0.005 && fps_tab <= 0.005,
            fmt("FPS = 1/latency: model worst %.2e, tabulated pairs worst %.2f%% (9.11 ms -> %.2f FPS)", fps_sim,
                100.0 * fps_tab, 1000.0 / 9.11));

    const double leak = R("resnet18", 3).energy.leakage / R("alexnet", 3).energy.leakage;
    r.check(leak >= 0.08 && leak <= 0.14, fmt("leakage ratio resnet18/alexnet at A=3 is %.3f, want 0.08..0.14", leak));
    const double area_ratio = R("resnet18", 3).area.chip / R("alexnet", 3).area.chip;
    r.note("leakage is power density x chip area x latency; area ratio %.3f (pinned by the area fit) times",
           area_ratio);
    r.note("latency ratio %.3f. Reaching 0.107 needs alexnet latency %.1fx resnet18, but the counted events",
           R("resnet18", 3).latency.total / R("alexnet", 3).latency.total, area_ratio / 0.107);
    r.note("of the alexnet bottleneck stage stay below those of the resnet18 stem for every component,");
    r.note("so no non-negative unit table gets past 1x");
    r.note("info: latency alexnet %.2f ms, resnet18 %.2f ms, densenet28 %.2f ms at A=3 (tabulated 9.11, 2.02, 2.11)",
           R("alexnet", 3).latency.total * 1e-6, R("resnet18", 3).latency.total * 1e-6,
           R("densenet28", 3).latency.total * 1e-6);
    r.summary = "fitted hardware config against the tabulated chip figures";
    return r;
}

Outcome structural(const Options& o)
{
    Outcome r;
    auto hw = load_hw_config(o.root / "configs" / "fitted_hw.json");
    bool units = true;
    for (auto* u : hw.all_units()) units = units && u->non_decreasing();
    r.check(units, "every tabulated unit cost is non-decreasing in A");
    std::vector<std::vector<ChipReport>> all;
    for (const auto& m : kFullModels) {
        auto map = compute_mapping(load_topology(o.root / "descriptors" / m), hw);
        std::vector<ChipReport> reps;
        for (int A = 3; A <= 8; ++A) reps.push_back(chip_report(map, hw, A));
        int defs = 0;
        bool cim = true, mono = true;
        for (size_t i = 0; i < reps.size(); ++i) {
            defs += int(check_report(reps[i], hw).size());
            if (i == 0) continue;
            const auto &p = reps[i - 1], &c = reps[i];
            cim = cim && c.area.cim == p.area.cim;
            mono = mono && c.latency.total >= p.latency.total && c.energy.total >= p.energy.total &&
                   c.area.adc >= p.area.adc;
        }
        r.check(defs == 0, fmt("%s: partitions, leakage and metric formulas hold at A 3..8 (%d violations)", m.c_str(), defs));
        r.check(cim, fmt("%s: CIM area %.3f mm2 at every A", m.c_str(), reps[0].area.cim));
        r.check(mono, fmt("%s: latency, energy and ADC area non-decreasing in A", m.c_str()));
        all.push_back(std::move(reps));
    }
    bool clock = true;
    for (size_t i = 0; i < all[0].size(); ++i)
        for (const auto& reps : all) clock = clock && reps[i].clock_period_ns == all[0][i].clock_period_ns;
    r.check(clock, "clock period depends on A only, not on the network");
    r.summary = "cost-model invariants on the three full-size descriptors";
    return r;
}

struct Criterion {
    const char* name;
    const char* title;
    double budget_s;
    std::function<Outcome(const Options&)> run;
};

} // namespace

int main(int argc, char** argv)
{
    Options o;
    std::string only;
    CLI::App app{"Release acceptance checks"};
    app.add_option("--root", o.root, "source tree holding data/, configs/ and descriptors/");
    app.add_option("--only", only, "run a single criterion")
        ->check(CLI::IsMember({"oracle", "adc", "bitserial", "accuracy", "cost", "structural"}));
    app.add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--subsample", o.subsample, "accuracy samples (0 = all)")->check(CLI::NonNegativeNumber);
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {"oracle", "oracle equivalence", 60, oracle},
        {"adc", "ADC quantizer", 60, adc},
        {"bitserial", "bit-serial reconstruction", 60, bitserial},
        {"accuracy", "accuracy trend", 900, accuracy},
        {"cost", "cost-model calibration", 30, cost},
        {"structural", "structural invariants", 30, structural},
    };
    bool failed = false;
    try {
        for (const auto& c : all) {
            if (!only.empty() && only != c.name) continue;
            auto t0 = std::chrono::steady_clock::now();
            auto out = c.run(o);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out.check(secs <= c.budget_s, fmt("runtime %.2f s (budget %.0f s)", secs, c.budget_s));
            std::printf("%s %s: %s\n", out.pass ? "PASS" : "FAIL", c.name, out.summary.c_str());
            std::printf("    [%s]\n", c.title);
            for (const auto& d : out.details) std::printf("    %s\n", d.c_str());
            std::fflush(stdout);
            failed = failed || !out.pass;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return failed ? 1 : 0;
}
