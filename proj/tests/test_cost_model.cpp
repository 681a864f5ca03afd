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


#include <gtest/gtest.h>

#include <functional>

#include "test_support.hpp"

using namespace bnnpim;
using namespace bnnpim::testing;

namespace {

UnitValue table(std::vector<double> v, int first = 3)
{
    UnitValue u;
    for (size_t i = 0; i < v.size(); ++i) u.table[first + int(i)] = v[i];
    return u;
}

/// Small hand-made config with every unit non-zero; macro tiles of 1x1.
HardwareConfig toy_hw()
{
    HardwareConfig hw;
    hw.clock_period_ns = table({1.0, 1.1, 1.3});
    hw.cim_cell_area_um2 = 0.05;
    hw.adc_area_um2 = table({100, 200, 400});
    hw.adc_latency_ns = table({0.1, 0.2, 0.4});
    hw.adc_energy_pJ = table({1, 2, 3});
    hw.buffer_latency_cycles = UnitValue::constant(2);
    hw.buffer_energy_pJ = UnitValue::constant(5);
    hw.buffer_area_um2 = UnitValue::constant(1000);
    hw.ic_area_um2_per_subarray = UnitValue::constant(30);
    hw.ic_area_um2_per_chip = UnitValue::constant(5000);
    hw.ic_latency_ns = UnitValue::constant(0.5);
    hw.ic_energy_pJ = UnitValue::constant(2);
    hw.accum_area_um2 = table({10, 12, 14});
    hw.accum_latency_ns = UnitValue::constant(0.3);
    hw.accum_energy_pJ = UnitValue::constant(0.7);
    hw.periphery_area_um2_per_subarray = UnitValue::constant(40);
    hw.periphery_area_um2_per_chip = UnitValue::constant(7000);
    hw.periphery_latency_ns = UnitValue::constant(0.2);
    hw.other_energy_pJ_per_mac = UnitValue::constant(0.01);
    hw.leakage_w_per_mm2 = 0.05;
    hw.validate();
    return hw;
}

NetworkDescriptor one_layer(LayerDescriptor L)
{
    NetworkDescriptor net;
    L.activation = Activation::none;
    net.layers.push_back(L);
    net.class_count = int(L.out_channels);
    return net;
}

const std::vector<std::string>& full_models()
{
    static const std::vector<std::string> m{"alexnet", "resnet18", "densenet28"};
    return m;
}

HardwareConfig shipped() { return load_hw_config(source_dir() / "configs" / "fitted_hw.json"); }

MappingSummary full_mapping(const std::string& m, const HardwareConfig& hw)
{
    return compute_mapping(load_topology(source_dir() / "descriptors" / m), hw);
}

} // namespace

TEST(Mapping, FcExample)
{
    auto L = fc_layer(512, 1000);
    L.input_precision_bits = 1;
    auto m = compute_mapping(one_layer(L), toy_hw());
    EXPECT_EQ(m.layers[0].n_tiles, 32);
    EXPECT_EQ(m.layers[0].n_adc_convs, 512);
}

TEST(Mapping, ConvExample)
{
    auto L = conv_layer({16, 16, 64}, 64, 3, 1, 1);
    L.input_precision_bits = 1;
    auto m = compute_mapping(one_layer(L), toy_hw());
    EXPECT_EQ(m.layers[0].fan_in, 576);
    EXPECT_EQ(m.layers[0].n_tiles, 5);
    EXPECT_EQ(m.layers[0].positions, 256);
}

TEST(Mapping, EmptyNetworkIsZero)
{
    auto m = compute_mapping(NetworkDescriptor{}, toy_hw());
    EXPECT_TRUE(m.layers.empty());
    EXPECT_EQ(m.totals.n_tiles, 0);
    EXPECT_EQ(m.totals.n_macs, 0);
    auto r = chip_report(m, toy_hw(), 3);
    EXPECT_EQ(r.area.cim, 0);
    EXPECT_EQ(r.latency.total, 0);
    EXPECT_EQ(r.energy.dynamic, 0);
}

TEST(Mapping, CountingRulesAndTotals)
{
    std::mt19937_64 rng(1);
    auto net = skip_net(rng);
    net.layers[0].input_precision_bits = 4;
    auto hw = toy_hw();
    hw.rows = 16;
    hw.cols = 8;
    hw.mux = 4;
    hw.bus_width_bits = 32;
    auto m = compute_mapping(net, hw);
    LayerCounts sum;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const auto& c = m.layers[i];
        const auto& L = net.layers[i];
        int64_t planes = i == 0 ? 4 : (L.combine == Combine::add ? int64_t(net.sources(i).size()) : 1);
        EXPECT_EQ(c.planes, planes);
        EXPECT_EQ(c.n_tiles, ceil_div(L.fan_in(), 16) * ceil_div(L.out_channels, 8));
        EXPECT_EQ(c.n_adc_convs, L.positions() * c.n_tiles * 2 * planes);
        EXPECT_EQ(c.n_macs, L.positions() * L.fan_in() * L.out_channels);
        sum.add(c);
    }
    EXPECT_EQ(sum.n_adc_convs, m.totals.n_adc_convs);
    EXPECT_EQ(sum.n_ic_transfers, m.totals.n_ic_transfers);
    EXPECT_EQ(sum.n_buffer_accesses, m.totals.n_buffer_accesses);
}

TEST(Mapping, MacroTilesRoundUpAllocation)
{
    auto hw = toy_hw();
    hw.macro_rows = 4;
    hw.macro_cols = 8;
    auto L = fc_layer(9216, 4096);
    auto c = compute_mapping(one_layer(L), hw).layers[0];
    EXPECT_EQ(c.n_tiles, 72 * 32);
    EXPECT_EQ(c.n_subarrays, 72 * 32);
    auto s = compute_mapping(one_layer(fc_layer(300, 10)), hw).layers[0];
    EXPECT_EQ(s.n_tiles, 3);
    EXPECT_EQ(s.n_subarrays, 4 * 8);
}

TEST(Area, LinearInAdcUnitAndPartitionExact)
{
    std::mt19937_64 rng(2);
    auto net = chain_net(rng);
    auto hw = toy_hw();
    auto m = compute_mapping(net, hw);
    auto a = area_report(m, hw, 4);
    hw.adc_area_um2.table[4] *= 2;
    auto b = area_report(m, hw, 4);
    EXPECT_DOUBLE_EQ(b.adc, 2 * a.adc);
    EXPECT_EQ(b.cim, a.cim);
    EXPECT_DOUBLE_EQ(a.chip, a.cim + a.ic + a.adc + a.accum + a.other);
    EXPECT_EQ(a.n_adc_instances, m.totals.n_subarrays * 16);
    EXPECT_DOUBLE_EQ(a.cim, double(m.totals.n_subarrays) * 128 * 128 * 2 * 0.05 / 1e6);
}

TEST(Latency, PipelineExamples)
{
    HardwareConfig hw;
    hw.clock_period_ns = UnitValue::constant(1.0);
    hw.buffer_latency_cycles = UnitValue::constant(1.0);
    MappingSummary m;
    LayerCounts a, b;
    a.index = 0;
    a.n_buffer_accesses = 3;
    b.index = 1;
    b.n_buffer_accesses = 5;
    m.layers = {a};
    m.totals = a;
    hw.pipeline = true;
    double single_on = latency_report(m, hw, 3).total;
    hw.pipeline = false;
    EXPECT_EQ(latency_report(m, hw, 3).total, single_on);
    m.layers = {a, b};
    hw.pipeline = true;
    auto on = latency_report(m, hw, 3);
    EXPECT_EQ(on.total, 5);
    EXPECT_EQ(on.bottleneck_layer, 1);
    hw.pipeline = false;
    EXPECT_EQ(latency_report(m, hw, 3).total, 8);
}

TEST(Energy, ZeroUnitEnergiesLeaveLeakage)
{
    std::mt19937_64 rng(3);
    auto net = chain_net(rng);
    auto hw = toy_hw();
    auto m = compute_mapping(net, hw);
    auto r = chip_report(m, hw, 5);
    for (auto* u : {&hw.buffer_energy_pJ, &hw.ic_energy_pJ, &hw.adc_energy_pJ, &hw.accum_energy_pJ,
                    &hw.other_energy_pJ_per_mac})
        *u = UnitValue::constant(0);
    auto z = chip_report(m, hw, 5);
    EXPECT_EQ(z.energy.dynamic, 0);
    EXPECT_EQ(z.energy.leakage, r.energy.leakage);
}

TEST(Metrics, Definitions)
{
    AreaBreakdown a;
    a.chip = 50;
    LatencyBreakdown l;
    l.total = 9.11e6;
    EnergyBreakdown e;
    e.total = 4e7;
    MappingSummary m;
    m.totals.n_macs = 1'000'000'000;
    auto x = metrics(a, l, e, m);
    EXPECT_NEAR(x.fps, 109.71, 109.71 * 0.005);
    auto e2 = e;
    e2.total *= 2;
    auto y = metrics(a, l, e2, m);
    EXPECT_DOUBLE_EQ(y.tops_per_w, x.tops_per_w / 2);
    EXPECT_DOUBLE_EQ(y.tops, x.tops);
    EXPECT_DOUBLE_EQ(x.tops, 2e9 * x.fps * 1e-12);
    EXPECT_DOUBLE_EQ(x.tops_per_cm2, x.tops / 0.5);
}

TEST(Homogeneity, EachUnitScalesOnlyItsComponent)
{
    std::mt19937_64 rng(4);
    auto net = skip_net(rng);
    const auto base_hw = toy_hw();
    auto m = compute_mapping(net, base_hw);
    auto base = chip_report(m, base_hw, 4);
    struct Case {
        std::function<UnitValue&(HardwareConfig&)> unit;
        std::function<double(const ChipReport&)> component;
    };
    std::vector<Case> cases{
        {[](HardwareConfig& h) -> UnitValue& { return h.adc_area_um2; }, [](const ChipReport& r) { return r.area.adc; }},
        {[](HardwareConfig& h) -> UnitValue& { return h.accum_area_um2; },
         [](const ChipReport& r) { return r.area.accum; }},
        {[](HardwareConfig& h) -> UnitValue& { return h.ic_energy_pJ; }, [](const ChipReport& r) { return r.energy.ic; }},
        {[](HardwareConfig& h) -> UnitValue& { return h.adc_energy_pJ; },
         [](const ChipReport& r) { return r.energy.adc; }},
        {[](HardwareConfig& h) -> UnitValue& { return h.buffer_energy_pJ; },
         [](const ChipReport& r) { return r.energy.buffer; }},
        {[](HardwareConfig& h) -> UnitValue& { return h.accum_energy_pJ; },
         [](const ChipReport& r) { return r.energy.accum; }},
    };
    for (const auto& c : cases) {
        auto hw = base_hw;
        auto& u = c.unit(hw);
        if (u.tabulated())
            for (auto& [a, v] : u.table) v *= 3;
        else
            u.scalar *= 3;
        auto r = chip_report(m, hw, 4);
        EXPECT_NEAR(c.component(r), 3 * c.component(base), 1e-9 * c.component(base));
        // every other area and dynamic-energy component is untouched
        std::vector<double> before{base.area.cim, base.area.adc, base.area.accum, base.area.ic, base.area.other,
                                   base.energy.buffer, base.energy.ic, base.energy.adc, base.energy.accum,
                                   base.energy.other};
        std::vector<double> after{r.area.cim, r.area.adc, r.area.accum, r.area.ic, r.area.other,
                                  r.energy.buffer, r.energy.ic, r.energy.adc, r.energy.accum, r.energy.other};
        int changed = 0;
        for (size_t k = 0; k < before.size(); ++k) changed += before[k] != after[k];
        EXPECT_EQ(changed, 1);
    }
}

TEST(HwConfig, ParseErrorsAndRoundTrip)
{
    auto j = hw_config_json(toy_hw());
    auto back = parse_hw_config(j);
    EXPECT_EQ(hw_config_json(back), j);

    auto bad = j;
    bad["mux_ratio"] = 7;
    EXPECT_THROW(parse_hw_config(bad), ConfigError);
    bad = j;
    bad["adc_unit"]["energy_pJ"]["4"] = -1;
    EXPECT_THROW(parse_hw_config(bad), ConfigError);
    bad = j;
    bad["adc_unit"]["energy_pJ"] = "cheap";
    EXPECT_THROW(parse_hw_config(bad), FormatError);
    EXPECT_THROW(toy_hw().require(9), ConfigError);
    EXPECT_THROW(load_hw_config(source_dir() / "configs" / "missing.json"), IoError);
}

TEST(ShippedConfig, ReportsSatisfyDefinitions)
{
    auto hw = shipped();
    for (const auto& name : full_models()) {
        auto m = full_mapping(name, hw);
        for (int A = 3; A <= 8; ++A) {
            auto r = chip_report(m, hw, A);
            auto bad = check_report(r, hw);
            EXPECT_TRUE(bad.empty()) << name << " A=" << A << ": " << (bad.empty() ? "" : bad[0]);
        }
    }
}

TEST(ShippedConfig, AIndependenceAndMonotonicity)
{
    auto hw = shipped();
    for (auto* u : hw.all_units()) EXPECT_TRUE(u->non_decreasing());
    for (const auto& name : full_models()) {
        auto m = full_mapping(name, hw);
        auto prev = chip_report(m, hw, 3);
        for (int A = 4; A <= 8; ++A) {
            auto r = chip_report(m, hw, A);
            EXPECT_EQ(r.area.cim, prev.area.cim);
            EXPECT_EQ(r.total_macs, prev.total_macs);
            EXPECT_GE(r.area.adc, prev.area.adc);
            EXPECT_GE(r.clock_period_ns, prev.clock_period_ns);
            EXPECT_GE(r.latency.total, prev.latency.total);
            EXPECT_GE(r.energy.total, prev.energy.total);
            EXPECT_LT(r.metrics.fps, prev.metrics.fps);
            EXPECT_LT(r.metrics.tops, prev.metrics.tops);
            prev = r;
        }
    }
}

TEST(ShippedConfig, ClockIsNetworkIndependent)
{
    auto hw = shipped();
    for (int A = 3; A <= 8; ++A) {
        std::vector<double> clocks;
        for (const auto& name : full_models()) clocks.push_back(chip_report(full_mapping(name, hw), hw, A).clock_period_ns);
        EXPECT_EQ(clocks[0], clocks[1]);
        EXPECT_EQ(clocks[0], clocks[2]);
    }
    EXPECT_EQ(hw.clock_period_ns.at(3), 1.96);
    EXPECT_EQ(hw.clock_period_ns.at(8), 3.05);
}

TEST(ShippedConfig, DominantComponents)
{
    auto hw = shipped();
    for (const auto& name : full_models()) {
        auto m = full_mapping(name, hw);
        for (int A = 3; A <= 8; ++A) {
            auto r = chip_report(m, hw, A);
            const auto& e = r.energy;
            EXPECT_GT(e.ic, std::max({e.buffer, e.adc, e.accum, e.other})) << name << " A=" << A;
            const auto& l = r.latency;
            EXPECT_GT(l.buffer, std::max({l.ic, l.adc, l.accum, l.other})) << name << " A=" << A;
        }
    }
}

TEST(ShippedConfig, AlexNetAdcShareAndRatio)
{
    auto hw = shipped();
    auto m = full_mapping("alexnet", hw);
    auto a3 = area_report(m, hw, 3), a8 = area_report(m, hw, 8);
    EXPECT_NEAR(100 * a3.adc / a3.chip, 13, 3);
    EXPECT_NEAR(100 * a8.adc / a8.chip, 89, 3);
    EXPECT_NEAR(a8.adc / a3.adc, 69, 69 * 0.05);
    EXPECT_NEAR(a3.chip, 55.97, 55.97 * 0.05);
    EXPECT_NEAR(a8.chip, 573.53, 573.53 * 0.05);
}
