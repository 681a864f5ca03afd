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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace bnnpim {

/// A unit cost that is either constant or tabulated by ADC resolution.
struct UnitValue {
    double scalar = 0.0;
    std::map<int, double> table;

    static UnitValue constant(double v) { return {v, {}}; }

    bool tabulated() const { return !table.empty(); }

    double at(int A) const
    {
        if (!tabulated()) return scalar;
        auto it = table.find(A);
        if (it == table.end()) throw ConfigError("unit table has no entry for A=" + std::to_string(A));
        return it->second;
    }

    bool defined_for(int A) const { return !tabulated() || table.count(A); }

    bool non_decreasing() const
    {
        double prev = -1e300;
        for (auto [a, v] : table) {
            if (v < prev) return false;
            prev = v;
        }
        return true;
    }

    double min_value() const
    {
        if (!tabulated()) return scalar;
        double m = 1e300;
        for (auto [a, v] : table) m = std::min(m, v);
        return m;
    }
};

struct HardwareConfig {
    int64_t rows = 128;
    int64_t cols = 128;
    int64_t mux = 8;
    int64_t macro_rows = 1;  // subarrays are allocated in macro_rows x macro_cols blocks
    int64_t macro_cols = 1;
    int64_t bus_width_bits = 128;
    bool pipeline = true;

    UnitValue clock_period_ns;
    double cim_cell_area_um2 = 0.0;

    UnitValue adc_area_um2, adc_latency_ns, adc_energy_pJ;
    UnitValue buffer_latency_cycles, buffer_energy_pJ, buffer_area_um2;
    UnitValue ic_area_um2_per_subarray, ic_area_um2_per_chip, ic_latency_ns, ic_energy_pJ;
    UnitValue accum_area_um2, accum_latency_ns, accum_energy_pJ;
    UnitValue periphery_area_um2_per_subarray, periphery_area_um2_per_chip, periphery_latency_ns;
    UnitValue other_energy_pJ_per_mac;
    double leakage_w_per_mm2 = 0.0;

    int64_t adcs_per_subarray() const { return ceil_div(cols, mux); }

    std::vector<const UnitValue*> all_units() const
    {
        return {&clock_period_ns, &adc_area_um2, &adc_latency_ns, &adc_energy_pJ, &buffer_latency_cycles,
                &buffer_energy_pJ, &buffer_area_um2, &ic_area_um2_per_subarray, &ic_area_um2_per_chip,
                &ic_latency_ns, &ic_energy_pJ, &accum_area_um2, &accum_latency_ns, &accum_energy_pJ,
                &periphery_area_um2_per_subarray, &periphery_area_um2_per_chip, &periphery_latency_ns,
                &other_energy_pJ_per_mac};
    }

    /// Throws unless every table covers A.
    void require(int A) const
    {
        if (!clock_period_ns.tabulated() && clock_period_ns.scalar <= 0)
            throw ConfigError("clock_period_ns must be defined");
        for (auto* u : all_units())
            if (!u->defined_for(A)) throw ConfigError("hardware config has no entry for A=" + std::to_string(A));
    }

    void validate() const
    {
        if (rows < 1 || cols < 1) throw ConfigError("subarray dims must be >= 1");
        if (mux < 1 || cols % mux != 0) throw ConfigError("mux ratio must divide subarray cols");
        if (macro_rows < 1 || macro_cols < 1) throw ConfigError("macro tile dims must be >= 1");
        if (bus_width_bits < 1) throw ConfigError("bus width must be >= 1");
        if (cim_cell_area_um2 < 0 || leakage_w_per_mm2 < 0) throw ConfigError("unit costs must be >= 0");
        for (auto* u : all_units())
            if (u->min_value() < 0) throw ConfigError("unit costs must be >= 0");
    }
};

namespace detail {

inline UnitValue parse_unit(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || j[key].is_null()) return {};
    const auto& v = j[key];
    if (v.is_number()) return UnitValue::constant(v.get<double>());
    if (!v.is_object()) throw FormatError(std::string("unit '") + key + "' must be a number or an A-keyed table");
    UnitValue u;
    for (auto it = v.begin(); it != v.end(); ++it) {
        int A = 0;
        try {
            A = std::stoi(it.key());
        } catch (...) {
            throw FormatError(std::string("unit '") + key + "' has non-integer key '" + it.key() + "'");
        }
        u.table[A] = it.value().get<double>();
    }
    return u;
}

inline nlohmann::json unit_json(const UnitValue& u)
{
    if (!u.tabulated()) return u.scalar;
    nlohmann::json j = nlohmann::json::object();
    for (auto [a, v] : u.table) j[std::to_string(a)] = v;
    return j;
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key)
{
    static const nlohmann::json empty = nlohmann::json::object();
    return j.contains(key) ? j[key] : empty;
}

} // namespace detail

inline HardwareConfig parse_hw_config(const nlohmann::json& j)
{
    using detail::parse_unit;
    using detail::section;
    HardwareConfig hw;
    try {
        const auto& sa = section(j, "subarray");
        hw.rows = sa.value("rows", hw.rows);
        hw.cols = sa.value("cols", hw.cols);
        hw.mux = j.value("mux_ratio", hw.mux);
        const auto& mt = section(j, "macro_tile");
        hw.macro_rows = mt.value("rows", int64_t(1));
        hw.macro_cols = mt.value("cols", int64_t(1));
        hw.bus_width_bits = j.value("bus_width_bits", hw.bus_width_bits);
        hw.pipeline = j.value("pipeline", true);
        hw.clock_period_ns = parse_unit(j, "clock_period_ns");
        hw.cim_cell_area_um2 = j.value("cim_cell_area_um2", 0.0);
        const auto& adc = section(j, "adc_unit");
        hw.adc_area_um2 = parse_unit(adc, "area_um2");
        hw.adc_latency_ns = parse_unit(adc, "latency_ns");
        hw.adc_energy_pJ = parse_unit(adc, "energy_pJ");
        const auto& buf = section(j, "buffer");
        hw.buffer_latency_cycles = parse_unit(buf, "latency_cycles");
        hw.buffer_energy_pJ = parse_unit(buf, "energy_pJ");
        hw.buffer_area_um2 = parse_unit(buf, "area_um2");
        const auto& ic = section(j, "ic");
        hw.ic_area_um2_per_subarray = parse_unit(ic, "area_um2_per_subarray");
        hw.ic_area_um2_per_chip = parse_unit(ic, "area_um2_per_chip");
        hw.ic_latency_ns = parse_unit(ic, "latency_ns");
        hw.ic_energy_pJ = parse_unit(ic, "energy_pJ");
        const auto& acc = section(j, "accum");
        hw.accum_area_um2 = parse_unit(acc, "area_um2");
        hw.accum_latency_ns = parse_unit(acc, "latency_ns");
        hw.accum_energy_pJ = parse_unit(acc, "energy_pJ");
        const auto& per = section(j, "periphery");
        hw.periphery_area_um2_per_subarray = parse_unit(per, "area_um2_per_subarray");
        hw.periphery_area_um2_per_chip = parse_unit(per, "area_um2_per_chip");
        hw.periphery_latency_ns = parse_unit(per, "latency_ns");
        hw.other_energy_pJ_per_mac = parse_unit(j, "other_energy_pJ_per_mac");
        hw.leakage_w_per_mm2 = j.value("leakage_power_w_per_mm2", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("hardware config: ") + e.what());
    }
    hw.validate();
    return hw;
}

inline nlohmann::json hw_config_json(const HardwareConfig& hw)
{
    using detail::unit_json;
    nlohmann::json j;
    j["subarray"] = {{"rows", hw.rows}, {"cols", hw.cols}};
    j["mux_ratio"] = hw.mux;
    j["macro_tile"] = {{"rows", hw.macro_rows}, {"cols", hw.macro_cols}};
    j["bus_width_bits"] = hw.bus_width_bits;
    j["pipeline"] = hw.pipeline;
    j["clock_period_ns"] = unit_json(hw.clock_period_ns);
    j["cim_cell_area_um2"] = hw.cim_cell_area_um2;
    j["adc_unit"] = {{"area_um2", unit_json(hw.adc_area_um2)},
                     {"latency_ns", unit_json(hw.adc_latency_ns)},
                     {"energy_pJ", unit_json(hw.adc_energy_pJ)}};
    j["buffer"] = {{"latency_cycles", unit_json(hw.buffer_latency_cycles)},
                   {"energy_pJ", unit_json(hw.buffer_energy_pJ)},
                   {"area_um2", unit_json(hw.buffer_area_um2)}};
    j["ic"] = {{"area_um2_per_subarray", unit_json(hw.ic_area_um2_per_subarray)},
               {"area_um2_per_chip", unit_json(hw.ic_area_um2_per_chip)},
               {"latency_ns", unit_json(hw.ic_latency_ns)},
               {"energy_pJ", unit_json(hw.ic_energy_pJ)}};
    j["accum"] = {{"area_um2", unit_json(hw.accum_area_um2)},
                  {"latency_ns", unit_json(hw.accum_latency_ns)},
                  {"energy_pJ", unit_json(hw.accum_energy_pJ)}};
    j["periphery"] = {{"area_um2_per_subarray", unit_json(hw.periphery_area_um2_per_subarray)},
                      {"area_um2_per_chip", unit_json(hw.periphery_area_um2_per_chip)},
                      {"latency_ns", unit_json(hw.periphery_latency_ns)}};
    j["other_energy_pJ_per_mac"] = unit_json(hw.other_energy_pJ_per_mac);
    j["leakage_power_w_per_mm2"] = hw.leakage_w_per_mm2;
    return j;
}

inline HardwareConfig load_hw_config(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw IoError("no hardware config at " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("malformed hardware config: ") + e.what());
    }
    return parse_hw_config(j);
}

} // namespace bnnpim
