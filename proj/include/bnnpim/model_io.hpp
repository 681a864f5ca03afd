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

#include <filesystem>
#include <string>

#include <json.hpp>

#include "model_ir.hpp"

namespace bnnpim {

namespace detail {

using nlohmann::json;

inline std::string layer_tag(size_t i) { return "layer " + std::to_string(i) + ": "; }

inline LayerKind parse_kind(const std::string& s, size_t i)
{
    if (s == "conv") return LayerKind::conv;
    if (s == "fc") return LayerKind::fc;
    throw FormatError(layer_tag(i) + "unsupported layer kind '" + s + "'");
}

template <typename T>
T field(const json& j, const char* key, size_t i)
{
    if (!j.contains(key)) throw FormatError(layer_tag(i) + "missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(layer_tag(i) + "bad field '" + key + "': " + e.what());
    }
}

inline LayerDescriptor parse_layer(const json& j, size_t i)
{
    if (!j.is_object()) throw FormatError(layer_tag(i) + "layer entry must be an object");
    LayerDescriptor L;
    L.kind = parse_kind(field<std::string>(j, "kind", i), i);
    L.in_shape = field<std::vector<int64_t>>(j, "in_shape", i);
    L.out_channels = field<int64_t>(j, "out_channels", i);
    if (L.kind == LayerKind::conv) {
        auto k = field<std::vector<int>>(j, "kernel", i);
        if (k.size() != 2) throw FormatError(layer_tag(i) + "kernel must be [k_h, k_w]");
        L.kernel_h = k[0];
        L.kernel_w = k[1];
        L.stride = j.value("stride", 1);
        L.padding = j.value("padding", 0);
        L.floor_mode = j.value("floor_mode", false);
    }
    if (j.contains("pool") && !j["pool"].is_null()) {
        const auto& p = j["pool"];
        Pool pool;
        auto kind = field<std::string>(p, "kind", i);
        if (kind == "max")
            pool.kind = PoolKind::max;
        else if (kind == "avg")
            pool.kind = PoolKind::avg;
        else
            throw FormatError(layer_tag(i) + "unsupported pool kind '" + kind + "'");
        pool.window = field<int>(p, "window", i);
        pool.stride = p.value("stride", pool.window);
        L.pool = pool;
    }
    auto act = j.value("activation", std::string("sign"));
    if (act == "sign")
        L.activation = Activation::sign;
    else if (act == "none")
        L.activation = Activation::none;
    else
        throw FormatError(layer_tag(i) + "unsupported activation '" + act + "'");
    L.input_precision_bits = j.value("input_precision_bits", 1);
    if (j.contains("inputs")) L.inputs = field<std::vector<int>>(j, "inputs", i);
    auto comb = j.value("combine", std::string("concat"));
    if (comb == "concat")
        L.combine = Combine::concat;
    else if (comb == "add")
        L.combine = Combine::add;
    else
        throw FormatError(layer_tag(i) + "unsupported combine mode '" + comb + "'");
    return L;
}

inline json layer_json(const LayerDescriptor& L)
{
    json j;
    j["kind"] = L.kind == LayerKind::conv ? "conv" : "fc";
    j["in_shape"] = L.in_shape;
    j["out_channels"] = L.out_channels;
    if (L.kind == LayerKind::conv) {
        j["kernel"] = {L.kernel_h, L.kernel_w};
        j["stride"] = L.stride;
        j["padding"] = L.padding;
        if (L.floor_mode) j["floor_mode"] = true;
    }
    if (L.pool)
        j["pool"] = {{"kind", L.pool->kind == PoolKind::max ? "max" : "avg"},
                     {"window", L.pool->window},
                     {"stride", L.pool->stride}};
    else
        j["pool"] = nullptr;
    j["activation"] = L.activation == Activation::sign ? "sign" : "none";
    j["input_precision_bits"] = L.input_precision_bits;
    if (!L.inputs.empty()) j["inputs"] = L.inputs;
    j["combine"] = L.combine == Combine::add ? "add" : "concat";
    return j;
}

inline std::string format_diagnostics(const std::vector<Diagnostic>& d)
{
    std::string s;
    for (const auto& x : d) s += layer_tag(size_t(x.layer)) + x.rule + " (" + x.message + ")\n";
    return s;
}

inline NetworkDescriptor parse_manifest(const std::filesystem::path& dir, bool with_params)
{
    auto mpath = dir / "manifest.json";
    if (!std::filesystem::exists(mpath)) throw IoError("no manifest.json in " + dir.string());
    json m;
    try {
        m = json::parse(read_text(mpath));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    if (!m.is_object() || !m.contains("layers") || !m["layers"].is_array())
        throw FormatError("malformed manifest: missing layer list");

    NetworkDescriptor net;
    net.name = m.value("name", std::string());
    net.class_count = m.value("class_count", 0);
    net.final_scale = m.value("final_scale", 1.0);
    const auto& layers = m["layers"];
    for (size_t i = 0; i < layers.size(); ++i) net.layers.push_back(parse_layer(layers[i], i));

    if (with_params) {
        for (size_t i = 0; i < layers.size(); ++i) {
            const auto& L = net.layers[i];
            auto wname = field<std::string>(layers[i], "weights", i);
            auto raw = read_bytes(dir / wname);
            try {
                net.weights.push_back(PackedBinaryTensor::from_bytes({L.fan_in(), L.out_channels}, std::move(raw)));
            } catch (const FormatError& e) {
                throw FormatError(layer_tag(i) + e.what());
            }
            ThresholdVector tv;
            if (L.activation == Activation::sign) {
                auto tname = field<std::string>(layers[i], "thresholds", i);
                tv.tau = decode_le<double>(read_bytes(dir / tname), layer_tag(i) + "thresholds");
                if (int64_t(tv.tau.size()) != L.out_channels)
                    throw FormatError(layer_tag(i) + "blob length mismatch: thresholds");
            }
            net.thresholds.push_back(std::move(tv));
        }
    }
    auto diags = validate_chain(net, !with_params);
    if (!diags.empty()) throw ShapeError("invalid network:\n" + format_diagnostics(diags));
    return net;
}

} // namespace detail

/// Loads a model bundle (manifest.json plus weight and threshold blobs) and validates it.
inline NetworkDescriptor load_model(const std::filesystem::path& dir) { return detail::parse_manifest(dir, true); }

/// Loads only the layer list; blob references are ignored. Used for shape-only
/// hardware descriptors.
inline NetworkDescriptor load_topology(const std::filesystem::path& dir) { return detail::parse_manifest(dir, false); }

inline void save_model(const NetworkDescriptor& net, const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string());
    nlohmann::json m;
    m["format"] = "bnnpim-model";
    m["version"] = 1;
    m["name"] = net.name;
    m["class_count"] = net.class_count;
    m["final_scale"] = net.final_scale;
    m["layers"] = nlohmann::json::array();
    for (size_t i = 0; i < net.layers.size(); ++i) {
        auto j = detail::layer_json(net.layers[i]);
        if (net.has_weights()) {
            std::string w = "layer" + std::to_string(i) + ".weights.bin";
            write_bytes(dir / w, net.weights[i].bits.data(), net.weights[i].bits.size());
            j["weights"] = w;
            if (net.layers[i].activation == Activation::sign) {
                std::string t = "layer" + std::to_string(i) + ".thresholds.bin";
                write_le(dir / t, net.thresholds[i].tau);
                j["thresholds"] = t;
            }
        }
        m["layers"].push_back(std::move(j));
    }
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

} // namespace bnnpim
