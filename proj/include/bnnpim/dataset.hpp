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
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace bnnpim {

/// Sample-major float32 images with int32 labels.
struct Dataset {
    std::vector<int64_t> sample_shape;  // {H, W, C} or {features}
    std::vector<float> data;
    std::vector<int32_t> labels;

    int64_t count() const { return int64_t(labels.size()); }
    int64_t sample_size() const { return product(sample_shape); }

    std::span<const float> sample(int64_t i) const
    {
        return {data.data() + i * sample_size(), size_t(sample_size())};
    }

    /// First n samples (all when n >= count).
    Dataset head(int64_t n) const
    {
        Dataset d;
        d.sample_shape = sample_shape;
        n = std::min(n, count());
        d.data.assign(data.begin(), data.begin() + n * sample_size());
        d.labels.assign(labels.begin(), labels.begin() + n);
        return d;
    }

    /**
     * n samples chosen by a seeded partial Fisher-Yates draw, kept in original
     * order. Returns the full set unchanged when n <= 0 or n >= count.
     */
    Dataset subsample(int64_t n, uint64_t seed) const
    {
        if (n <= 0 || n >= count()) return *this;
        std::vector<int64_t> idx(static_cast<size_t>(count()));
        for (int64_t i = 0; i < count(); ++i) idx[size_t(i)] = i;
        std::mt19937_64 rng(seed);
        for (int64_t i = 0; i < n; ++i) {
            auto j = i + int64_t(rng() % uint64_t(count() - i));
            std::swap(idx[size_t(i)], idx[size_t(j)]);
        }
        idx.resize(size_t(n));
        std::sort(idx.begin(), idx.end());
        Dataset d;
        d.sample_shape = sample_shape;
        for (auto i : idx) {
            auto s = sample(i);
            d.data.insert(d.data.end(), s.begin(), s.end());
            d.labels.push_back(labels[size_t(i)]);
        }
        return d;
    }
};

inline Dataset load_dataset(const std::filesystem::path& dir)
{
    auto shape_path = dir / "shape.json";
    if (!std::filesystem::exists(shape_path)) throw IoError("no shape.json in " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(shape_path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed shape.json: ") + e.what());
    }
    Dataset d;
    try {
        d.sample_shape = j.at("sample_shape").get<std::vector<int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("shape.json: ") + e.what());
    }
    d.data = decode_le<float>(read_bytes(dir / "data.bin"), "data.bin");
    d.labels = decode_le<int32_t>(read_bytes(dir / "labels.bin"), "labels.bin");
    if (d.sample_size() < 1 || d.data.size() != d.labels.size() * size_t(d.sample_size()))
        throw FormatError("data.bin length does not match labels.bin count x sample shape");
    if (j.contains("count") && j["count"].get<int64_t>() != d.count())
        throw FormatError("shape.json count does not match labels.bin");
    return d;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::json j{{"sample_shape", d.sample_shape}, {"count", d.count()}, {"dtype", "float32"}};
    write_text(dir / "shape.json", j.dump(2) + "\n");
    write_le(dir / "data.bin", d.data);
    write_le(dir / "labels.bin", d.labels);
}

} // namespace bnnpim
