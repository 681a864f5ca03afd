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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnnpim {

// Malformed or inconsistent input data (manifests, blobs, configs).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor/layer shapes that do not line up.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad parameter values (ranges, missing table entries).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A post-condition check failed on computed results.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

inline constexpr int64_t round_up(int64_t a, int64_t m) { return ceil_div(a, m) * m; }

inline int64_t product(const std::vector<int64_t>& dims)
{
    int64_t p = 1;
    for (auto d : dims) p *= d;
    return p;
}

inline std::vector<uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const void* data, size_t n)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("short write on " + path.string());
}

inline std::string read_text(const std::filesystem::path& path)
{
    auto b = read_bytes(path);
    return {b.begin(), b.end()};
}

inline void write_text(const std::filesystem::path& path, const std::string& s)
{
    write_bytes(path, s.data(), s.size());
}

// Little-endian scalar decode/encode. The library only targets little-endian hosts,
// so these are memcpy with a static check.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
std::vector<T> decode_le(const std::vector<uint8_t>& bytes, const std::string& what)
{
    if (bytes.size() % sizeof(T) != 0)
        throw FormatError(what + ": byte length " + std::to_string(bytes.size()) +
                          " is not a multiple of " + std::to_string(sizeof(T)));
    std::vector<T> out(bytes.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

template <typename T>
void write_le(const std::filesystem::path& path, const std::vector<T>& v)
{
    write_bytes(path, v.data(), v.size() * sizeof(T));
}

} // namespace bnnpim
