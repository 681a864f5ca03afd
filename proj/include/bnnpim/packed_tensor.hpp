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

#include <cstdint>
#include <span>
#include <vector>

#include "common.hpp"

namespace bnnpim {

/**
 * Bit-packed tensor of {-1,+1} values. Element i lives in byte i/8, bit i%8
 * (LSB first); a set bit means +1. Multi-dimensional tensors are row-major, so
 * a K x N matrix places element (i, j) at bit i*N + j.
 */
struct PackedBinaryTensor {
    std::vector<int64_t> dims;
    std::vector<uint8_t> bits;

    PackedBinaryTensor() = default;

    explicit PackedBinaryTensor(std::vector<int64_t> d) : dims(std::move(d))
    {
        bits.assign(static_cast<size_t>(ceil_div(product(dims), 8)), 0);
    }

    static PackedBinaryTensor from_signs(std::vector<int64_t> d, std::span<const int8_t> signs)
    {
        PackedBinaryTensor t(std::move(d));
        if (static_cast<int64_t>(signs.size()) != t.size())
            throw ShapeError("sign vector length does not match dims");
        for (size_t i = 0; i < signs.size(); ++i) {
            if (signs[i] != 1 && signs[i] != -1) throw FormatError("binary tensor value must be +1 or -1");
            if (signs[i] > 0) t.bits[i >> 3] |= uint8_t(1u << (i & 7));
        }
        return t;
    }

    static PackedBinaryTensor from_bytes(std::vector<int64_t> d, std::vector<uint8_t> raw)
    {
        PackedBinaryTensor t;
        t.dims = std::move(d);
        if (static_cast<int64_t>(raw.size()) != ceil_div(t.size(), 8))
            throw FormatError("blob length mismatch: expected " + std::to_string(ceil_div(t.size(), 8)) +
                              " bytes, got " + std::to_string(raw.size()));
        t.bits = std::move(raw);
        // padding bits are defined to be zero
        int64_t tail = t.size() & 7;
        if (tail && !t.bits.empty()) t.bits.back() &= uint8_t((1u << tail) - 1);
        return t;
    }

    int64_t size() const { return product(dims); }

    int get(int64_t i) const { return (bits[size_t(i >> 3)] >> (i & 7)) & 1 ? 1 : -1; }

    void set(int64_t i, int v)
    {
        uint8_t m = uint8_t(1u << (i & 7));
        if (v > 0)
            bits[size_t(i >> 3)] |= m;
        else
            bits[size_t(i >> 3)] &= uint8_t(~m);
    }

    std::vector<int8_t> to_signs() const
    {
        std::vector<int8_t> out(static_cast<size_t>(size()));
        for (int64_t i = 0; i < size(); ++i) out[size_t(i)] = static_cast<int8_t>(get(i));
        return out;
    }

    bool operator==(const PackedBinaryTensor&) const = default;
};

} // namespace bnnpim
