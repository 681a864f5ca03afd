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

#include "test_support.hpp"

using namespace bnnpim;

TEST(QuantizeDynamic, ZeroTensor)
{
    for (int B : {1, 4, 8}) {
        auto q = quantize_dynamic(std::vector<double>{0, 0, 0}, B);
        EXPECT_EQ(q.values, (std::vector<int64_t>{0, 0, 0}));
        EXPECT_EQ(q.scale, 1.0);
    }
}

TEST(QuantizeDynamic, EightBitExample)
{
    auto q = quantize_dynamic(std::vector<double>{-1.0, 0.5, 1.0}, 8);
    EXPECT_DOUBLE_EQ(q.scale, 1.0 / 127);
    EXPECT_EQ(q.values, (std::vector<int64_t>{-127, 64, 127}));
}

TEST(QuantizeDynamic, OneBitRangeIsMinusOneToZero)
{
    auto q = quantize_dynamic(std::vector<double>{0.3, -0.2}, 1);
    EXPECT_DOUBLE_EQ(q.scale, 0.3);
    EXPECT_EQ(q.values, (std::vector<int64_t>{0, -1}));
}

TEST(QuantizeDynamic, RejectsBadPrecision)
{
    EXPECT_THROW(quantize_dynamic(std::vector<double>{1.0}, 0), ConfigError);
    EXPECT_THROW(quantize_dynamic(std::vector<double>{1.0}, 33), ConfigError);
    EXPECT_THROW(quantize_dynamic(std::vector<double>{}, 4), ShapeError);
}

TEST(QuantizeDynamic, DequantizationBoundProperty)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int trial = 0; trial < 2000; ++trial) {
        int B = 2 + int(rng() % 15);
        std::vector<double> x(1 + rng() % 40);
        for (auto& v : x) v = u(rng);
        auto q = quantize_dynamic(x, B);
        EXPECT_GT(q.scale, 0);
        for (size_t i = 0; i < x.size(); ++i) {
            EXPECT_GE(q.values[i], q.min_value());
            EXPECT_LE(q.values[i], q.max_value());
            EXPECT_LE(std::fabs(double(q.values[i]) * q.scale - x[i]), q.scale / 2 * (1 + 1e-12));
        }
    }
}

TEST(BitSerialize, Examples)
{
    QuantizedTensor q{{1}, {13}, 1.0, 5};
    auto s = bit_serialize(q);
    std::vector<uint8_t> bits;
    for (const auto& p : s.planes) bits.push_back(p[0]);
    EXPECT_EQ(bits, (std::vector<uint8_t>{1, 0, 1, 1, 0}));

    QuantizedTensor m{{1}, {-1}, 1.0, 2};
    auto t = bit_serialize(m);
    EXPECT_EQ(t.planes[0][0], 1);
    EXPECT_EQ(t.planes[1][0], 1);
    EXPECT_EQ(BitPlaneSet::weight(1, 2), -2);
    EXPECT_EQ(t.reconstruct(), (std::vector<int64_t>{-1}));
}

TEST(BitSerialize, ExhaustiveReconstructionUpToEightBits)
{
    for (int B = 1; B <= 8; ++B) {
        QuantizedTensor q;
        q.precision_bits = B;
        for (int64_t v = q.min_value(); v <= q.max_value(); ++v) q.values.push_back(v);
        q.dims = {int64_t(q.values.size())};
        EXPECT_EQ(bit_serialize(q).reconstruct(), q.values) << "B=" << B;
    }
}

TEST(BitSerialize, RandomReconstruction)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10000; ++trial) {
        int B = 1 + int(rng() % 16);
        QuantizedTensor q;
        q.precision_bits = B;
        int64_t span = q.max_value() - q.min_value() + 1;
        q.values = {q.min_value() + int64_t(rng() % uint64_t(span))};
        q.dims = {1};
        ASSERT_EQ(bit_serialize(q).reconstruct(), q.values);
    }
}

TEST(Binarize, Examples)
{
    ThresholdVector tau{{0, 0}};
    std::vector<double> x{3, -2};
    EXPECT_EQ(binarize(std::span<const double>(x), {2}, tau).to_signs(), (std::vector<int8_t>{1, -1}));

    ThresholdVector t3{{0.5, -1, 2}};
    std::vector<double> eq{0.5, -1, 2, 0.5, -1, 2};
    for (auto s : binarize(std::span<const double>(eq), {2, 3}, t3).to_signs()) EXPECT_EQ(s, 1);

    EXPECT_THROW(binarize(std::span<const double>(x), {2}, t3), ShapeError);
}

TEST(Binarize, IdempotentOnBinaryInput)
{
    std::mt19937_64 rng(2);
    auto s = bnnpim::testing::random_signs(rng, 64);
    ThresholdVector tau{std::vector<double>(8, 0.0)};
    auto once = binarize(std::span<const int8_t>(s), {8, 8}, tau).to_signs();
    EXPECT_EQ(once, s);
    auto twice = binarize(std::span<const int8_t>(once), {8, 8}, tau).to_signs();
    EXPECT_EQ(twice, once);
}
