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

#include <set>

#include "test_support.hpp"

using namespace bnnpim;
using namespace bnnpim::testing;

namespace {

PackedBinaryTensor random_matrix(std::mt19937_64& rng, int64_t K, int64_t N)
{
    auto s = random_signs(rng, K * N);
    return PackedBinaryTensor::from_signs({K, N}, s);
}

} // namespace

TEST(MapWeights, SingleTileAllPositive)
{
    std::vector<int8_t> ones(4, 1);
    auto tiles = map_weights(PackedBinaryTensor::from_signs({2, 2}, ones), 128, 128);
    ASSERT_EQ(tiles.size(), 1u);
    EXPECT_EQ(tiles[0].rows_used, 2);
    EXPECT_EQ(tiles[0].cols_used, 2);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            EXPECT_EQ(tiles[0].g_pos(r, c), 1);
            EXPECT_EQ(tiles[0].g_neg(r, c), 0);
        }
}

TEST(MapWeights, RowTileCeiling)
{
    std::mt19937_64 rng(1);
    auto tiles = map_weights(random_matrix(rng, 3, 2), 2, 2);
    ASSERT_EQ(tiles.size(), 2u);
    EXPECT_EQ(tiles[0].rows_used, 2);
    EXPECT_EQ(tiles[1].rows_used, 1);
}

TEST(MapWeights, ReassemblyPropertyAndTwoCellInvariant)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        int64_t K = 1 + int64_t(rng() % 300), N = 1 + int64_t(rng() % 90);
        int64_t R = 1 + int64_t(rng() % 140), C = 1 + int64_t(rng() % 70);
        auto W = random_matrix(rng, K, N);
        auto tiles = map_weights(W, R, C);
        ASSERT_EQ(int64_t(tiles.size()), ceil_div(K, R) * ceil_div(N, C));
        std::vector<int> seen(size_t(K * N), 0);
        for (const auto& t : tiles)
            for (int64_t r = 0; r < t.rows_used; ++r)
                for (int64_t c = 0; c < t.cols_used; ++c) {
                    ASSERT_EQ(t.g_pos(r, c) + t.g_neg(r, c), 1);
                    int64_t idx = (t.row_offset + r) * N + t.col_offset + c;
                    ASSERT_EQ(t.weight(r, c), W.get(idx));
                    seen[size_t(idx)]++;
                }
        for (int v : seen) ASSERT_EQ(v, 1);
    }
}

TEST(ColumnSums, XnorPerfectCorrelation)
{
    std::mt19937_64 rng(3);
    auto W = random_matrix(rng, 100, 1);
    auto t = map_weights(W, 128, 128)[0];
    auto col = W.to_signs();
    EXPECT_EQ(column_sums(t, Drive::xnor(col))[0], 100);
}

TEST(ColumnSums, ZeroBitplaneGivesZero)
{
    std::mt19937_64 rng(4);
    auto t = map_weights(random_matrix(rng, 70, 9), 128, 128)[0];
    std::vector<uint8_t> v(70, 0);
    for (auto s : column_sums(t, Drive::bitplane(v))) EXPECT_EQ(s, 0);
}

TEST(ColumnSums, MatchDirectDotProducts)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10000; ++trial) {
        int64_t K = 1 + int64_t(rng() % 200), N = 1 + int64_t(rng() % 4);
        auto W = random_matrix(rng, K, N);
        auto t = map_weights(W, K, N)[0];
        bool xnor = rng() & 1;
        std::vector<int8_t> a(static_cast<size_t>(K));
        std::vector<uint8_t> v(static_cast<size_t>(K));
        for (int64_t k = 0; k < K; ++k) {
            a[size_t(k)] = int8_t(int(rng() % 3) - 1);  // includes masked rows
            v[size_t(k)] = uint8_t(rng() & 1);
        }
        auto got = xnor ? column_sums(t, Drive::xnor(a)) : column_sums(t, Drive::bitplane(v));
        for (int64_t n = 0; n < N; ++n) {
            int64_t want = 0;
            for (int64_t k = 0; k < K; ++k) want += (xnor ? a[size_t(k)] : v[size_t(k)]) * W.get(k * N + n);
            ASSERT_EQ(got[size_t(n)], want);
        }
    }
}

TEST(ColumnSums, LengthMismatchThrows)
{
    std::mt19937_64 rng(6);
    auto t = map_weights(random_matrix(rng, 8, 2), 128, 128)[0];
    std::vector<int8_t> a(7, 1);
    EXPECT_THROW(column_sums(t, Drive::xnor(a)), ShapeError);
}

TEST(Adc, StepFormula)
{
    EXPECT_EQ(AdcSpec::make(3, -8, 8).step, 3);
    EXPECT_EQ(AdcSpec::make(8, -100, 100).step, 1);
    EXPECT_EQ(AdcSpec::make(3, -128, 128).step, 33);
    EXPECT_THROW(AdcSpec::make(3, 2, 1), ConfigError);
    EXPECT_THROW(AdcSpec::make(0, 0, 1), ConfigError);
}

TEST(Adc, PassThroughExample)
{
    EXPECT_EQ(adc_quantize(37, AdcSpec::make(8, -100, 100)), 37);
}

TEST(Adc, ThreeBitExampleAndBoundOnItsRange)
{
    auto a = AdcSpec::make(3, -8, 8);
    EXPECT_EQ(adc_quantize(5, a), 4);
    for (int64_t s = -8; s <= 8; ++s) EXPECT_LE(std::abs(adc_quantize(s, a) - s), ceil_div(a.step, 2)) << s;
    // step 3 on a 17-wide range reaches codes 0..5 only
    std::set<int64_t> levels;
    for (int64_t s = -8; s <= 8; ++s) levels.insert(adc_quantize(s, a));
    EXPECT_EQ(levels, (std::set<int64_t>{-8, -5, -2, 1, 4, 7}));
}

TEST(Adc, ClampAboveRange)
{
    auto a = AdcSpec::make(3, -8, 8);
    EXPECT_EQ(adc_quantize(18, a), 7);
    EXPECT_EQ(adc_quantize(-50, a), -8);
}

TEST(Adc, MonotoneInInput)
{
    for (int A = 1; A <= 9; ++A)
        for (int64_t c = 0; c <= 64; ++c) {
            auto a = AdcSpec::make(A, -c, c);
            int64_t prev = INT64_MIN;
            for (int64_t s = -c - 5; s <= c + 5; ++s) {
                int64_t v = adc_quantize(s, a);
                ASSERT_GE(v, prev);
                prev = v;
            }
        }
}

TEST(Adc, ExactWheneverCodesCoverRange)
{
    for (int A = 1; A <= 9; ++A)
        for (int64_t lo = -40; lo <= 0; ++lo)
            for (int64_t hi = lo; hi <= 40; ++hi) {
                auto a = AdcSpec::make(A, lo, hi);
                if (!a.lossless()) continue;
                for (int64_t s = lo; s <= hi; ++s) ASSERT_EQ(adc_quantize(s, a), s);
            }
}

// The literal transfer function can place a clamped top-of-range input more than
// ceil(step/2) below clip_hi once the top code saturates. This pins the exact
// count so any change to the formula is noticed.
TEST(Adc, LiteralFormulaBoundViolationCount)
{
    int violations = 0;
    std::pair<int64_t, int> first{-1, -1};
    for (int64_t c = 0; c <= 256; ++c)
        for (int A = 1; A <= 9; ++A) {
            auto a = AdcSpec::make(A, -c, c);
            bool bad = false;
            for (int64_t s = -c; s <= c && !bad; ++s)
                bad = std::abs(adc_quantize(s, a) - s) > ceil_div(a.step, 2);
            if (bad && violations++ == 0) first = {c, A};
        }
    EXPECT_EQ(violations, 837);
    EXPECT_EQ(first, (std::pair<int64_t, int>{5, 1}));
}

TEST(LosslessTheorem, SmallTilesExhaustive)
{
    for (int64_t K = 1; K <= 8; ++K) {
        for (uint64_t wbits = 0; wbits < (uint64_t(1) << K); ++wbits) {
            std::vector<int8_t> w(static_cast<size_t>(K));
            for (int64_t k = 0; k < K; ++k) w[size_t(k)] = (wbits >> k) & 1 ? 1 : -1;
            auto t = map_weights(PackedBinaryTensor::from_signs({K, 1}, w), 8, 8)[0];
            auto adc = lossless_adc(K);
            ASSERT_TRUE(adc.lossless());
            for (uint64_t abits = 0; abits < (uint64_t(1) << K); ++abits) {
                std::vector<int8_t> a(static_cast<size_t>(K));
                std::vector<uint8_t> v(static_cast<size_t>(K));
                for (int64_t k = 0; k < K; ++k) {
                    a[size_t(k)] = (abits >> k) & 1 ? 1 : -1;
                    v[size_t(k)] = (abits >> k) & 1;
                }
                for (auto s : {column_sums(t, Drive::xnor(a))[0], column_sums(t, Drive::bitplane(v))[0]})
                    ASSERT_EQ(adc_quantize(s, adc), s);
            }
        }
    }
}

TEST(CalibrateAdc, Policies)
{
    std::vector<int64_t> none;
    EXPECT_EQ(calibrate_adc(none, 6, CalibrationPolicy::full_range(), 64), AdcSpec::make(6, -64, 64));
    std::vector<int64_t> threes(1000, 3);
    auto a = calibrate_adc(threes, 6, CalibrationPolicy::central(99.9), 128);
    EXPECT_EQ(a.clip_lo, -3);
    EXPECT_EQ(a.clip_hi, 3);
    std::vector<int64_t> uni;
    for (int64_t s = -8; s <= 8; ++s) uni.push_back(s);
    auto u = calibrate_adc(uni, 3, CalibrationPolicy::central(100), 128);
    EXPECT_EQ(u.clip_lo, -8);
    EXPECT_EQ(u.step, 3);
    EXPECT_THROW(calibrate_adc(none, 6, CalibrationPolicy::central(99.9), 64), ConfigError);
    EXPECT_THROW(calibrate_adc(uni, 6, CalibrationPolicy::central(0), 64), ConfigError);
}

TEST(CalibrateAdc, PercentileCappedAndSymmetrized)
{
    std::vector<int64_t> s;
    for (int i = 0; i < 1000; ++i) s.push_back(i % 10 == 0 ? -30 : 5);
    auto a = calibrate_adc(s, 4, CalibrationPolicy::central(99), 20);
    EXPECT_EQ(a.clip_lo, -20);
    EXPECT_EQ(a.clip_hi, 20);
}
