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

#include <fstream>

#include "test_support.hpp"

using namespace bnnpim;
using namespace bnnpim::testing;
namespace fs = std::filesystem;

namespace {

NetworkDescriptor fc_4x2()
{
    NetworkDescriptor net;
    net.name = "fc";
    net.class_count = 2;
    auto L = fc_layer(4, 2);
    L.activation = Activation::none;
    L.input_precision_bits = 8;
    net.layers.push_back(L);
    std::vector<int8_t> ones(8, 1);
    net.weights.push_back(PackedBinaryTensor::from_signs({4, 2}, ones));
    net.thresholds.push_back({});
    return net;
}

NetworkDescriptor two_layer()
{
    std::mt19937_64 rng(1);
    NetworkDescriptor net;
    net.layers.push_back(conv_layer({4, 4, 1}, 3, 3, 1, 1, Pool{PoolKind::max, 2, 2}));
    net.layers.push_back(fc_layer(12, 4));
    randomize(net, rng);
    return net;
}

bool has_rule(const std::vector<Diagnostic>& d, const std::string& rule, int layer)
{
    for (const auto& x : d)
        if (x.rule == rule && x.layer == layer) return true;
    return false;
}

} // namespace

TEST(PackedBinaryTensor, BitPositionIsRowMajorLsbFirst)
{
    std::vector<int8_t> s(3 * 5, -1);
    s[size_t(1 * 5 + 3)] = 1;  // element (1, 3) -> bit 8
    auto t = PackedBinaryTensor::from_signs({3, 5}, s);
    ASSERT_EQ(t.bits.size(), 2u);
    EXPECT_EQ(t.bits[0], 0);
    EXPECT_EQ(t.bits[1], 1);
    EXPECT_EQ(t.get(8), 1);
    EXPECT_EQ(t.to_signs(), s);
}

TEST(PackedBinaryTensor, PaddingBitsIgnored)
{
    auto t = PackedBinaryTensor::from_bytes({3}, {0xff});
    EXPECT_EQ(t.bits[0], 0x07);
    EXPECT_EQ(t.to_signs(), (std::vector<int8_t>{1, 1, 1}));
    EXPECT_THROW(PackedBinaryTensor::from_bytes({9}, {0xff}), FormatError);
    std::vector<int8_t> bad{1, 0};
    EXPECT_THROW(PackedBinaryTensor::from_signs({2}, bad), FormatError);
}

TEST(ModelIr, FanInAndShapes)
{
    auto c = conv_layer({227, 227, 3}, 64, 11, 4, 0, Pool{PoolKind::max, 3, 2});
    EXPECT_EQ(c.fan_in(), 363);
    EXPECT_EQ(c.conv_out_hw()->first, 55);
    EXPECT_EQ(c.out_shape(), (std::vector<int64_t>{27, 27, 64}));
    EXPECT_EQ(c.positions(), 55 * 55);
    EXPECT_EQ(fc_layer(9216, 4096).fan_in(), 9216);
}

TEST(ModelIr, FloorModeDropsTrailingRows)
{
    auto c = conv_layer({224, 224, 3}, 64, 7, 2, 3);
    EXPECT_FALSE(c.conv_out_hw().has_value());
    c.floor_mode = true;
    EXPECT_EQ(c.conv_out_hw()->first, 112);
}

TEST(ValidateChain, ValidTwoLayerNetIsClean) { EXPECT_TRUE(validate_chain(two_layer()).empty()); }

TEST(ValidateChain, MissingThresholdsNamesLayer)
{
    auto net = two_layer();
    net.thresholds[0].tau.clear();
    auto d = validate_chain(net);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].layer, 0);
    EXPECT_EQ(d[0].rule, "missing thresholds");
}

TEST(ValidateChain, FractionalConvOutput)
{
    auto net = two_layer();
    net.layers[0].stride = 2;
    net.layers[0].padding = 0;  // (4 - 3) / 2 is fractional
    EXPECT_TRUE(has_rule(validate_chain(net), "non-integral output shape", 0));
}

TEST(ValidateChain, OtherRules)
{
    auto net = two_layer();
    net.layers[1].in_shape = {13};
    EXPECT_TRUE(has_rule(validate_chain(net), "shape chain", 1));

    net = two_layer();
    net.layers[1].input_precision_bits = 4;
    EXPECT_TRUE(has_rule(validate_chain(net), "input precision", 1));

    net = two_layer();
    net.thresholds[0].tau.pop_back();
    EXPECT_TRUE(has_rule(validate_chain(net), "threshold length", 0));

    net = two_layer();
    net.layers[1].activation = Activation::sign;
    EXPECT_TRUE(has_rule(validate_chain(net), "logit layer", 1));

    net = two_layer();
    net.class_count = 3;
    EXPECT_TRUE(has_rule(validate_chain(net), "class count", 1));

    net = two_layer();
    net.weights[1] = PackedBinaryTensor({12, 5});
    EXPECT_TRUE(has_rule(validate_chain(net), "weight size", 1));

    net = two_layer();
    net.layers[1].inputs = {1};
    EXPECT_TRUE(has_rule(validate_chain(net), "sources", 1));

    net = two_layer();
    net.layers[1].kind = LayerKind::conv;
    EXPECT_TRUE(has_rule(validate_chain(net), "input rank", 1));
}

TEST(ValidateChain, SkipCombineShapes)
{
    std::mt19937_64 rng(3);
    auto net = skip_net(rng);
    EXPECT_TRUE(validate_chain(net).empty());
    EXPECT_EQ(combined_input_shape(net, 4), (std::vector<int64_t>{3, 3, 18}));
    net.layers[2].inputs = {0, 3};
    EXPECT_TRUE(has_rule(validate_chain(net), "sources", 2));
}

TEST(ModelIo, MinimalFcRoundTrip)
{
    auto dir = scratch("fc_roundtrip");
    auto net = fc_4x2();
    save_model(net, dir);
    EXPECT_EQ(load_model(dir), net);
}

TEST(ModelIo, SevenByteBlobIsLengthMismatch)
{
    auto dir = scratch("fc_blob");
    save_model(fc_4x2(), dir);
    std::vector<uint8_t> blob(7, 0xff);
    write_bytes(dir / "layer0.weights.bin", blob.data(), blob.size());
    try {
        load_model(dir);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("blob length mismatch"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
    }
}

TEST(ModelIo, ErrorsCarryLayerIndex)
{
    auto dir = scratch("bad_manifest");
    EXPECT_THROW(load_model(dir), IoError);
    write_text(dir / "manifest.json", "{ not json");
    EXPECT_THROW(load_model(dir), FormatError);
    write_text(dir / "manifest.json", R"({"layers":[{"kind":"lstm","in_shape":[4],"out_channels":2}]})");
    try {
        load_model(dir);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("lstm"), std::string::npos);
    }
    // dropping the pool keeps blob sizes but breaks the chain into layer 1
    auto net = two_layer();
    save_model(net, dir);
    auto m = nlohmann::json::parse(read_text(dir / "manifest.json"));
    m["layers"][0]["pool"] = nullptr;
    write_text(dir / "manifest.json", m.dump());
    try {
        load_model(dir);
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
    }
}

TEST(ModelIo, RandomNetRoundTripProperty)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto net = trial % 2 ? skip_net(rng) : chain_net(rng);
        net.final_scale = std::ldexp(1.0, -int(rng() % 8)) * 0.3;
        auto dir = scratch("roundtrip");
        save_model(net, dir);
        EXPECT_EQ(load_model(dir), net) << "trial " << trial;
    }
}

TEST(ModelIo, TopologyOnlyDescriptorsLoad)
{
    for (const char* m : {"alexnet", "resnet18", "densenet28"}) {
        auto net = load_topology(source_dir() / "descriptors" / m);
        EXPECT_FALSE(net.has_weights());
        EXPECT_TRUE(validate_chain(net, true).empty()) << m;
    }
    EXPECT_EQ(load_topology(source_dir() / "descriptors" / "alexnet").layers.size(), 8u);
}

TEST(ModelIo, DeskBundlesMatchExporterSummary)
{
    for (const auto& p : desk_presets()) {
        auto net = load_model(desk_dir() / p);
        auto summary = nlohmann::json::parse(read_text(desk_dir() / p / "summary.json"));
        ASSERT_EQ(int64_t(net.layers.size()), summary["layer_count"].get<int64_t>()) << p;
        for (size_t i = 0; i < net.layers.size(); ++i)
            EXPECT_EQ(net.layers[i].fan_in(), summary["fan_in"][i].get<int64_t>()) << p << " layer " << i;
        EXPECT_TRUE(validate_chain(net).empty());
    }
}
