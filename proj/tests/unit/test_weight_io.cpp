#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "oralnet/errors.hpp"
#include "oralnet/weight_io.hpp"

using namespace oralnet;

namespace {

std::vector<std::uint8_t> to_bytes(const WeightStore& s) {
    std::ostringstream out;
    write_weights(s, out);
    const std::string str = out.str();
    return {str.begin(), str.end()};
}

WeightStore random_store(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(0, 6), rank(0, 4), ext(0, 64), len(1, 256), chr(32, 126);
    WeightStore s;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        std::string name(static_cast<std::size_t>(len(rng)), 'a');
        for (auto& c : name) c = static_cast<char>(chr(rng));
        name += "#" + std::to_string(i);
        Tensor::Shape shape(static_cast<std::size_t>(rank(rng)));
        std::size_t total = 1;
        for (auto& d : shape) {
            // keep payloads small: 64^4 floats would be 64 MiB
            d = static_cast<std::size_t>(ext(rng));
            if (total * d > 4096) d = 1;
            total *= d;
        }
        s.insert(name, oracle::random_tensor(shape, rng));
    }
    return s;
}

}  // namespace

TEST_CASE("empty store layout") {
    const auto bytes = to_bytes(WeightStore{});
    REQUIRE(bytes.size() == 9);
    CHECK(std::memcmp(bytes.data(), "TKWS", 4) == 0);
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 0);
    CHECK(read_weights_bytes(bytes).size() == 0);
}

TEST_CASE("single tensor byte layout") {
    WeightStore s;
    s.insert("w", Tensor::vector({1.0f, 2.0f}));
    const auto b = to_bytes(s);
    const std::vector<std::uint8_t> expected = {
        'T', 'K', 'W', 'S', 1,        // magic, version
        1, 0, 0, 0,                   // count
        1, 0, 'w',                    // name
        0, 1,                         // dtype, rank
        2, 0, 0, 0, 0, 0, 0, 0,       // extent
        0x00, 0x00, 0x80, 0x3F,       // 1.0f
        0x00, 0x00, 0x00, 0x40,       // 2.0f
    };
    CHECK(b == expected);
}

TEST_CASE("round trip and write fixpoint on random stores") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const WeightStore s = random_store(rng);
        const auto bytes = to_bytes(s);
        const WeightStore back = read_weights_bytes(bytes);
        REQUIRE(back == s);
        REQUIRE(to_bytes(back) == bytes);
        // file order preserved
        auto a = s.begin();
        for (const auto& [name, t] : back) CHECK(name == (a++)->first);
    }
}

TEST_CASE("corrupted magic") {
    WeightStore s;
    s.insert("a", Tensor::vector({1.0f}));
    auto bytes = to_bytes(s);
    bytes[0] ^= 0xFF;
    try {
        read_weights_bytes(bytes);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()) == "bad magic");
    }
}

TEST_CASE("every truncation is reported") {
    WeightStore s;
    s.insert("conv.weight", Tensor::filled({2, 3, 1, 1}, 0.5f));
    s.insert("conv.bias", Tensor::vector({1.0f, 2.0f}));
    const auto bytes = to_bytes(s);
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
        const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(cut));
        CHECK_THROWS_AS(read_weights_bytes(part), FormatError);
    }
    const std::vector<std::uint8_t> mid(bytes.begin(), bytes.end() - 3);
    try {
        read_weights_bytes(mid);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()) == "truncated");
    }
}

TEST_CASE("unknown version and dtype") {
    WeightStore s;
    s.insert("x", Tensor::vector({1.0f}));
    auto bytes = to_bytes(s);
    auto v = bytes;
    v[4] = 2;
    CHECK_THROWS_AS(read_weights_bytes(v), FormatError);
    auto d = bytes;
    d[4 + 1 + 4 + 2 + 1] = 7;  // dtype byte after the one-letter name
    CHECK_THROWS_AS(read_weights_bytes(d), FormatError);
}

TEST_CASE("huge declared extents fail cleanly") {
    std::vector<std::uint8_t> b = {'T', 'K', 'W', 'S', 1, 1, 0, 0, 0, 1, 0, 'x', 0, 2};
    for (int i = 0; i < 16; ++i) b.push_back(0xFF);
    CHECK_THROWS_AS(read_weights_bytes(b), FormatError);
}

TEST_CASE("random byte flips never crash") {
    std::mt19937_64 rng(12);
    WeightStore s;
    s.insert("layer.weight", oracle::random_tensor({3, 4}, rng));
    s.insert("layer.bias", oracle::random_tensor({3}, rng));
    const auto bytes = to_bytes(s);
    std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
    std::uniform_int_distribution<int> val(0, 255);
    for (int trial = 0; trial < 2000; ++trial) {
        auto b = bytes;
        for (int k = 0; k < 3; ++k) b[pos(rng)] = static_cast<std::uint8_t>(val(rng));
        try {
            (void)read_weights_bytes(b);
        } catch (const FormatError&) {
        }
    }
}

TEST_CASE("duplicate names") {
    WeightStore s;
    s.insert("a", Tensor::vector({1.0f}));
    CHECK_THROWS_AS(s.insert("a", Tensor::vector({2.0f})), UsageError);
    s.set("a", Tensor::vector({3.0f}));
    CHECK(s.at("a")[0] == 3.0f);
    CHECK_THROWS_AS(s.at("b"), MissingWeightError);
}

TEST_CASE("raw tensor round trip") {
    std::mt19937_64 rng(13);
    const Tensor t = oracle::random_tensor({3, 5, 7}, rng);
    std::ostringstream out;
    write_raw_tensor(t, out);
    const std::string str = out.str();
    const std::vector<std::uint8_t> bytes(str.begin(), str.end());
    CHECK(std::memcmp(bytes.data(), "TKRT", 4) == 0);
    CHECK(bytes.size() == 4 + 2 + 2 + 3 * 8 + t.size() * 4);
    CHECK(read_raw_tensor_bytes(bytes) == t);
    auto bad = bytes;
    bad[2] = 'X';
    CHECK_THROWS_AS(read_raw_tensor_bytes(bad), FormatError);
}

TEST_CASE("file helpers") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = dir / "oralnet_test_weight_io.tkws";
    WeightStore s;
    s.insert("k", Tensor::filled({2, 2}, 4.0f));
    write_weights_file(s, path);
    CHECK(read_weights_file(path) == s);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_weights_file(dir / "oralnet_no_such_file.tkws"), IoError);
}

TEST_CASE("committed fixtures parse") {
    const std::filesystem::path dir = ORALNET_FIXTURE_DIR;
    for (int i = 0; i < 5; ++i) {
        const Tensor t = read_raw_tensor_file(dir / ("input_" + std::to_string(i) + ".tkrt"));
        CHECK(t.shape() == Tensor::Shape{3, 224, 224});
    }
    for (const char* name : {"resnet34_reference.tkws", "mobilenet_v3_small_reference.tkws"}) {
        const WeightStore s = read_weights_file(dir / name);
        CHECK(s.at("features").shape() == Tensor::Shape{5, 1000});
        CHECK(s.at("logits").shape() == Tensor::Shape{5, 2});
    }
}
