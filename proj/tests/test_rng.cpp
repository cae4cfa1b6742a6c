#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "vrmc/rng.hpp"

using vrmc::philox4x64;
using vrmc::RngStream;
using vrmc::StreamPurpose;

namespace {

struct BlockVector {
    std::array<std::uint64_t, 4> counter;
    std::array<std::uint64_t, 2> key;
    std::array<std::uint64_t, 4> expected;
};

// Known-answer vectors frozen from an independent Philox4x64-10
// implementation (tools/gen_philox_kat.py regenerates them).
const BlockVector kBlockVectors[] = {
    {{0, 0, 0, 0},
     {0, 0},
     {0x16554d9eca36314cull, 0xdb20fe9d672d0fdcull, 0xd7e772cee186176bull, 0x7e68b68aec7ba23bull}},
    {{0xffffffffffffffffull, 0xffffffffffffffffull, 0xffffffffffffffffull, 0xffffffffffffffffull},
     {0xffffffffffffffffull, 0xffffffffffffffffull},
     {0x87b092c3013fe90bull, 0x438c3c67be8d0224ull, 0x9cc7d7c69cd777b6ull, 0xa09caebf594f0ba0ull}},
    {{0x243f6a8885a308d3ull, 0x13198a2e03707344ull, 0xa4093822299f31d0ull, 0x082efa98ec4e6c89ull},
     {0x452821e638d01377ull, 0xbe5466cf34e90c6cull},
     {0xa528f45403e61d95ull, 0x38c72dbd566e9788ull, 0xa5a1610e72fd18b5ull, 0x57bd43b5e52b7fe6ull}},
    {{1, 0, 0, 0},
     {0, 0},
     {0x02f4ba6408e4d89bull, 0x3dd62b0b9ca8c5b2ull, 0x1c8667a55d902e79ull, 0x907d7a052fd5b4dcull}},
    {{7, 0, 3, 1},
     {0xdeadbeef12345678ull, 0},
     {0x5a7baf4733f91ecbull, 0x51c3b78ad7a95469ull, 0xa8c7e474ac0e8581ull, 0xf5286a100fca2549ull}},
    {{0x75bcd15ull, 0, 0x2aull, 2},
     {0x0123456789abcdefull, 0},
     {0x6b821da3390f13f7ull, 0xb9aeeb3de0924676ull, 0x6fcafa87aca8d4f1ull, 0x9bce3ba5a8f65644ull}},
};

struct StreamVector {
    std::uint64_t seed;
    std::uint64_t chain;
    StreamPurpose purpose;
    std::array<std::uint64_t, 4> expected;
};

const StreamVector kStreamVectors[] = {
    {0x9e3779b97f4a7c15ull,
     0,
     StreamPurpose::minibatch,
     {0xe5e5b6c0d61f1b1bull, 0x908add8686b1443aull, 0xf3c3d1e69e7d0a03ull, 0x32cbcb072d5e4cd1ull}},
    {0x9e3779b97f4a7c15ull,
     0,
     StreamPurpose::noise,
     {0x719476d317f178f8ull, 0x42fbc18df258022full, 0xb9a08afaf8fc50dcull, 0x16e7ddbee42256daull}},
    {42,
     3,
     StreamPurpose::noise,
     {0x116ab08a6633a73full, 0xec5fe7338e42cdceull, 0x724dab1216ee1b47ull, 0x792c6d0570e85802ull}},
    {0,
     0,
     StreamPurpose::minibatch,
     {0x16554d9eca36314cull, 0x02f4ba6408e4d89bull, 0x809bf322883987c3ull, 0x40fa86f0f781945dull}},
    {0xffffffffffffffffull,
     17,
     StreamPurpose::data_gen,
     {0x0fd53f7bf9959624ull, 0xdca1e2301da43e25ull, 0xbbf006991e3d6d32ull, 0x5a5d64f1e1a8608aull}},
};

}  // namespace

TEST_CASE("philox block function matches known-answer vectors") {
    for (const BlockVector& v : kBlockVectors) {
        const auto got = philox4x64(v.counter, v.key);
        for (int w = 0; w < 4; ++w) {
            CHECK(got[w] == v.expected[w]);
        }
    }
}

TEST_CASE("philox block function is pure") {
    const std::array<std::uint64_t, 4> ctr = {12, 0, 5, 1};
    const std::array<std::uint64_t, 2> key = {99, 0};
    CHECK(philox4x64(ctr, key) == philox4x64(ctr, key));
}

TEST_CASE("stream draws match known-answer vectors") {
    for (const StreamVector& v : kStreamVectors) {
        RngStream rng(v.seed, v.chain, v.purpose);
        for (int i = 0; i < 4; ++i) {
            CHECK(rng.next_u64() == v.expected[i]);
        }
        CHECK(rng.draws_consumed() == 4);
    }
}

TEST_CASE("identically constructed streams replay the same sequence") {
    RngStream a(777, 2, StreamPurpose::minibatch);
    RngStream b(777, 2, StreamPurpose::minibatch);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("streams with distinct seed, chain, or purpose diverge") {
    const auto first_words = [](RngStream rng) {
        std::vector<std::uint64_t> out;
        for (int i = 0; i < 8; ++i) {
            out.push_back(rng.next_u64());
        }
        return out;
    };
    const auto base = first_words(RngStream(42, 3, StreamPurpose::noise));
    CHECK(base != first_words(RngStream(43, 3, StreamPurpose::noise)));
    CHECK(base != first_words(RngStream(42, 4, StreamPurpose::noise)));
    CHECK(base != first_words(RngStream(42, 3, StreamPurpose::minibatch)));
    CHECK(base != first_words(RngStream(42, 3, StreamPurpose::data_gen)));
    CHECK(base != first_words(RngStream(42, 3, StreamPurpose::init)));
}

TEST_CASE("uniform01 matches its bit-level definition and stays in (0,1]") {
    RngStream rng(42, 3, StreamPurpose::noise);
    // First two draws of this stream, mapped by ((x >> 11) + 1) * 2^-53.
    CHECK(rng.uniform01() == doctest::Approx(0.068034204281686272).epsilon(1e-15));
    CHECK(rng.uniform01() == doctest::Approx(0.92333836563762905).epsilon(1e-15));

    RngStream wide(2024, 0, StreamPurpose::noise);
    for (int i = 0; i < 20000; ++i) {
        const double u = wide.uniform01();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("uniform01 sample mean sits in the 4-sigma band") {
    RngStream rng(5150, 0, StreamPurpose::noise);
    const int trials = 100000;
    double sum = 0.0;
    for (int i = 0; i < trials; ++i) {
        sum += rng.uniform01();
    }
    const double mean = sum / trials;
    const double se = std::sqrt(1.0 / 12.0 / trials);
    CHECK(std::fabs(mean - 0.5) < 4.0 * se);
}

TEST_CASE("gaussian matches the frozen first draw and consumes two uniforms") {
    RngStream rng(42, 3, StreamPurpose::noise);
    const double z = rng.gaussian();
    CHECK(z == doctest::Approx(2.0547059706762245).epsilon(1e-14));
    CHECK(rng.draws_consumed() == 2);
    rng.gaussian();
    CHECK(rng.draws_consumed() == 4);
}

TEST_CASE("gaussian draws have standard-normal moments within 4 sigma") {
    RngStream rng(31337, 1, StreamPurpose::noise);
    const int trials = 100000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < trials; ++i) {
        const double z = rng.gaussian();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / trials;
    const double var = sumsq / trials - mean * mean;
    CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(trials)));
    // Var of the sample variance of a normal is ~2/n.
    CHECK(std::fabs(var - 1.0) < 4.0 * std::sqrt(2.0 / trials));
}

TEST_CASE("uniform_below covers [0,bound) and rejects bound 0") {
    RngStream rng(606, 0, StreamPurpose::minibatch);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 3000; ++i) {
        const std::uint64_t v = rng.uniform_below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS_AS(rng.uniform_below(0), std::invalid_argument);
}

TEST_CASE("uniform_below with bound 1 returns 0 without consuming draws") {
    RngStream rng(11, 0, StreamPurpose::minibatch);
    const std::uint64_t before = rng.draws_consumed();
    CHECK(rng.uniform_below(1) == 0);
    CHECK(rng.draws_consumed() == before);
}

TEST_CASE("uniform_below is unbiased across a small range") {
    RngStream rng(404, 0, StreamPurpose::minibatch);
    const int trials = 60000;
    const std::uint64_t bound = 5;
    std::array<int, 5> counts = {0, 0, 0, 0, 0};
    for (int i = 0; i < trials; ++i) {
        ++counts[rng.uniform_below(bound)];
    }
    const double p = 1.0 / static_cast<double>(bound);
    const double sigma = std::sqrt(p * (1.0 - p) * trials);
    for (const int c : counts) {
        CHECK(std::fabs(c - p * trials) < 4.0 * sigma);
    }
}

TEST_CASE("stream accessors report the constructor arguments") {
    RngStream rng(1234, 9, StreamPurpose::data_gen);
    CHECK(rng.seed() == 1234);
    CHECK(rng.chain() == 9);
    CHECK(rng.purpose() == StreamPurpose::data_gen);
    CHECK(rng.draws_consumed() == 0);
}
