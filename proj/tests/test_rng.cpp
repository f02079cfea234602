#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "gfe/rng.hpp"
#include "gfe/stats.hpp"

using namespace gfe;

TEST_CASE("same seed and stream replay the same sequence") {
    Rng a(42, streams::trial(7));
    Rng b(42, streams::trial(7));
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("streams and seeds decorrelate") {
    Rng a(42, streams::trial(7));
    Rng b(42, streams::trial(8));
    Rng c(43, streams::trial(7));
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 64; ++i) {
        const std::uint64_t x = a.next_u64();
        same_ab += x == b.next_u64();
        same_ac += x == c.next_u64();
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);
}

TEST_CASE("block is a pure function of seed, stream, counter") {
    const auto x = Philox4x64::block(1, 2, 3);
    const auto y = Philox4x64::block(1, 2, 3);
    CHECK(x == y);
    CHECK(x != Philox4x64::block(1, 2, 4));
}

TEST_CASE("uniform ranges") {
    Rng rng(7, 0);
    for (int i = 0; i < 10'000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u <= 1.0);
        const double v = rng.uniform_co();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("below is bounded and roughly uniform") {
    Rng rng(11, 1);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50'000; ++i) {
        const std::uint64_t k = rng.below(5);
        REQUIRE(k < 5);
        ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - 10'000) < 500);
}

TEST_CASE("normal moments") {
    Rng rng(13, 2);
    Welford w;
    for (int i = 0; i < 200'000; ++i) w.add(rng.normal());
    CHECK(std::abs(w.mean()) < 0.01);
    CHECK(std::abs(w.variance() - 1.0) < 0.02);
}

TEST_CASE("exponential mean") {
    Rng rng(13, 3);
    Welford w;
    for (int i = 0; i < 100'000; ++i) w.add(rng.exponential());
    CHECK(std::abs(w.mean() - 1.0) < 0.02);
}

TEST_CASE("stream tags partition the purpose space") {
    CHECK(streams::trial(5) == ((1ull << 48) | 5));
    CHECK(streams::pilot(5) == ((2ull << 48) | 5));
    CHECK(streams::bootstrap(0) == (3ull << 48));
    CHECK(streams::inner(1) == ((4ull << 48) | 1));
    CHECK(streams::aux(2) == ((5ull << 48) | 2));
    std::set<std::uint64_t> distinct{streams::trial(9), streams::pilot(9), streams::bootstrap(9),
                                     streams::inner(9), streams::aux(9)};
    CHECK(distinct.size() == 5);
}

TEST_CASE("companion stream is a fresh involution") {
    const std::uint64_t s = streams::trial(123);
    CHECK(streams::companion(s) != s);
    CHECK(streams::companion(streams::companion(s)) == s);
    Rng a(5, s);
    Rng b(5, streams::companion(s));
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}
