#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <blockuniv/rng.hpp>

using blockuniv::KeyedStream;
using blockuniv::StreamKey;

TEST(KeyedStream, SameKeySameSequence) {
    KeyedStream a(StreamKey(7).child(3).child(11));
    KeyedStream b(StreamKey(7).child(3).child(11));
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(KeyedStream, SiblingKeysDiffer) {
    std::set<std::uint64_t> firsts;
    for (std::uint64_t i = 0; i < 1000; ++i) firsts.insert(KeyedStream(StreamKey(1).child(i))());
    EXPECT_EQ(firsts.size(), 1000u);
    EXPECT_NE(StreamKey(1).child(2).value(), StreamKey(2).child(1).value());
}

TEST(KeyedStream, UniformAndNormalMoments) {
    KeyedStream rng(StreamKey(42));
    const int n = 200000;
    double su = 0, sz = 0, sz2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = rng.normal();
        sz += z;
        sz2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sz / n, 0.0, 0.01);
    EXPECT_NEAR(sz2 / n, 1.0, 0.015);
}

TEST(KeyedStream, BelowIsUniform) {
    KeyedStream rng(StreamKey(5));
    std::array<int, 6> counts{};
    const int n = 60000;
    for (int i = 0; i < n; ++i) {
        const auto k = rng.below(6);
        ASSERT_LT(k, 6u);
        ++counts[k];
    }
    for (int c : counts) EXPECT_NEAR(c, n / 6, 400);
}
