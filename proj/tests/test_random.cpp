#include <gtest/gtest.h>

#include <cmath>

#include "spinboost/random.hpp"

using namespace spinboost;

TEST(Philox, KnownAnswerVectors)
{
    // Random123 known-answer tests for philox4x32-10.
    auto const zero = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(zero, (Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    auto const ones = Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                                           {0xffffffff, 0xffffffff});
    EXPECT_EQ(ones, (Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    auto const pi = Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                                         {0xa4093822, 0x299f31d0});
    EXPECT_EQ(pi, (Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRng, DeterministicAndStreamSeparated)
{
    CounterRng const a(42, 0);
    CounterRng const b(42, 0);
    CounterRng const c(42, 1);
    for (std::uint64_t i = 0; i < 100; ++i)
    {
        EXPECT_EQ(a.normal_pair(i), b.normal_pair(i));
        EXPECT_NE(a.normal_pair(i), c.normal_pair(i));
    }
}

TEST(CounterRng, NormalMoments)
{
    CounterRng const rng(7, 3);
    double s1 = 0, s2 = 0, s4 = 0;
    int const n = 200000;
    for (int i = 0; i < n; ++i)
    {
        for (double z : rng.normal_pair(i))
        {
            s1 += z;
            s2 += z * z;
            s4 += z * z * z * z;
        }
    }
    double const m = 2.0 * n;
    EXPECT_NEAR(s1 / m, 0.0, 5 / std::sqrt(m));
    EXPECT_NEAR(s2 / m, 1.0, 5 * std::sqrt(2.0 / m));
    EXPECT_NEAR(s4 / m, 3.0, 5 * std::sqrt(96.0 / m));
}

TEST(CounterRng, UniformsInOpenInterval)
{
    CounterRng const rng(0, 0);
    for (std::uint64_t i = 0; i < 1000; ++i)
        for (double u : rng.uniform_pair(i))
        {
            EXPECT_GT(u, 0.0);
            EXPECT_LT(u, 1.0);
        }
}

TEST(DeriveSeed, DistinctChildren)
{
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(9, 4), derive_seed(9, 4));
}
