#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "twophoton/parallel.hpp"
#include "twophoton/rng.hpp"

using namespace twophoton;

// Published Philox4x32-10 known-answer vectors.
TEST(Philox, KnownAnswerZero)
{
    const auto out = philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u});
    EXPECT_EQ(out, (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes)
{
    const auto out = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi)
{
    const auto out = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, UsableAtCompileTime)
{
    constexpr auto out = philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u});
    static_assert(out[0] == 0x6627e8d5u);
}

TEST(PhiloxEngine, IdenticalStreamsReproduce)
{
    PhiloxEngine a(RngStream{42, 7}, 3), b(RngStream{42, 7}, 3);
    for (int i = 0; i < 1000; ++i)
        ASSERT_EQ(a(), b());
}

TEST(PhiloxEngine, SeedStreamAndLaneSeparateSequences)
{
    auto first = [](RngStream s, std::uint32_t lane) {
        PhiloxEngine e(s, lane);
        return std::vector<std::uint64_t>{e(), e(), e(), e()};
    };
    const auto base = first({1, 0}, 0);
    EXPECT_NE(base, first({2, 0}, 0));
    EXPECT_NE(base, first({1, 1}, 0));
    EXPECT_NE(base, first({1, 0}, 1));
}

TEST(PhiloxEngine, UniformInHalfOpenUnitInterval)
{
    PhiloxEngine e(RngStream{9, 0});
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = e.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngStream, SplitIsDeterministicAndDistinct)
{
    const RngStream root{5, 0};
    EXPECT_EQ(root.split(3), root.split(3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i)
        seen.insert(root.split(i).stream_index);
    EXPECT_EQ(seen.size(), 10000u);
    EXPECT_EQ(root.split(3).seed, root.seed);
    EXPECT_NE(root.split(3).split(1), root.split(1).split(3));
}

TEST(MonteCarlo, IndependentOfWorkerCount)
{
    auto run = [](unsigned workers) {
        return monte_carlo<2>(50000, RngStream{11, 4}, Execution{workers}, [](PhiloxEngine& e) {
            const double u = e.uniform();
            return std::array<double, 2>{u, u * u};
        });
    };
    const auto a = run(1), b = run(3), c = run(8);
    EXPECT_EQ(a.sum, b.sum);
    EXPECT_EQ(a.sum, c.sum);
    EXPECT_EQ(a.sum_sq, b.sum_sq);
    const auto [mean, se] = mean_and_stderr(a, 0);
    EXPECT_NEAR(mean, 0.5, 5.0 * se);
}

TEST(ParallelMap, PreservesIndexOrder)
{
    const auto v = parallel_map<std::size_t>(1000, Execution{4}, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < v.size(); ++i)
        ASSERT_EQ(v[i], i * i);
}

TEST(CompensatedSum, RecoversCancelledTerms)
{
    CompensatedSum s;
    s.add(1e16);
    s.add(1.0);
    s.add(-1e16);
    EXPECT_EQ(s.value(), 1.0);
}
