#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fuzz_assure/flakiness.hpp"
#include "fuzz_assure/random.hpp"

using namespace fuzz_assure;

namespace {

std::vector<double> uniform_series(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform();
    }
    return v;
}

} // namespace

TEST(TurningPoint, MonotoneSeriesRejected) {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = static_cast<double>(i);
    }
    const auto r = turning_point_test(v, 0.05);
    EXPECT_EQ(r.t_count, 0u);
    EXPECT_TRUE(r.iid_rejected);
    EXPECT_NEAR(r.z_score, -15.6375236253, 1e-9);
    EXPECT_NEAR(r.expected, 2.0 * 98.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.variance, (1600.0 - 29.0) / 90.0, 1e-12);
}

TEST(TurningPoint, AlternatingSeriesRejected) {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = i % 2 == 0 ? 1.0 : 0.0;
    }
    const auto r = turning_point_test(v, 0.05);
    EXPECT_EQ(r.t_count, 98u);
    EXPECT_TRUE(r.iid_rejected);
    EXPECT_NEAR(r.z_score, 7.81876181263, 1e-9);
}

TEST(TurningPoint, TooShortAndDegenerate) {
    EXPECT_THROW(turning_point_test(std::vector<double>{1.0, 2.0}), SeriesTooShort);
    EXPECT_THROW(turning_point_test(std::vector<double>(50, 3.0)), DegenerateSeries);
    // Collapses to {1, 2}.
    EXPECT_THROW(turning_point_test(std::vector<double>{1, 1, 1, 2, 2}), DegenerateSeries);
    EXPECT_THROW(turning_point_test(std::vector<double>{1, 2, 3}, 0.0), PreconditionViolation);
}

TEST(TurningPoint, TiesCollapsed) {
    const std::vector<double> v = {1, 3, 3, 3, 1, 1, 2};
    const auto r = turning_point_test(v);
    // Collapsed: 1 3 1 2 -> turning points at 3 and 1.
    EXPECT_EQ(r.length, 4u);
    EXPECT_EQ(r.original_length, 7u);
    EXPECT_EQ(r.t_count, 2u);
    EXPECT_TRUE(r.ties_collapsed);
    EXPECT_TRUE(r.low_power);
}

TEST(TurningPoint, LowPowerFlag) {
    Rng rng(1);
    EXPECT_TRUE(turning_point_test(uniform_series(rng, 29)).low_power);
    EXPECT_FALSE(turning_point_test(uniform_series(rng, 30)).low_power);
}

TEST(TurningPoint, RankInvariantUnderCubing) {
    Rng rng(2);
    for (int i = 0; i < 500; ++i) {
        auto v = uniform_series(rng, 3 + rng.below(200));
        for (auto& x : v) {
            x = x * 2.0 - 1.0;
        }
        auto cubed = v;
        for (auto& x : cubed) {
            x = x * x * x;
        }
        ASSERT_EQ(turning_point_test(v).t_count, turning_point_test(cubed).t_count);
    }
}

TEST(TurningPoint, ReversalInvariant) {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        auto v = uniform_series(rng, 3 + rng.below(200));
        const auto forward = turning_point_test(v).t_count;
        std::reverse(v.begin(), v.end());
        ASSERT_EQ(turning_point_test(v).t_count, forward);
    }
}

TEST(TurningPoint, PValueMatchesHighPrecisionNormal) {
    // erfc(|z| / sqrt 2) to 20 digits (mpmath, 50-digit precision).
    const std::vector<std::pair<double, double>> grid = {
        {0.0, 1.0},
        {0.5, 0.61707507745197379272},
        {1.0, 0.31731050786291410283},
        {1.5, 0.13361440253771613201},
        {1.96, 0.049995790296440872426},
        {2.0, 0.045500263896358414401},
        {2.5, 0.012419330651552270334},
        {3.0, 0.0026997960632601890533},
        {4.0, 0.000063342483666239842508},
        {5.0, 5.7330314375838782335e-7},
        {6.0, 1.9731752900753962814e-9},
        {8.0, 1.2441921148543568247e-15},
        {15.6, 7.279412002973526147e-55},
    };
    for (const auto& [z, p] : grid) {
        EXPECT_NEAR(two_sided_normal_p(z), p, 1e-9) << z;
        EXPECT_NEAR(two_sided_normal_p(-z), p, 1e-9) << z;
    }
}

TEST(TurningPoint, Invariants) {
    Rng rng(4);
    for (int i = 0; i < 300; ++i) {
        const auto v = uniform_series(rng, 3 + rng.below(100));
        for (double alpha : {0.01, 0.05, 0.2}) {
            const auto r = turning_point_test(v, alpha);
            ASSERT_LE(r.t_count, r.length - 2);
            ASSERT_GE(r.p_value, 0.0);
            ASSERT_LE(r.p_value, 1.0);
            ASSERT_EQ(r.iid_rejected, r.p_value < alpha);
        }
    }
}

TEST(TurningPoint, CalibratedOnIidUniform) {
    Rng rng(2024);
    int rejected = 0;
    constexpr int kTrials = 1000;
    for (int i = 0; i < kTrials; ++i) {
        rejected += turning_point_test(uniform_series(rng, 1000), 0.05).iid_rejected;
    }
    const double rate = static_cast<double>(rejected) / kTrials;
    EXPECT_GE(rate, 0.03);
    EXPECT_LE(rate, 0.07);
}
