#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "trustwatch/trust_math.hpp"

using namespace trustwatch;

namespace {

std::vector<Observation> obs_of(std::initializer_list<double> ms) {
    std::vector<Observation> v;
    NodeId id = 1;
    for (double m : ms) v.push_back({id++, m, 1.0, 1.0});
    return v;
}

// Straight transcription of the distrust recurrence, without clamping.
double oracle_update(double t_old, double t_cert, double a, double b, double d) {
    const double distrust = a * (1.0 - t_old) + b * (1.0 - t_cert) - d;
    return 1.0 - distrust;
}

}  // namespace

TEST(ClassifyTrust, Bands) {
    EXPECT_EQ(classify_trust(0.3), TrustClass::Malicious);
    EXPECT_EQ(classify_trust(0.95), TrustClass::Trusted);
    EXPECT_EQ(classify_trust(0.4), TrustClass::Suspected);
    EXPECT_EQ(classify_trust(0.9), TrustClass::Suspected);
    EXPECT_EQ(classify_trust(0.0), TrustClass::Malicious);
    EXPECT_EQ(classify_trust(1.0), TrustClass::Trusted);
}

TEST(PartitionMajority, StrictSizeComparison) {
    const auto o = obs_of({0.1, 0.2, 0.3, 0.7, 0.9});
    const Partition p = partition_majority(o, 0.5);
    EXPECT_FALSE(p.majority_adverse);
    EXPECT_EQ(p.majority, (std::vector<NodeId>{1, 2, 3}));
    EXPECT_EQ(p.minority, (std::vector<NodeId>{4, 5}));
}

TEST(PartitionMajority, TieGoesToBenignSide) {
    const auto o = obs_of({0.1, 0.8, 0.2, 0.9});
    const Partition p = partition_majority(o, 0.5);
    EXPECT_FALSE(p.majority_adverse);
    EXPECT_EQ(p.majority, (std::vector<NodeId>{1, 3}));
}

TEST(PartitionMajority, SingleAdverse) {
    const auto o = obs_of({0.9});
    const Partition p = partition_majority(o, 0.5);
    EXPECT_TRUE(p.majority_adverse);
    EXPECT_EQ(p.majority, (std::vector<NodeId>{1}));
    EXPECT_TRUE(p.minority.empty());
}

TEST(PartitionMajority, EmptyThrows) {
    std::vector<Observation> none;
    try {
        partition_majority(none, 0.5);
        FAIL();
    } catch (const TrustMathError& e) {
        EXPECT_EQ(e.code(), TrustMathError::Code::EmptyObservationSet);
    }
}

TEST(PartitionMajority, ExhaustiveTieBreak) {
    // Every above/below labelling of up to six respondents.
    for (int n = 1; n <= 6; ++n) {
        for (int mask = 0; mask < (1 << n); ++mask) {
            std::vector<Observation> o;
            int adverse = 0;
            for (int i = 0; i < n; ++i) {
                const bool a = mask & (1 << i);
                adverse += a;
                o.push_back({NodeId(i + 1), a ? 0.75 : 0.25, 1.0, 1.0});
            }
            const Partition p = partition_majority(o, 0.5);
            const bool expect_adverse = adverse > n - adverse;
            EXPECT_EQ(p.majority_adverse, expect_adverse) << "n=" << n << " mask=" << mask;
            EXPECT_EQ(p.majority.size(), std::size_t(expect_adverse ? adverse : n - adverse));
            EXPECT_EQ(p.majority.size() + p.minority.size(), std::size_t(n));
        }
    }
}

TEST(GroupTrust, Examples) {
    EXPECT_DOUBLE_EQ(group_trust(obs_of({0, 0, 0}), 0.5).group_trust, 1.0);
    EXPECT_DOUBLE_EQ(group_trust(obs_of({1.0}), 0.5).group_trust, 0.0);
    EXPECT_NEAR(group_trust(obs_of({0.2, 0.4}), 0.5).group_trust, 0.7, 1e-12);
}

TEST(GroupTrust, MinorityIgnored) {
    // Majority {0.1, 0.3, 0.2}; the lone 1.0 is outvoted.
    EXPECT_NEAR(group_trust(obs_of({0.1, 1.0, 0.3, 0.2}), 0.5).group_trust, 0.8, 1e-12);
}

TEST(Alpha1, Examples) {
    EXPECT_DOUBLE_EQ(alpha1(std::vector<Observation>{{1, 0.0, 1.0, 1.0}}, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(alpha1(std::vector<Observation>{}, 1.0), 0.0);
    const std::vector<Observation> two{{1, 0.0, 1.0, 0.8}, {2, 0.0, 1.0, 0.6}};
    EXPECT_NEAR(alpha1(two, 2.0), 0.7, 1e-12);
}

TEST(Alpha1, NonPositiveWThrows) {
    try {
        alpha1(std::vector<Observation>{}, 0.0);
        FAIL();
    } catch (const TrustMathError& e) {
        EXPECT_EQ(e.code(), TrustMathError::Code::NonPositiveW);
    }
}

TEST(Alpha3, Idempotence) {
    EXPECT_EQ(alpha3(1), 1.0);
    EXPECT_EQ(alpha3(2), 0.0);
    EXPECT_EQ(alpha3(10), 0.0);
    EXPECT_THROW(alpha3(0), TrustMathError);
}

TEST(Beta, Examples) {
    EXPECT_DOUBLE_EQ(beta(1, 1, 1), 1.0);
    EXPECT_NEAR(beta(0.7, 0.5, 1), 0.35, 1e-12);
    EXPECT_DOUBLE_EQ(beta(0.7, 0.5, 0), 0.0);
    try {
        beta(1.2, 0.5, 1);
        FAIL();
    } catch (const TrustMathError& e) {
        EXPECT_EQ(e.code(), TrustMathError::Code::OutOfRangeFactor);
    }
}

TEST(UpdateTrust, Examples) {
    EXPECT_DOUBLE_EQ(update_trust(0.6, 0.123, 1.0, 0.0, 0.0), 0.6);
    EXPECT_DOUBLE_EQ(update_trust(0.9, 0.2, 0.0, 1.0, 0.0), 0.2);
    EXPECT_NEAR(update_trust(0.8, 0.4, 0.5, 0.35, 0.02), 0.71, 1e-12);
    EXPECT_NEAR(update_trust(0.8, 0.4, 0.5, 0.35, 0.02), oracle_update(0.8, 0.4, 0.5, 0.35, 0.02), 1e-12);
}

TEST(UpdateTrust, FirstAdverseCertificate) {
    const double b = beta(1.0, 0.8, alpha3(1));
    const double t = update_trust(1.0, 0.0, 0.6, b, 0.0);
    EXPECT_NEAR(t, 0.2, 1e-12);
    EXPECT_EQ(classify_trust(t), TrustClass::Malicious);
}

TEST(UpdateTrust, ClampsToUnitInterval) {
    EXPECT_EQ(update_trust(1.0, 1.0, 0.0, 0.0, 0.5), 1.0);
    EXPECT_EQ(update_trust(0.0, 0.0, 1.0, 1.0, 0.0), 0.0);
}

TEST(UpdateTrust, RandomAgainstOracle) {
    std::mt19937_64 g(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double t_old = u(g), t_cert = u(g), a = u(g), b = u(g), d = 0.05 * u(g);
        const double want = std::min(1.0, std::max(0.0, oracle_update(t_old, t_cert, a, b, d)));
        ASSERT_NEAR(update_trust(t_old, t_cert, a, b, d), want, 1e-12);
    }
}

TEST(Replenish, Examples) {
    EXPECT_DOUBLE_EQ(replenish(1.0, 0.01), 1.0);
    EXPECT_DOUBLE_EQ(replenish(0.5, 0.0), 0.5);
    EXPECT_NEAR(replenish(0.38, 0.05), 0.43, 1e-12);
    double t = 0.38;
    for (int i = 0; i < 10; ++i) t = replenish(t, 0.001);
    EXPECT_NEAR(t, 0.39, 1e-12);
}
