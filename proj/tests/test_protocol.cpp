#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "qfid/measures.hpp"
#include "qfid/protocol.hpp"

using namespace qfid;

namespace {

StrategyConfig config(StrategyKind kind, double eta, std::uint64_t rounds, std::uint64_t seed) {
    StrategyConfig c;
    c.kind = kind;
    c.eta = eta;
    c.rounds = rounds;
    c.seed = seed;
    return c;
}

ComplexMatrix singlet_pair_blocks() {
    const auto s = bell_psi_minus().matrix();
    return kron(s, s);
}

// Pr[pattern] from explicit click operators on the four-qubit state.
double click_oracle(const ComplexMatrix& sigma, BlockSetting a, BlockSetting b, StrategyKind kind, double eta,
                    bool click_a, bool click_b) {
    auto op = [&](BlockSetting s, bool click) {
        const oracle::Mat p = oracle::to_eigen(singlet_projector());
        const oracle::Mat id = oracle::Mat::Identity(4, 4);
        const oracle::Mat c = s == BlockSetting::singlet ? oracle::Mat(eta * eta * p)
                                                         : oracle::Mat(eta * eta * traits(kind).identity_coincidence * id);
        return click ? c : oracle::Mat(id - c);
    };
    return (oracle::kron(op(a, click_a), op(b, click_b)) * oracle::to_eigen(sigma)).trace().real();
}

}  // namespace

TEST(Gamma, HermitianSquaresToSixteen) {
    const auto g = gamma_operator();
    EXPECT_EQ(g, g.adjoint());
    EXPECT_LT(max_abs_diff(g * g, ComplexMatrix::identity(16) * cplx(16.0)), 1e-12);
    const auto eig = hermitian_eig(g);
    for (double l : eig.eigenvalues) EXPECT_NEAR(std::abs(l), 4.0, 1e-12);
}

TEST(Gamma, ExpectationIsFourTimesOverlap) {
    RandomStream rng(41, 0);
    const auto g = oracle::to_eigen(gamma_operator());
    for (int i = 0; i < 200; ++i) {
        const auto a = random_mixed(4, rng);
        const auto b = random_mixed(4, rng);
        const double lhs = (g * oracle::kron(oracle::to_eigen(a), oracle::to_eigen(b))).trace().real() / 4.0;
        EXPECT_NEAR(lhs, overlap1(a, b), 1e-12);
    }
}

TEST(ClickModel, SingletBlocksAlwaysCoincide) {
    const auto t = joint_click_distribution(singlet_pair_blocks(), BlockSetting::singlet, BlockSetting::singlet,
                                            StrategyKind::base_random_routing, 1.0);
    EXPECT_NEAR(t[3], 1.0, 1e-14);
}

TEST(ClickModel, MaximallyMixedQuarterPerBlock) {
    const auto m = maximally_mixed(4);
    const auto sigma = rearrange_pair(m, m);
    const auto t = joint_click_distribution(sigma, BlockSetting::singlet, BlockSetting::identity,
                                            StrategyKind::base_random_routing, 1.0);
    EXPECT_NEAR(t[1] + t[3], 0.25, 1e-14);  // block A (bit 0)
    EXPECT_NEAR(t[2] + t[3], 1.0, 1e-14);   // identity block always fires at eta = 1
}

TEST(ClickModel, EfficiencyScalesMarginals) {
    RandomStream rng(42, 0);
    const auto sigma = rearrange_pair(random_mixed(4, rng), random_mixed(4, rng));
    for (auto kind : kAllStrategies) {
        const auto full = joint_click_distribution(sigma, BlockSetting::singlet, BlockSetting::identity, kind, 1.0);
        const auto half = joint_click_distribution(sigma, BlockSetting::singlet, BlockSetting::identity, kind, 0.5);
        EXPECT_NEAR(half[1] + half[3], 0.25 * (full[1] + full[3]), 1e-14);
        EXPECT_NEAR(half[2] + half[3], 0.25 * (full[2] + full[3]), 1e-14);
        EXPECT_NEAR(full[2] + full[3], traits(kind).identity_coincidence, 1e-14);
    }
}

TEST(ClickModel, MatchesOperatorOracle) {
    RandomStream rng(43, 0);
    const auto sigma = rearrange_pair(random_mixed(4, rng), random_mixed(4, rng));
    for (auto kind : kAllStrategies)
        for (int sa = 0; sa < 2; ++sa)
            for (int sb = 0; sb < 2; ++sb) {
                const auto a = static_cast<BlockSetting>(sa), b = static_cast<BlockSetting>(sb);
                const auto t = joint_click_distribution(sigma, a, b, kind, 0.8);
                double total = 0.0;
                for (int pattern = 0; pattern < 4; ++pattern) {
                    EXPECT_NEAR(t[pattern], click_oracle(sigma, a, b, kind, 0.8, pattern & 1, pattern & 2), 1e-14);
                    total += t[pattern];
                }
                EXPECT_NEAR(total, 1.0, 1e-14);
            }
}

TEST(ClickModel, RejectsBadEfficiency) {
    const auto m = maximally_mixed(4);
    const auto sigma = rearrange_pair(m, m);
    EXPECT_THROW(joint_click_distribution(sigma, BlockSetting::singlet, BlockSetting::singlet,
                                          StrategyKind::base_random_routing, 0.0),
                 ValidationError);
    EXPECT_THROW(joint_click_distribution(sigma, BlockSetting::singlet, BlockSetting::singlet,
                                          StrategyKind::base_random_routing, 1.1),
                 ValidationError);
}

TEST(Strategies, SuccessProbabilities) {
    EXPECT_EQ(strategy_success_probability(StrategyKind::removable_bs), 1.0);
    EXPECT_EQ(strategy_success_probability(StrategyKind::mach_zehnder), 1.0);
    EXPECT_EQ(strategy_success_probability(StrategyKind::shifted_bs), 0.625);
    EXPECT_EQ(strategy_success_probability(StrategyKind::hom_overlap), 0.75);
}

TEST(Strategies, WeightsPreserveUnbiasedness) {
    for (auto kind : kAllStrategies) EXPECT_EQ(traits(kind).identity_coincidence * traits(kind).identity_weight, 2.0);
    EXPECT_EQ(parse_strategy("shifted-bs"), StrategyKind::shifted_bs);
    EXPECT_EQ(parse_strategy("base-random-routing"), StrategyKind::base_random_routing);
    EXPECT_THROW(parse_strategy("mirror"), ValidationError);
}

TEST(Plan, ExpectationEqualsOverlapExactly) {
    RandomStream rng(44, 0);
    for (int i = 0; i < 10; ++i) {
        const auto a = random_mixed(4, rng);
        const auto b = random_mixed(4, rng);
        for (auto kind : kAllStrategies)
            for (double eta : {1.0, 0.6}) EXPECT_NEAR(first_order_plan(a, b, kind, eta).expected_estimate(), overlap1(a, b), 1e-12);
    }
    const auto qa = random_mixed(2, rng);
    const auto qb = random_mixed(2, rng);
    EXPECT_NEAR(first_order_plan(qa, qb, StrategyKind::hom_overlap, 0.7).expected_estimate(), overlap1(qa, qb), 1e-12);
}

TEST(Estimate, IdenticalBellStates) {
    const auto phi = bell_phi_plus();
    const auto t = estimate_overlap(phi, phi, config(StrategyKind::base_random_routing, 1.0, 100000, 1));
    EXPECT_LE(std::abs(t.estimate - 1.0), 4.0 * t.stderr_);
    EXPECT_EQ(t.rounds, 100000u);
}

TEST(Estimate, ReferenceCountIsQuarterAtUnitEfficiency) {
    RandomStream rng(45, 0);
    const auto a = random_mixed(4, rng);
    const auto b = random_mixed(4, rng);
    const std::uint64_t k = 200000;
    const auto t = estimate_overlap(a, b, config(StrategyKind::base_random_routing, 1.0, k, 2));
    const double sigma = std::sqrt(k * 0.25 * 0.75);
    EXPECT_LE(std::abs(static_cast<double>(t.k0) - 0.25 * k), 4.0 * sigma);
}

TEST(Estimate, BaseOutcomeSupport) {
    RandomStream rng(46, 0);
    const auto t = estimate_overlap(random_mixed(4, rng), random_mixed(4, rng),
                                    config(StrategyKind::base_random_routing, 0.8, 50000, 3));
    std::set<std::int64_t> seen;
    for (const auto& [value, count] : t.histogram()) seen.insert(value);
    EXPECT_EQ(seen, (std::set<std::int64_t>{-8, 0, 4, 16}));
}

TEST(Estimate, RecomputableFromOutcomes) {
    RandomStream rng(47, 0);
    const auto t = estimate_overlap(random_mixed(4, rng), random_mixed(4, rng),
                                    config(StrategyKind::base_random_routing, 1.0, 20000, 4));
    double sum = 0.0;
    std::uint64_t k0 = 0;
    for (auto a : t.outcomes) {
        sum += a;
        k0 += a == 4;
    }
    EXPECT_EQ(k0, t.k0);
    EXPECT_NEAR(t.estimate, sum / (4.0 * static_cast<double>(k0)), 1e-15);
    const auto again = compute_estimate(t, Normalization::reference);
    EXPECT_EQ(again.estimate, t.estimate);
    EXPECT_EQ(again.stderr_, t.stderr_);
}

TEST(Estimate, CoverageOverSeeds) {
    RandomStream rng(48, 0);
    const auto a = random_mixed(4, rng);
    const auto b = random_mixed(4, rng);
    const double exact = overlap1(a, b);
    for (auto kind : kAllStrategies) {
        const auto plan = first_order_plan(a, b, kind, 1.0);
        int covered = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto t = run_rounds(plan, 10000, seed, Normalization::reference);
            covered += std::abs(t.estimate - exact) <= 4.0 * t.stderr_;
        }
        EXPECT_GE(covered, 99) << to_string(kind);
    }
}

TEST(Estimate, PerBucketNormalizationIsUnbiased) {
    RandomStream rng(49, 0);
    const auto a = random_mixed(4, rng);
    const auto b = random_mixed(4, rng);
    const double exact = overlap1(a, b);
    for (auto kind : {StrategyKind::base_random_routing, StrategyKind::shifted_bs, StrategyKind::hom_overlap}) {
        const auto plan = first_order_plan(a, b, kind, 0.8);
        double sum = 0.0, var = 0.0;
        constexpr int runs = 50;
        for (std::uint64_t seed = 0; seed < runs; ++seed) {
            const auto t = run_rounds(plan, 10000, seed, Normalization::per_bucket);
            sum += t.estimate;
            var += t.stderr_ * t.stderr_;
        }
        EXPECT_LE(std::abs(sum / runs - exact), 4.0 * std::sqrt(var) / runs) << to_string(kind);
    }
}

TEST(Estimate, StderrScalesAsInverseRoot) {
    RandomStream rng(50, 0);
    const auto a = random_mixed(4, rng);
    const auto b = random_mixed(4, rng);
    const auto small = estimate_overlap(a, b, config(StrategyKind::removable_bs, 1.0, 10000, 5));
    const auto large = estimate_overlap(a, b, config(StrategyKind::removable_bs, 1.0, 1000000, 6));
    const double ratio = small.stderr_ / large.stderr_;
    EXPECT_NEAR(ratio, 10.0, 2.0);
}

TEST(Estimate, EfficiencyCancels) {
    RandomStream rng(51, 0);
    const auto a = random_mixed(4, rng);
    const auto b = random_mixed(4, rng);
    const auto hi = estimate_overlap(a, b, config(StrategyKind::mach_zehnder, 1.0, 200000, 7));
    const auto lo = estimate_overlap(a, b, config(StrategyKind::mach_zehnder, 0.6, 200000, 8));
    EXPECT_LE(std::abs(hi.estimate - lo.estimate), 4.0 * std::hypot(hi.stderr_, lo.stderr_));
}

TEST(Estimate, ConclusiveFractionBounded) {
    RandomStream rng(52, 0);
    const auto a = random_mixed(4, rng);
    const auto b = random_mixed(4, rng);
    const std::uint64_t k = 100000;
    for (auto kind : kAllStrategies) {
        const double eta = 0.9;
        const auto t = estimate_overlap(a, b, config(kind, eta, k, 9));
        const double bound = strategy_success_probability(kind) * std::pow(eta, 4);
        const double sigma = std::sqrt(bound * (1 - bound) / k);
        EXPECT_LE(static_cast<double>(t.conclusive) / k, bound + 4 * sigma) << to_string(kind);
    }
}

TEST(Estimate, WorkerCountDoesNotChangeTally) {
    RandomStream rng(53, 0);
    const auto a = random_mixed(4, rng);
    const auto b = random_mixed(4, rng);
    auto c = config(StrategyKind::base_random_routing, 0.9, 300000, 10);
    const auto one = estimate_overlap(a, b, c);
    c.workers = 4;
    const auto four = estimate_overlap(a, b, c);
    EXPECT_EQ(one.outcomes, four.outcomes);
    EXPECT_EQ(one.estimate, four.estimate);
}

TEST(Estimate, QubitInputsUseOneBlock) {
    RandomStream rng(54, 0);
    const auto a = random_mixed(2, rng);
    const auto b = random_mixed(2, rng);
    const auto t = estimate_overlap(a, b, config(StrategyKind::base_random_routing, 1.0, 100000, 11));
    EXPECT_EQ(t.blocks, 1u);
    EXPECT_LE(std::abs(t.estimate - overlap1(a, b)), 4.0 * t.stderr_);
}

TEST(Estimate, InconclusiveRunCarriesTally) {
    const auto m = maximally_mixed(4);
    try {
        estimate_overlap(m, m, config(StrategyKind::base_random_routing, 0.01, 3, 12));
        FAIL() << "expected an inconclusive run";
    } catch (const InconclusiveRun& e) {
        EXPECT_EQ(e.tally().rounds, 3u);
        EXPECT_EQ(e.tally().k0, 0u);
    }
}

TEST(Estimate, RejectsInvalidConfig) {
    const auto m = maximally_mixed(4);
    EXPECT_THROW(estimate_overlap(m, m, config(StrategyKind::base_random_routing, 1.0, 0, 1)), ValidationError);
    EXPECT_THROW(estimate_overlap(m, m, config(StrategyKind::base_random_routing, 1.5, 10, 1)), ValidationError);
    EXPECT_THROW(estimate_overlap(m, maximally_mixed(2), config(StrategyKind::base_random_routing, 1.0, 10, 1)),
                 ValidationError);
}
