// SPDX-License-Identifier: Apache-2.0
//
// cesim: constant-envelope multi-user MIMO downlink precoding simulator
// Copyright (C) 2026 The cesim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <cesim/oracle.hpp>
#include <cesim/rate.hpp>
#include <cesim/selfcheck.hpp>

#include <gtest/gtest.h>

using namespace cesim;

namespace {

// Per-user ergodic rates on the seed-3 N=32, M=4, L=4, T=32 setup with
// C=10 channels, F=200 frames, E'=1, at 0 dB and 10 dB.
// At 0 dB with E'=1 the bound sits under the clamp: log2 det(cov + I) > 0.
constexpr double kRateAt0dB = 0.0;
constexpr double kRateAt10dB = 3.2689746118465828;

double min_eigenvalue(const HermitianMatrix &m) {
    return Eigen::SelfAdjointEigenSolver<HermitianMatrix>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

} // namespace

TEST(MuiCovariance, SingleFrameIsOuterProduct) {
    const Dimensions d{6, 2, 2, 5};
    const auto H = sample_channel(d, {4, 4});
    const std::vector<double> energies{0.7, 1.3};
    const PrecoderConfig pc{0.5};
    const auto cov = estimate_mui_covariance(H, energies, 1, pc, 77, 3);

    auto U = sample_symbols(d, derive_seed(77, StreamKind::symbols, 3, 0));
    U.set_energies(energies);
    const auto result = solve(H, U, pc);
    for (std::size_t k = 0; k < 2; ++k)
        for (Eigen::Index a = 0; a < 5; ++a)
            for (Eigen::Index b = 0; b < 5; ++b) {
                const cplx expected = result.state(k, a) * std::conj(result.state(k, b));
                EXPECT_LT(std::abs(cov.per_user[k](a, b) - expected), 1e-14 * std::max(1.0, std::abs(expected)));
            }
}

TEST(MuiCovariance, HermitianAndPositiveSemidefinite) {
    const Dimensions d{8, 3, 3, 12};
    const auto H = sample_channel(d, {5, 5});
    const auto cov = estimate_mui_covariance(H, {1.0, 1.0, 1.0}, 30, {0.25}, 5, 0);
    ASSERT_EQ(cov.per_user.size(), 3u);
    EXPECT_EQ(cov.block_length(), 12u);
    for (const auto &m : cov.per_user) {
        EXPECT_LE((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-12 * m.cwiseAbs().maxCoeff());
        EXPECT_GE(min_eigenvalue(m), -1e-10);
    }
}

TEST(MuiCovariance, VanishesWhenTheTargetIsReachable) {
    const Dimensions d{64, 1, 1, 8};
    const auto H = sample_channel(d, {6, 6});
    const double energy = 1e-3;
    const auto cov = estimate_mui_covariance(H, {energy}, 20, {1.0}, 6, 0);
    EXPECT_LT(cov.per_user[0].trace().real() / 8.0, 1e-2 * energy);
}

TEST(MuiCovariance, ConvergesWithFrames) {
    // E' near the rate-optimal range. Far above it the solver saturates on
    // a few frames and the MUI gets heavy tails, which slows convergence.
    const Dimensions d{8, 2, 2, 4};
    const auto H = sample_channel(d, {7, 7});
    const auto small = estimate_mui_covariance(H, {0.5, 0.5}, 1000, {0.5}, 7, 0);
    const auto large = estimate_mui_covariance(H, {0.5, 0.5}, 4000, {0.5}, 7, 1);
    for (std::size_t k = 0; k < 2; ++k)
        EXPECT_LT((small.per_user[k] - large.per_user[k]).norm(), 0.05 * large.per_user[k].norm());
}

TEST(RateLowerBound, IdentityCases) {
    const HermitianMatrix zero = HermitianMatrix::Zero(3, 3);
    EXPECT_EQ(rate_lower_bound(1.0, zero, 1.0), 0.0);
    EXPECT_NEAR(rate_lower_bound(1.0, zero, 4.0), 2.0, 1e-15);
    // Zero interference: log2(E snr) in closed form.
    EXPECT_NEAR(rate_lower_bound(3.0, zero, 50.0), std::log2(150.0), 1e-14);
}

TEST(RateLowerBound, MatchesCofactorExpansion) {
    check::InstanceGenerator gen(30);
    for (int n = 0; n < 200; ++n) {
        const auto cov = gen.psd(4);
        const double snr = std::pow(10.0, gen.uniform(-1.0, 3.0));
        const double energy = std::pow(10.0, gen.uniform(0.0, 3.0));
        const double expected = oracle::rate_bound(energy, cov, snr);
        EXPECT_NEAR(rate_lower_bound(energy, cov, snr), expected, 1e-9 * std::max(expected, 1.0));
        EXPECT_NEAR(rate_from_spectrum(energy, covariance_spectrum(cov), snr), expected, 1e-9 * std::max(expected, 1.0));
    }
}

TEST(RateLowerBound, Errors) {
    HermitianMatrix cov = HermitianMatrix::Identity(2, 2);
    EXPECT_THROW((void)rate_lower_bound(0.0, cov, 1.0), std::invalid_argument);
    EXPECT_THROW((void)rate_lower_bound(1.0, cov, 0.0), std::invalid_argument);
    EXPECT_THROW((void)rate_lower_bound(1.0, HermitianMatrix(2, 3), 1.0), std::invalid_argument);
    cov(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW((void)rate_lower_bound(1.0, cov, 1.0), std::domain_error);
    cov(0, 0) = -5.0;
    EXPECT_THROW((void)rate_lower_bound(1.0, cov, 1.0), std::domain_error);
}

TEST(ErgodicRate, VanishesAtLowSnr) {
    EXPECT_EQ(per_user_ergodic_rate({4, 2, 2, 4}, {1.0}, 1e-6, 1.0, {.num_channels = 3}, 1), 0.0);
}

TEST(ErgodicRate, NonDecreasingInSnr) {
    ErgodicRateEvaluator eval({8, 2, 2, 8}, {0.5}, 5, 64, 2);
    const double a = eval.rate(2.0, db_to_linear(0.0));
    const double b = eval.rate(2.0, db_to_linear(10.0));
    const double c = eval.rate(2.0, db_to_linear(20.0));
    EXPECT_LE(a, b);
    EXPECT_LE(b, c);
    EXPECT_EQ(eval.distinct_energies(), 1u);
}

TEST(ErgodicRate, RayleighRegression) {
    ErgodicRateEvaluator eval({32, 4, 4, 32}, {1.0}, 10, 200, 3);
    const double low = eval.rate(1.0, db_to_linear(0.0));
    const double high = eval.rate(1.0, db_to_linear(10.0));
    EXPECT_GT(high, low);
    EXPECT_NEAR(low, kRateAt0dB, 1e-9);
    EXPECT_NEAR(high, kRateAt10dB, 1e-9);
}

TEST(ErgodicRate, FreeFunctionMatchesEvaluator) {
    const Dimensions d{6, 2, 2, 6};
    const RateConfig rc{.snr = 10.0, .frames_per_channel = 40, .num_channels = 4};
    ErgodicRateEvaluator eval(d, {0.5}, 4, 40, 11);
    EXPECT_EQ(per_user_ergodic_rate(d, {0.5}, 10.0, 1.5, rc, 11), eval.rate(1.5, 10.0));
}

TEST(ErgodicRate, IndependentOfThreadCount) {
    const Dimensions d{6, 2, 2, 6};
    ErgodicRateEvaluator one(d, {0.25}, 7, 30, 12, 1);
    ErgodicRateEvaluator three(d, {0.25}, 7, 30, 12, 3);
    EXPECT_EQ(one.rate(0.8, 5.0), three.rate(0.8, 5.0));
}

TEST(RateConfig, DefaultFrames) {
    EXPECT_EQ(RateConfig{}.frames(16), 200u);
    EXPECT_EQ(RateConfig{}.frames(64), 256u);
    EXPECT_EQ(RateConfig{.frames_per_channel = 7}.frames(64), 7u);
    EXPECT_THROW((RateConfig{.snr = -1.0}.validate()), std::invalid_argument);
    EXPECT_THROW((RateConfig{.num_channels = 0}.validate()), std::invalid_argument);
}

TEST(Decibels, RoundTrip) {
    EXPECT_DOUBLE_EQ(db_to_linear(10.0), 10.0);
    EXPECT_DOUBLE_EQ(linear_to_db(100.0), 20.0);
    EXPECT_NEAR(linear_to_db(db_to_linear(-3.7)), -3.7, 1e-12);
}

TEST(EnergySearch, GridEndpoints) {
    const auto g = EnergySearch{}.grid();
    ASSERT_EQ(g.size(), 24u);
    EXPECT_NEAR(g.front(), 1e-2, 1e-15);
    EXPECT_NEAR(g.back(), 1e2, 1e-12);
    EXPECT_THROW((EnergySearch{.grid_points = 1}.validate()), std::invalid_argument);
}

TEST(OptimizeEnergy, BeatsGridNeighbours) {
    ErgodicRateEvaluator eval({8, 2, 2, 8}, {0.5}, 4, 64, 13);
    const double snr = db_to_linear(10.0);
    const auto best = optimize_symbol_energy(eval, snr);
    EXPECT_GE(best.rate, eval.rate(best.bracket_low, snr));
    EXPECT_GE(best.rate, eval.rate(best.bracket_high, snr));
    EXPECT_GE(best.energy, best.bracket_low);
    EXPECT_LE(best.energy, best.bracket_high);
    EXPECT_NEAR(eval.rate(1e-2, snr), 0.0, 1e-12);
}

TEST(OptimizeEnergy, CoarseBracketHoldsDenseOptimum) {
    ErgodicRateEvaluator eval({4, 2, 1, 2}, {0.5}, 4, 50, 14);
    const double snr = db_to_linear(10.0);
    const auto coarse = optimize_symbol_energy(eval, snr, {.grid_points = 6});
    const auto dense_grid = EnergySearch{.grid_points = 200}.grid();
    double best = -1.0, arg = 0.0;
    for (double e : dense_grid)
        if (const double r = eval.rate(e, snr); r > best) {
            best = r;
            arg = e;
        }
    EXPECT_GE(arg, coarse.bracket_low);
    EXPECT_LE(arg, coarse.bracket_high);
    EXPECT_GE(coarse.rate, best - 1e-3);
}

TEST(MinPower, InfeasibleTarget) {
    ErgodicRateEvaluator eval({4, 2, 2, 4}, {0.5}, 3, 32, 15);
    const auto r = min_power_for_rate(eval, 50.0);
    EXPECT_FALSE(r.feasible());
    EXPECT_FALSE(r.diagnostics.empty());
}

TEST(MinPower, BisectionContract) {
    ErgodicRateEvaluator eval({8, 2, 2, 8}, {0.5}, 4, 64, 16);
    const EnergySearch search{.grid_points = 8};
    const auto r = min_power_for_rate(eval, 1.0, search);
    ASSERT_TRUE(r.feasible());
    const double above = optimize_symbol_energy(eval, db_to_linear(*r.snr_db + 0.1), search).rate;
    const double below = optimize_symbol_energy(eval, db_to_linear(*r.snr_db - 0.1), search).rate;
    EXPECT_GE(above, 1.0);
    EXPECT_LE(below, 1.0);
}

TEST(MinPower, TargetMetAtBracketBottom) {
    ErgodicRateEvaluator eval({8, 1, 1, 4}, {1.0}, 3, 32, 17);
    const auto r = min_power_for_rate(eval, 1e-3, {.grid_points = 6}, {.low_db = 10.0, .high_db = 20.0});
    ASSERT_TRUE(r.feasible());
    EXPECT_EQ(*r.snr_db, 10.0);
    EXPECT_FALSE(r.diagnostics.empty());
}

TEST(MinPower, RejectsBadArguments) {
    ErgodicRateEvaluator eval({4, 2, 2, 4}, {0.5}, 2, 8, 18);
    EXPECT_THROW((void)min_power_for_rate(eval, 0.0), std::invalid_argument);
    EXPECT_THROW((void)min_power_for_rate(eval, 1.0, {}, {.low_db = 5.0, .high_db = 5.0}), std::invalid_argument);
}

TEST(MinPowerOverEnergy, AgreesWithBisection) {
    const Dimensions d{8, 2, 2, 8};
    const EnergySearch search{.grid_points = 8};
    ErgodicRateEvaluator a(d, {0.5}, 4, 64, 16), b(d, {0.5}, 4, 64, 16);
    const auto inner = min_power_for_rate(a, 1.0, search);
    const auto outer = min_power_over_energy(b, 1.0, search);
    ASSERT_TRUE(inner.feasible());
    ASSERT_TRUE(outer.feasible());
    // The bisection stops on a 0.1 dB interval around the same point.
    EXPECT_NEAR(*outer.snr_db, *inner.snr_db, 0.1);
    EXPECT_LT(b.distinct_energies(), a.distinct_energies());
}

TEST(MinPowerOverEnergy, BisectionContract) {
    ErgodicRateEvaluator eval({8, 2, 2, 8}, {0.5}, 4, 64, 16);
    const EnergySearch search{.grid_points = 8};
    const auto r = min_power_over_energy(eval, 1.0, search);
    ASSERT_TRUE(r.feasible());
    EXPECT_NEAR(r.rate, 1.0, 1e-4);
    const double above = optimize_symbol_energy(eval, db_to_linear(*r.snr_db + 0.1), search).rate;
    const double below = optimize_symbol_energy(eval, db_to_linear(*r.snr_db - 0.1), search).rate;
    EXPECT_GE(above, 1.0);
    EXPECT_LE(below, 1.0);
}

TEST(MinPowerOverEnergy, BracketEdges) {
    ErgodicRateEvaluator eval({4, 2, 2, 4}, {0.5}, 3, 32, 15);
    const auto none = min_power_over_energy(eval, 50.0);
    EXPECT_FALSE(none.feasible());
    ASSERT_FALSE(none.diagnostics.empty());
    EXPECT_EQ(none.diagnostics.front(), "target rate not reached at the top of the snr bracket");

    ErgodicRateEvaluator easy({8, 1, 1, 4}, {1.0}, 3, 32, 17);
    const auto low = min_power_over_energy(easy, 1e-3, {.grid_points = 6}, {.low_db = 10.0, .high_db = 20.0});
    ASSERT_TRUE(low.feasible());
    EXPECT_EQ(*low.snr_db, 10.0);
    EXPECT_FALSE(low.diagnostics.empty());
    EXPECT_THROW((void)min_power_over_energy(eval, 0.0), std::invalid_argument);
}
