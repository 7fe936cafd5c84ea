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

#include <cesim/model.hpp>
#include <cesim/oracle.hpp>
#include <cesim/selfcheck.hpp>
#include <cesim/solver.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace cesim;

namespace {

ChannelRealization zero_channel(const Dimensions &d) { return ChannelRealization(d); }

SymbolFrame random_symbols(const Dimensions &d, std::uint64_t seed) {
    return sample_symbols(d, derive_seed(seed, StreamKind::custom, 7));
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST(Dimensions, RejectsZeroSizes) {
    EXPECT_THROW((Dimensions{0, 1, 1, 1}.validate()), std::invalid_argument);
    EXPECT_THROW((Dimensions{1, 1, 1, 0}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((Dimensions{2, 1, 3, 4}.validate()));
}

TEST(Dimensions, FewerAntennasThanUsersIsAllowed) {
    const Dimensions d{2, 5, 1, 1};
    EXPECT_NO_THROW(d.validate());
    EXPECT_TRUE(d.underdetermined());
    EXPECT_EQ((Dimensions{4, 3, 5, 8}.history_length()), 4u);
}

TEST(ChannelRealization, ValidatesShapeAndValues) {
    const Dimensions d{2, 2, 2, 3};
    EXPECT_THROW(ChannelRealization(d, std::vector<cplx>(7)), std::invalid_argument);
    std::vector<cplx> taps(8);
    taps[3] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    EXPECT_THROW(ChannelRealization(d, taps), std::invalid_argument);
    taps[3] = cplx(1.0, 2.0);
    const ChannelRealization H(d, taps);
    // [k][i][l]: k=0, i=1, l=1 is flat index 3.
    EXPECT_EQ(H(0, 1, 1), cplx(1.0, 2.0));
    EXPECT_EQ(H.link(0, 1)[1], cplx(1.0, 2.0));
}

TEST(SymbolFrame, RejectsNegativeEnergy) {
    EXPECT_THROW(SymbolFrame(2, 2, std::vector<cplx>(4), {1.0, -0.5}), std::invalid_argument);
    SymbolFrame U(2, 2);
    EXPECT_THROW(U.set_energies({1.0}), std::invalid_argument);
    U.symbol(1, 0) = cplx(0.0, 1.0);
    U.set_energies({1.0, 4.0});
    EXPECT_EQ(U.target(1, 0), cplx(0.0, 2.0));
}

TEST(PhaseSchedule, HistoryAddressing) {
    // N=2, T=3, L=3: history columns are times -2, -1.
    const PhaseSchedule theta(2, 3, 2, {0.1, 0.2, 0.3, 1.1, 1.2, 1.3}, {-0.2, -0.1, 0.8, 0.9});
    EXPECT_DOUBLE_EQ(theta.angle(0, -1), -0.1);
    EXPECT_DOUBLE_EQ(theta.angle(0, -2), -0.2);
    EXPECT_DOUBLE_EQ(theta.angle(1, -1), 0.9);
    EXPECT_DOUBLE_EQ(theta.angle(1, 2), 1.3);
    EXPECT_DOUBLE_EQ(theta.previous_angle(1, 0), 0.9);
    EXPECT_THROW((void)theta.angle(0, -3), std::out_of_range);
    // Largest step is history to t=0: 0.1 - (-0.1) and 1.1 - 0.9.
    EXPECT_NEAR(theta.max_increment(), 0.2, 1e-15);
    EXPECT_TRUE(theta.feasible(0.2 / std::numbers::pi + 1e-15));
    EXPECT_FALSE(theta.feasible(0.19 / std::numbers::pi));
}

TEST(PhaseSchedule, RejectsBadShapes) {
    EXPECT_THROW(PhaseSchedule(2, 3, 1, std::vector<double>(5), std::vector<double>(2)), std::invalid_argument);
    EXPECT_THROW(PhaseSchedule(2, 3, 1, std::vector<double>(6), std::vector<double>(3)), std::invalid_argument);
    EXPECT_THROW(PhaseSchedule(1, 1, 0, {std::numeric_limits<double>::infinity()}, {}), std::invalid_argument);
}

TEST(PrecoderConfig, AlphaRange) {
    EXPECT_THROW((PrecoderConfig{0.0}.validate()), std::invalid_argument);
    EXPECT_THROW((PrecoderConfig{1.5}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((PrecoderConfig{1.0}.validate()));
    EXPECT_NO_THROW((PrecoderConfig{1e-9}.validate()));
}

TEST(NoiselessRx, ZeroChannel) {
    const Dimensions d{3, 2, 2, 4};
    check::InstanceGenerator gen(1);
    const auto inst = gen.make(d, 1.0, false);
    for (std::size_t t = 0; t < d.block_length; ++t)
        EXPECT_EQ(noiseless_rx(zero_channel(d), inst.theta, 1, t), cplx(0.0, 0.0));
}

TEST(NoiselessRx, SingleLinkIsThePhasor) {
    const Dimensions d{1, 1, 1, 2};
    const ChannelRealization H(d, {cplx(1.0, 0.0)});
    const PhaseSchedule theta(1, 2, 0, {0.4, -2.5}, {});
    EXPECT_LT(std::abs(noiseless_rx(H, theta, 0, 1) - std::polar(1.0, -2.5)), 1e-15);
}

TEST(NoiselessRx, MatchesConvolutionOracle) {
    check::InstanceGenerator gen(2);
    for (int n = 0; n < 50; ++n) {
        const auto inst = gen.make({3, 2, 2, 5}, 1.0, false);
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t t = 0; t < 5; ++t)
                EXPECT_LT(rel(noiseless_rx(inst.H, inst.theta, k, t), oracle::received(inst.H, inst.theta, k, t)),
                          1e-12);
    }
}

TEST(NoiselessRx, IndexChecks) {
    check::InstanceGenerator gen(3);
    const auto inst = gen.make({2, 2, 2, 3}, 1.0);
    EXPECT_THROW((void)noiseless_rx(inst.H, inst.theta, 2, 0), std::out_of_range);
    EXPECT_THROW((void)noiseless_rx(inst.H, inst.theta, 0, 3), std::out_of_range);
    const PhaseSchedule wrong(2, 4, 1);
    EXPECT_THROW((void)noiseless_rx(inst.H, wrong, 0, 0), std::invalid_argument);
}

TEST(NoiselessRx, InvariantUnderFullTurns) {
    check::InstanceGenerator gen(4);
    const auto inst = gen.make({4, 2, 3, 6}, 1.0, false);
    std::vector<double> angles(inst.theta.angles().begin(), inst.theta.angles().end());
    std::vector<double> history(inst.theta.history().begin(), inst.theta.history().end());
    for (std::size_t j = 0; j < angles.size(); ++j)
        angles[j] += 2.0 * std::numbers::pi * static_cast<double>(static_cast<int>(j % 5) - 2);
    for (auto &h : history)
        h -= 4.0 * std::numbers::pi;
    const PhaseSchedule turned(4, 6, 2, angles, history);
    for (std::size_t t = 0; t < 6; ++t)
        EXPECT_LT(std::abs(noiseless_rx(inst.H, inst.theta, 1, t) - noiseless_rx(inst.H, turned, 1, t)), 1e-12);
}

TEST(Mui, ZeroChannelGivesNegativeSymbol) {
    const Dimensions d{2, 3, 1, 4};
    const auto U = random_symbols(d, 5);
    const PhaseSchedule theta(2, 4, 0);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t t = 0; t < 4; ++t)
            EXPECT_EQ(mui(zero_channel(d), theta, U, k, t), -U.symbol(k, t));
}

TEST(Mui, ExactFitIsZero) {
    const Dimensions d{1, 1, 1, 1};
    const ChannelRealization H(d, {cplx(1.0, 0.0)});
    SymbolFrame U(1, 1, {std::polar(1.0, 0.7)}, {1.0});
    const PhaseSchedule theta(1, 1, 0, {0.7}, {});
    EXPECT_LT(std::abs(mui(H, theta, U, 0, 0)), 1e-15);
    EXPECT_LT(objective(H, theta, U), 1e-30);
}

TEST(Mui, EqualsSolverResidualsAfterSolve) {
    check::InstanceGenerator gen(6);
    for (int n = 0; n < 20; ++n) {
        const Dimensions d = gen.dims(8, 3, 3, 6);
        const auto inst = gen.make(d, 1.0);
        const auto result = solve(inst.H, inst.U, {gen.alpha()});
        for (std::size_t k = 0; k < d.num_users; ++k)
            for (std::size_t t = 0; t < d.block_length; ++t) {
                const cplx direct = mui(inst.H, result.schedule, inst.U, k, t);
                EXPECT_LT(std::abs(result.state(k, t) - direct), 1e-9 * std::max(1.0, std::abs(direct)));
            }
    }
}

TEST(Objective, ZeroChannelIsSymbolEnergy) {
    const Dimensions d{3, 2, 2, 5};
    const auto U = random_symbols(d, 8);
    double expected = 0.0;
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t t = 0; t < 5; ++t)
            expected += std::norm(U.symbol(k, t));
    EXPECT_NEAR(objective(zero_channel(d), PhaseSchedule(3, 5, 1), U), expected, 1e-12 * expected);
}

TEST(Objective, MatchesNaiveSum) {
    check::InstanceGenerator gen(9);
    for (int n = 0; n < 50; ++n) {
        const auto inst = gen.make(gen.dims(6, 4, 4, 8), 1.0, false);
        const double f = objective(inst.H, inst.theta, inst.U);
        const double g = oracle::objective(inst.H, inst.theta, inst.U);
        EXPECT_GE(f, 0.0);
        EXPECT_NEAR(f, g, 1e-12 * g);
    }
}

TEST(Objective, InvariantUnderCommonRotation) {
    check::InstanceGenerator gen(10);
    const Dimensions d{5, 3, 2, 6};
    const auto inst = gen.make(d, 0.5);
    const cplx turn = std::polar(1.0, 1.234);
    std::vector<cplx> taps(inst.H.data().begin(), inst.H.data().end());
    for (auto &h : taps)
        h *= turn;
    SymbolFrame U = inst.U;
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t t = 0; t < 6; ++t)
            U.symbol(k, t) *= turn;
    const double f = objective(inst.H, inst.theta, inst.U);
    EXPECT_NEAR(objective(ChannelRealization(d, taps), inst.theta, U), f, 1e-12 * f);
}
