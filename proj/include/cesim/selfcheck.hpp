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

#ifndef CESIM_SELFCHECK_HPP
#define CESIM_SELFCHECK_HPP

#include "channel.hpp"
#include "oracle.hpp"
#include "rate.hpp"
#include "solver.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

// Oracle suites run by `ce-sim selfcheck`, plus the random problem
// generator shared with the test programs.

namespace cesim::check {

struct Instance {
    ChannelRealization H;
    SymbolFrame U;
    PhaseSchedule theta;
};

// Random problems. Channels and symbols come from the library's seeded
// streams; sizes, energies and angles from a local mt19937_64.
class InstanceGenerator {
  public:
    explicit InstanceGenerator(std::uint64_t seed) : rng_(seed), seed_(seed) {}

    std::mt19937_64 &engine() { return rng_; }

    std::size_t integer(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

    Dimensions dims(std::size_t max_n, std::size_t max_m, std::size_t max_l, std::size_t max_t) {
        return {integer(1, max_n), integer(1, max_m), integer(1, max_l), integer(1, max_t)};
    }

    // Alpha in (0, 1], with the end points and a few round values mixed in.
    double alpha() {
        static constexpr double special[] = {1.0, 0.5, 0.25, 0.1, 1e-3};
        if (integer(0, 3) == 0)
            return special[integer(0, std::size(special) - 1)];
        return uniform(1e-3, 1.0);
    }

    // With `feasible`, increments stay within alpha pi; otherwise angles
    // are arbitrary unwrapped values.
    Instance make(const Dimensions &d, double alpha, bool feasible = true) {
        ++counter_;
        auto H = sample_channel(d, derive_seed(seed_, StreamKind::custom, counter_, 1));
        auto U = sample_symbols(d, derive_seed(seed_, StreamKind::custom, counter_, 2));
        std::vector<double> energies(d.num_users);
        for (auto &e : energies)
            e = uniform(0.1, 3.0);
        U.set_energies(energies);
        const std::size_t hl = d.history_length();
        std::vector<double> history(d.num_antennas * hl), angles(d.num_antennas * d.block_length);
        const double bound = alpha * std::numbers::pi;
        for (std::size_t i = 0; i < d.num_antennas; ++i) {
            double a = uniform(-4.0 * std::numbers::pi, 4.0 * std::numbers::pi);
            for (std::size_t j = 0; j < hl; ++j)
                history[i * hl + j] = a = a + uniform(-std::numbers::pi, std::numbers::pi);
            if (hl == 0)
                a = 0.0; // no history: theta[-1] reads as zero
            for (std::size_t t = 0; t < d.block_length; ++t)
                angles[i * d.block_length + t] = a =
                    feasible ? a + uniform(-bound, bound) : uniform(-6.0 * std::numbers::pi, 6.0 * std::numbers::pi);
        }
        return {std::move(H), std::move(U),
                PhaseSchedule(d.num_antennas, d.block_length, hl, std::move(angles), std::move(history))};
    }

    // Random Hermitian PSD n x n matrix of random rank, with a random scale.
    Eigen::MatrixXcd psd(std::size_t n) {
        const auto rank = static_cast<Eigen::Index>(integer(1, n + 1));
        Eigen::MatrixXcd A(static_cast<Eigen::Index>(n), rank);
        std::normal_distribution<double> g;
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < A.cols(); ++j)
                A(i, j) = cplx(g(rng_), g(rng_));
        return std::pow(10.0, uniform(-3.0, 1.0)) * (A * A.adjoint());
    }

  private:
    std::mt19937_64 rng_;
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// Relative distance ||S - truth|| / ||truth||, with truth ordered [k][t] as
// oracle::residuals returns it.
inline double relative_residual_error(const ResidualState &state, const std::vector<cplx> &truth) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < state.num_users; ++k)
        for (std::size_t t = 0; t < state.block_length; ++t) {
            const cplx b = truth[k * state.block_length + t];
            num += std::norm(state(k, t) - b);
            den += std::norm(b);
        }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

struct SuiteResult {
    explicit SuiteResult(std::string suite) : name(std::move(suite)) {}

    std::string name;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::string first_failure;
    double seconds = 0.0;

    void record(bool ok, const std::string &what = {}) {
        ++checks;
        if (!ok) {
            if (failures == 0)
                first_failure = what;
            ++failures;
        }
    }
    [[nodiscard]] bool passed() const { return checks > 0 && failures == 0; }
};

struct SelfcheckOptions {
    std::uint64_t seed = 20260412;
    detail::UpdateRule rule = detail::UpdateRule::closed_form; // flipped_branch: negative control
};

// Closed-form visit against a brute-force grid over the admissible arc.
inline SuiteResult coordinate_suite(const SelfcheckOptions &opt) {
    SuiteResult s("coordinate-update grid oracle");
    InstanceGenerator gen(opt.seed + 1);
    constexpr std::size_t grid = 1u << 14;
    for (int n = 0; n < 400; ++n) {
        const double alpha = gen.alpha();
        const auto d = gen.dims(5, 3, 3, 5);
        auto inst = gen.make(d, alpha);
        const auto state = init_residuals(inst.H, inst.theta, inst.U);
        const std::size_t r = gen.integer(0, d.num_antennas - 1), q = gen.integer(0, d.block_length - 1);
        const double prev = inst.theta.previous_angle(r, q);
        const double bound = alpha * std::numbers::pi;
        const auto land = oracle::landscape(inst.H, inst.theta, inst.U, r, q);
        const double tol = 1e-6 * land.magnitude();
        for (auto arc : {VisitArc::backward_only, VisitArc::both_neighbors}) {
            const PrecoderConfig cfg{alpha, 5, 1e-4, arc};
            const double next = coordinate_update(r, q, inst.H, inst.theta, state, cfg, opt.rule);
            const bool two_sided = arc == VisitArc::both_neighbors && q + 1 < d.block_length;
            auto admissible = [&](double a) {
                return !two_sided || oracle::circular_distance(a, inst.theta.angle_at(r, q + 1)) <= bound + 1e-12;
            };
            const auto best = oracle::grid_minimum(land, prev, -bound, bound, grid, admissible);
            const bool ok = std::abs(next - prev) <= bound + 1e-12 && admissible(next) &&
                            land.value(next) <= best.value + tol;
            s.record(ok, "instance " + std::to_string(n));
        }
    }
    return s;
}

// Incremental residual updates against a from-scratch recomputation.
inline SuiteResult incremental_suite(const SelfcheckOptions &opt) {
    SuiteResult s("incremental-residual equivalence");
    InstanceGenerator gen(opt.seed + 2);
    for (int n = 0; n < 150; ++n) {
        const double alpha = gen.alpha();
        const auto d = gen.dims(6, 3, 4, 8);
        auto inst = gen.make(d, alpha, gen.integer(0, 1) == 0);
        auto state = init_residuals(inst.H, inst.theta, inst.U);
        const PrecoderConfig cfg{alpha, 5, 1e-4, gen.integer(0, 1) ? VisitArc::both_neighbors : VisitArc::backward_only};
        for (int step = 0; step < 60; ++step) {
            const std::size_t r = gen.integer(0, d.num_antennas - 1), q = gen.integer(0, d.block_length - 1);
            const double next = gen.integer(0, 4) == 0
                                    ? gen.uniform(-20.0, 20.0)
                                    : coordinate_update(r, q, inst.H, inst.theta, state, cfg, opt.rule);
            apply_update(r, q, next, inst.H, inst.theta, state);
        }
        const auto truth = oracle::residuals(inst.H, inst.theta, inst.U);
        const double f = oracle::objective(inst.H, inst.theta, inst.U);
        const bool ok = relative_residual_error(state, truth) <= 1e-9 &&
                        std::abs(state.objective - f) <= 1e-9 * f;
        s.record(ok, "sequence " + std::to_string(n));
    }
    return s;
}

// f never rises across a single visit (checked with the naive objective on
// small problems, and with the solver's own accounting on larger ones).
inline SuiteResult monotonicity_suite(const SelfcheckOptions &opt) {
    SuiteResult s("sub-iteration monotonicity");
    InstanceGenerator gen(opt.seed + 3);
    for (int n = 0; n < 80; ++n) {
        const double alpha = gen.alpha();
        const auto d = gen.dims(6, 3, 3, 6);
        auto inst = gen.make(d, alpha);
        auto state = init_residuals(inst.H, inst.theta, inst.U);
        const PrecoderConfig cfg{alpha, 3, 0.0, VisitArc::both_neighbors};
        double f = oracle::objective(inst.H, inst.theta, inst.U);
        bool ok = true;
        for (std::size_t pass = 0; pass < cfg.max_iterations; ++pass)
            for (std::size_t q = 0; q < d.block_length; ++q)
                for (std::size_t r = 0; r < d.num_antennas; ++r) {
                    apply_update(r, q, coordinate_update(r, q, inst.H, inst.theta, state, cfg, opt.rule), inst.H,
                                 inst.theta, state);
                    const double g = oracle::objective(inst.H, inst.theta, inst.U);
                    ok = ok && g <= f + 1e-12 * std::max(f, 1.0);
                    f = g;
                }
        s.record(ok, "stepped instance " + std::to_string(n));
    }
    for (double alpha : {1.0, 0.5, 0.25, 0.1}) {
        for (int n = 0; n < 25; ++n) {
            const Dimensions d{gen.integer(8, 32), 4, 4, 16};
            auto inst = gen.make(d, alpha);
            const auto result = solve(inst.H, inst.U, {alpha, 5, 0.0}, std::nullopt, opt.rule);
            bool ok = result.report.sub_iteration_monotone;
            double last = result.report.initial_objective;
            for (double v : result.report.objective_per_iteration) {
                ok = ok && v <= last * (1.0 + 1e-12);
                last = v;
            }
            s.record(ok, "solve alpha=" + std::to_string(alpha) + " run " + std::to_string(n));
        }
    }
    return s;
}

// |theta_i[t] - theta_i[t-1]| <= alpha pi at every pass boundary and at return.
inline SuiteResult feasibility_suite(const SelfcheckOptions &opt) {
    SuiteResult s("phase-variation feasibility");
    InstanceGenerator gen(opt.seed + 4);
    for (double alpha : {1.0, 0.5, 0.25, 0.1}) {
        for (auto arc : {VisitArc::both_neighbors, VisitArc::backward_only}) {
            for (int n = 0; n < 20; ++n) {
                const auto d = gen.dims(24, 4, 4, 16);
                auto inst = gen.make(d, alpha);
                std::vector<double> history(inst.theta.history().begin(), inst.theta.history().end());
                bool ok = true;
                const auto result = solve(inst.H, inst.U, {alpha, 5, 0.0, arc}, history, opt.rule,
                                          [&](std::size_t, const PhaseSchedule &theta, const ResidualState &) {
                                              ok = ok && theta.feasible(alpha, 1e-12);
                                          });
                ok = ok && result.schedule.feasible(alpha, 1e-12);
                s.record(ok, "alpha=" + std::to_string(alpha) + " run " + std::to_string(n));
            }
        }
    }
    return s;
}

// Rate bound against a cofactor determinant, and the zero-interference
// closed form log2(E snr).
inline SuiteResult logdet_suite(const SelfcheckOptions &opt) {
    SuiteResult s("log-det naive oracle");
    InstanceGenerator gen(opt.seed + 5);
    for (int n = 0; n < 400; ++n) {
        const std::size_t T = gen.integer(1, 5);
        const auto cov = gen.psd(T);
        const double snr = std::pow(10.0, gen.uniform(-2.0, 3.0));
        // Cofactor expansion cancels badly on ill-conditioned inputs; keep
        // cov + I/snr within a condition number the oracle can resolve.
        const double top = covariance_spectrum(cov).maxCoeff();
        if ((top + 1.0 / snr) * snr > 1e3) {
            --n;
            continue;
        }
        // Pick E so the bound sits well above the clamp.
        const double log2_det = std::log2(oracle::cofactor_determinant(
                                              [&] {
                                                  std::vector<cplx> a(T * T);
                                                  for (std::size_t i = 0; i < T; ++i)
                                                      for (std::size_t j = 0; j < T; ++j)
                                                          a[i * T + j] = cov(i, j) + (i == j ? 1.0 / snr : 0.0);
                                                  return a;
                                              }(),
                                              T)
                                              .real());
        const double energy = std::exp2(log2_det / static_cast<double>(T) + gen.uniform(0.5, 8.0));
        const double expected = oracle::rate_bound(energy, cov, snr);
        const double chol = rate_lower_bound(energy, cov, snr);
        const double spec = rate_from_spectrum(energy, covariance_spectrum(cov), snr);
        s.record(std::abs(chol - expected) <= 1e-9 * expected && std::abs(spec - expected) <= 1e-9 * expected,
                 "matrix " + std::to_string(n));
    }
    for (int n = 0; n < 100; ++n) {
        const std::size_t T = gen.integer(1, 64);
        const double snr = std::pow(10.0, gen.uniform(-1.0, 4.0));
        const double energy = std::pow(10.0, gen.uniform(0.0, 2.0));
        const double expected = std::max(0.0, std::log2(energy * snr));
        const double got = rate_lower_bound(energy, Eigen::MatrixXcd::Zero(T, T), snr);
        s.record(std::abs(got - expected) <= 1e-12 * std::max(1.0, expected), "zero interference " + std::to_string(n));
    }
    return s;
}

struct SelfcheckReport {
    std::vector<SuiteResult> suites;

    [[nodiscard]] bool passed() const {
        for (const auto &s : suites)
            if (!s.passed())
                return false;
        return true;
    }
};

inline SelfcheckReport run_selfcheck(const SelfcheckOptions &opt, std::ostream &out) {
    using clock = std::chrono::steady_clock;
    SelfcheckReport report;
    for (auto suite : {coordinate_suite, incremental_suite, monotonicity_suite, feasibility_suite, logdet_suite}) {
        const auto start = clock::now();
        auto r = suite(opt);
        r.seconds = std::chrono::duration<double>(clock::now() - start).count();
        report.suites.push_back(std::move(r));
    }
    char line[160];
    std::snprintf(line, sizeof line, "%-34s %8s %8s %8s  %s\n", "suite", "checks", "failed", "seconds", "result");
    out << line;
    for (const auto &r : report.suites) {
        std::snprintf(line, sizeof line, "%-34s %8zu %8zu %8.2f  %s\n", r.name.c_str(), r.checks, r.failures,
                      r.seconds, r.passed() ? "PASS" : "FAIL");
        out << line;
        if (!r.passed())
            out << "    first failure: " << r.first_failure << '\n';
    }
    out << (report.passed() ? "selfcheck: all suites passed\n" : "selfcheck: FAILED\n");
    return report;
}

} // namespace cesim::check

#endif
