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

#ifndef CESIM_RATE_HPP
#define CESIM_RATE_HPP

#include "channel.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Achievable per-user rate of the constant-envelope precoder.
//
// For a channel H and energies E, user k achieves at least
//
//     R_k = [ log2 E_k - (1/T) log2 det( E[I_k I_k^H | H] + (sigma^2 / P_T) I_T ) ]^+
//
// bits per channel use, where I_k is the T-vector of residual interference
// the precoder leaves at user k and the expectation runs over the Gaussian
// symbols of all users. The expectation is estimated by averaging I_k I_k^H
// over F independently drawn symbol frames; the ergodic rate averages R_k
// over C channel draws.

namespace cesim {

using HermitianMatrix = Eigen::MatrixXcd;

struct RateConfig {
    double snr = 1.0;                   // P_T / sigma^2, linear
    std::size_t frames_per_channel = 0; // F; 0 selects max(200, 4T)
    std::size_t num_channels = 50;      // C
    double target_rate = 1.0;           // bits per channel use

    void validate() const {
        if (!(snr > 0.0) || !std::isfinite(snr))
            throw std::invalid_argument("RateConfig: snr must be positive.");
        if (num_channels == 0)
            throw std::invalid_argument("RateConfig: num_channels must be positive.");
        if (!(target_rate >= 0.0))
            throw std::invalid_argument("RateConfig: target_rate must be nonnegative.");
    }

    [[nodiscard]] std::size_t frames(std::size_t block_length) const {
        return frames_per_channel > 0 ? frames_per_channel : std::max<std::size_t>(200, 4 * block_length);
    }
};

// Sample estimates of E[I_k I_k^H | H], one T x T matrix per user.
struct MuiCovariance {
    std::vector<HermitianMatrix> per_user;

    [[nodiscard]] std::size_t block_length() const { return per_user.empty() ? 0 : per_user.front().rows(); }
};

// Averages I_k I_k^H over `frames` symbol frames drawn from the streams
// (master_seed, symbols, channel_index, f). Each frame is precoded by solve.
inline MuiCovariance estimate_mui_covariance(const ChannelRealization &H, const std::vector<double> &energies,
                                             std::size_t frames, const PrecoderConfig &precoder,
                                             std::uint64_t master_seed, std::uint64_t channel_index) {
    const auto &d = H.dims();
    if (frames == 0)
        throw std::invalid_argument("estimate_mui_covariance: need at least one frame.");
    const auto T = static_cast<Eigen::Index>(d.block_length);
    MuiCovariance cov;
    cov.per_user.assign(d.num_users, HermitianMatrix::Zero(T, T));
    Eigen::VectorXcd residual(T);
    for (std::size_t f = 0; f < frames; ++f) {
        SymbolFrame U = sample_symbols(d, derive_seed(master_seed, StreamKind::symbols, channel_index, f));
        U.set_energies(energies);
        const auto result = solve(H, U, precoder);
        for (std::size_t k = 0; k < d.num_users; ++k) {
            for (Eigen::Index t = 0; t < T; ++t)
                residual[t] = result.state(k, static_cast<std::size_t>(t));
            cov.per_user[k].selfadjointView<Eigen::Lower>().rankUpdate(residual);
        }
    }
    const double scale = 1.0 / static_cast<double>(frames);
    for (auto &c : cov.per_user) {
        // Fill the upper triangle from the lower one, then average.
        c.triangularView<Eigen::StrictlyUpper>() = c.adjoint();
        c *= scale;
        c.diagonal() = c.diagonal().real().cast<cplx>();
    }
    return cov;
}

// [log2 E - (1/T) log2 det(cov + I/snr)]^+ through a Cholesky factorization.
inline double rate_lower_bound(double energy, const HermitianMatrix &cov, double snr) {
    if (!(energy > 0.0))
        throw std::invalid_argument("rate_lower_bound: energy must be positive.");
    if (!(snr > 0.0))
        throw std::invalid_argument("rate_lower_bound: snr must be positive.");
    if (cov.rows() == 0 || cov.rows() != cov.cols())
        throw std::invalid_argument("rate_lower_bound: covariance must be square and non-empty.");
    const auto T = cov.rows();
    HermitianMatrix reg = cov;
    reg.diagonal().array() += 1.0 / snr;
    const Eigen::LLT<HermitianMatrix> llt(reg);
    if (llt.info() != Eigen::Success)
        throw std::domain_error("rate_lower_bound: covariance plus noise is not positive definite.");
    double log2_det = 0.0;
    for (Eigen::Index i = 0; i < T; ++i)
        log2_det += 2.0 * std::log2(llt.matrixLLT()(i, i).real());
    if (!std::isfinite(log2_det))
        throw std::domain_error("rate_lower_bound: non-finite log-determinant.");
    return std::max(0.0, std::log2(energy) - log2_det / static_cast<double>(T));
}

// Eigenvalues of a Hermitian covariance, clipped at zero (sample estimates
// are PSD up to rounding). One decomposition serves every snr.
inline Eigen::VectorXd covariance_spectrum(const HermitianMatrix &cov) {
    const Eigen::SelfAdjointEigenSolver<HermitianMatrix> eig(cov, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
        throw std::domain_error("covariance_spectrum: eigen decomposition failed.");
    return eig.eigenvalues().cwiseMax(0.0);
}

// The same bound as rate_lower_bound, evaluated from the spectrum.
inline double rate_from_spectrum(double energy, const Eigen::VectorXd &spectrum, double snr) {
    const double noise = 1.0 / snr;
    double log2_det = 0.0;
    for (Eigen::Index i = 0; i < spectrum.size(); ++i)
        log2_det += std::log2(spectrum[i] + noise);
    return std::max(0.0, std::log2(energy) - log2_det / static_cast<double>(spectrum.size()));
}

// Per-user ergodic rate for a common energy E', averaged over C seeded
// channel draws and over the M users.
//
// The precoder output depends on E' but not on the snr, so the evaluator
// keeps, per distinct E', the covariance spectra of every (channel, user)
// pair. Sweeping snr at a known E' then costs no further precoding.
class ErgodicRateEvaluator {
  public:
    ErgodicRateEvaluator(const Dimensions &dims, const PrecoderConfig &precoder, std::size_t num_channels,
                         std::size_t frames_per_channel, std::uint64_t master_seed, std::size_t threads = 0)
        : dims_(dims), precoder_(precoder), frames_(frames_per_channel), seed_(master_seed),
          threads_(resolve_threads(threads)) {
        dims_.validate();
        precoder_.validate();
        if (num_channels == 0 || frames_ == 0)
            throw std::invalid_argument("ErgodicRateEvaluator: channel and frame counts must be positive.");
        channels_.reserve(num_channels);
        for (std::size_t c = 0; c < num_channels; ++c)
            channels_.push_back(sample_channel(dims_, derive_seed(seed_, StreamKind::channel, c)));
    }

    [[nodiscard]] const Dimensions &dims() const { return dims_; }
    [[nodiscard]] const PrecoderConfig &precoder() const { return precoder_; }
    [[nodiscard]] std::size_t num_channels() const { return channels_.size(); }
    [[nodiscard]] std::size_t frames_per_channel() const { return frames_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] const ChannelRealization &channel(std::size_t c) const { return channels_.at(c); }

    // Number of energies whose spectra have been computed.
    [[nodiscard]] std::size_t distinct_energies() const { return cache_.size(); }

    // spectra(E')[c][k]: spectrum of user k's MUI covariance on channel c.
    const std::vector<std::vector<Eigen::VectorXd>> &spectra(double energy) {
        if (!(energy > 0.0) || !std::isfinite(energy))
            throw std::invalid_argument("ErgodicRateEvaluator: energy must be positive.");
        if (auto it = cache_.find(energy); it != cache_.end())
            return it->second;
        std::vector<std::vector<Eigen::VectorXd>> out(channels_.size());
        const std::vector<double> energies(dims_.num_users, energy);
        parallel_for(channels_.size(), threads_, [&](std::size_t c) {
            const auto cov = estimate_mui_covariance(channels_[c], energies, frames_, precoder_, seed_, c);
            out[c].reserve(dims_.num_users);
            for (const auto &m : cov.per_user)
                out[c].push_back(covariance_spectrum(m));
        });
        return cache_.emplace(energy, std::move(out)).first->second;
    }

    // Mean of the rate bound over channels and users.
    double rate(double energy, double snr) {
        if (!(snr > 0.0))
            throw std::invalid_argument("ErgodicRateEvaluator: snr must be positive.");
        const auto &s = spectra(energy);
        double total = 0.0;
        for (const auto &per_channel : s)
            for (const auto &spectrum : per_channel)
                total += rate_from_spectrum(energy, spectrum, snr);
        return total / static_cast<double>(channels_.size() * dims_.num_users);
    }

  private:
    Dimensions dims_;
    PrecoderConfig precoder_;
    std::size_t frames_;
    std::uint64_t seed_;
    std::size_t threads_;
    std::vector<ChannelRealization> channels_;
    std::map<double, std::vector<std::vector<Eigen::VectorXd>>> cache_;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

inline double per_user_ergodic_rate(const Dimensions &dims, const PrecoderConfig &precoder, double snr, double energy,
                                    const RateConfig &config, std::uint64_t seed, std::size_t threads = 0) {
    config.validate();
    ErgodicRateEvaluator eval(dims, precoder, config.num_channels, config.frames(dims.block_length), seed, threads);
    return eval.rate(energy, snr);
}

// Log-spaced grid over [min_energy, max_energy] followed by golden-section
// refinement, in log E', of the interval between the grid neighbours of the
// best grid point.
struct EnergySearch {
    std::size_t grid_points = 24;
    double min_energy = 1e-2;
    double max_energy = 1e2;
    double log10_tolerance = 0.01; // stop refining below this bracket width

    void validate() const {
        if (grid_points < 2)
            throw std::invalid_argument("EnergySearch: need at least two grid points.");
        if (!(min_energy > 0.0 && max_energy > min_energy))
            throw std::invalid_argument("EnergySearch: need 0 < min_energy < max_energy.");
        if (!(log10_tolerance > 0.0))
            throw std::invalid_argument("EnergySearch: log10_tolerance must be positive.");
    }

    [[nodiscard]] std::vector<double> grid() const {
        std::vector<double> g(grid_points);
        const double lo = std::log10(min_energy), hi = std::log10(max_energy);
        for (std::size_t j = 0; j < grid_points; ++j)
            g[j] = std::pow(10.0, lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(grid_points - 1));
        return g;
    }
};

struct EnergyOptimum {
    double energy = 0.0;
    double rate = 0.0;
    std::size_t grid_index = 0; // best grid point before refinement
    double bracket_low = 0.0;   // grid neighbours of that point
    double bracket_high = 0.0;
};

// E' maximizing the per-user ergodic rate at a fixed snr. E' is one value
// shared by every channel draw.
inline EnergyOptimum optimize_symbol_energy(ErgodicRateEvaluator &eval, double snr, const EnergySearch &search = {}) {
    search.validate();
    const auto grid = search.grid();
    EnergyOptimum best;
    best.rate = -1.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double r = eval.rate(grid[j], snr);
        if (r > best.rate) {
            best.rate = r;
            best.energy = grid[j];
            best.grid_index = j;
        }
    }
    const std::size_t j = best.grid_index;
    best.bracket_low = grid[j == 0 ? 0 : j - 1];
    best.bracket_high = grid[std::min(j + 1, grid.size() - 1)];

    // Golden-section search for the maximum over log10 E'.
    constexpr double inv_phi = 0.6180339887498949;
    double a = std::log10(best.bracket_low), b = std::log10(best.bracket_high);
    auto probe = [&](double x) {
        const double e = std::pow(10.0, x);
        const double r = eval.rate(e, snr);
        if (r > best.rate) {
            best.rate = r;
            best.energy = e;
        }
        return r;
    };
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = b - a > search.log10_tolerance ? probe(x1) : 0.0;
    double f2 = b - a > search.log10_tolerance ? probe(x2) : 0.0;
    while (b - a > search.log10_tolerance) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = probe(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = probe(x2);
        }
    }
    return best;
}

struct PowerBracket {
    double low_db = -10.0;
    double high_db = 40.0;
    double width_db = 0.1;
};

struct MinPowerResult {
    std::optional<double> snr_db; // empty: target not reached at high_db
    double energy = 0.0;          // optimized E' at snr_db (or at high_db when infeasible)
    double rate = 0.0;            // optimized rate there
    std::size_t probes = 0;
    std::vector<std::string> diagnostics;

    [[nodiscard]] bool feasible() const { return snr_db.has_value(); }
};

// Smallest snr (dB) whose energy-optimized per-user ergodic rate reaches the
// target, by bisection to width_db. Assumes the optimized rate grows with
// snr; a three-point pre-check reports when it visibly does not.
inline MinPowerResult min_power_for_rate(ErgodicRateEvaluator &eval, double target_rate,
                                         const EnergySearch &search = {}, const PowerBracket &bracket = {}) {
    if (!(target_rate > 0.0))
        throw std::invalid_argument("min_power_for_rate: target_rate must be positive.");
    if (!(bracket.high_db > bracket.low_db && bracket.width_db > 0.0))
        throw std::invalid_argument("min_power_for_rate: invalid snr bracket.");
    MinPowerResult result;
    auto optimized = [&](double db) {
        ++result.probes;
        return optimize_symbol_energy(eval, db_to_linear(db), search);
    };

    const auto top = optimized(bracket.high_db);
    const auto bottom = optimized(bracket.low_db);
    const double middle_db = 0.5 * (bracket.low_db + bracket.high_db);
    const auto middle = optimized(middle_db);
    constexpr double slack = 1e-6;
    if (bottom.rate > middle.rate + slack || middle.rate > top.rate + slack)
        result.diagnostics.emplace_back("optimized rate is not monotone in snr over the bracket");

    if (top.rate < target_rate) {
        result.energy = top.energy;
        result.rate = top.rate;
        result.diagnostics.emplace_back("target rate not reached at the top of the snr bracket");
        return result;
    }
    if (bottom.rate >= target_rate) {
        result.snr_db = bracket.low_db;
        result.energy = bottom.energy;
        result.rate = bottom.rate;
        result.diagnostics.emplace_back("target rate already met at the bottom of the snr bracket");
        return result;
    }

    double lo = bracket.low_db, hi = bracket.high_db;
    if (middle.rate >= target_rate)
        hi = middle_db;
    else
        lo = middle_db;
    while (hi - lo > bracket.width_db) {
        const double mid = 0.5 * (lo + hi);
        if (optimized(mid).rate >= target_rate)
            hi = mid;
        else
            lo = mid;
    }
    const double snr_db = 0.5 * (lo + hi);
    const auto at = optimized(snr_db);
    result.snr_db = snr_db;
    result.energy = at.energy;
    result.rate = at.rate;
    return result;
}

// The same minimum, with the energy search on the outside:
//   snr_min = min over E' of s_req(E'),
// where s_req(E') is the least snr at which rate(E', snr) reaches the target.
// Both forms give the least snr with max_E' rate(E', snr) >= target, since
// rate(E', .) is non-decreasing for every E'. This one needs a precoding
// pass per E' tried rather than per (snr probe, E') pair; s_req itself is a
// bisection on cached spectra, carried to solve_width_db.
inline MinPowerResult min_power_over_energy(ErgodicRateEvaluator &eval, double target_rate,
                                            const EnergySearch &search = {}, const PowerBracket &bracket = {},
                                            double solve_width_db = 1e-6) {
    if (!(target_rate > 0.0))
        throw std::invalid_argument("min_power_over_energy: target_rate must be positive.");
    if (!(bracket.high_db > bracket.low_db && bracket.width_db > 0.0 && solve_width_db > 0.0))
        throw std::invalid_argument("min_power_over_energy: invalid snr bracket.");
    search.validate();
    constexpr double never = std::numeric_limits<double>::infinity();

    MinPowerResult result;
    double best_db = never, best_energy = 0.0;
    double ceiling_rate = -1.0, ceiling_energy = 0.0; // best rate at high_db
    auto required_db = [&](double energy) {
        ++result.probes;
        const double top = eval.rate(energy, db_to_linear(bracket.high_db));
        if (top > ceiling_rate) {
            ceiling_rate = top;
            ceiling_energy = energy;
        }
        double db = never;
        if (top >= target_rate) {
            double lo = bracket.low_db, hi = bracket.high_db;
            if (eval.rate(energy, db_to_linear(lo)) >= target_rate) {
                hi = lo;
            } else {
                while (hi - lo > solve_width_db) {
                    const double mid = 0.5 * (lo + hi);
                    (eval.rate(energy, db_to_linear(mid)) >= target_rate ? hi : lo) = mid;
                }
            }
            db = hi;
        }
        if (db < best_db) {
            best_db = db;
            best_energy = energy;
        }
        return db;
    };

    const auto grid = search.grid();
    std::size_t j_best = 0;
    double grid_best = never;
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (const double db = required_db(grid[j]); db < grid_best) {
            grid_best = db;
            j_best = j;
        }

    if (grid_best < never) {
        // Golden-section search for the minimum over log10 E'.
        constexpr double inv_phi = 0.6180339887498949;
        double a = std::log10(grid[j_best == 0 ? 0 : j_best - 1]);
        double b = std::log10(grid[std::min(j_best + 1, grid.size() - 1)]);
        auto probe = [&](double x) { return required_db(std::pow(10.0, x)); };
        double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
        double f1 = b - a > search.log10_tolerance ? probe(x1) : 0.0;
        double f2 = b - a > search.log10_tolerance ? probe(x2) : 0.0;
        while (b - a > search.log10_tolerance) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = probe(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = probe(x2);
            }
        }
    }

    if (best_db == never) {
        result.energy = ceiling_energy;
        result.rate = ceiling_rate;
        result.diagnostics.emplace_back("target rate not reached at the top of the snr bracket");
        return result;
    }
    if (best_db <= bracket.low_db)
        result.diagnostics.emplace_back("target rate already met at the bottom of the snr bracket");
    if (j_best == 0 || j_best + 1 == grid.size())
        result.diagnostics.emplace_back("energy optimum at the edge of the energy search range");
    result.snr_db = best_db;
    result.energy = best_energy;
    result.rate = eval.rate(best_energy, db_to_linear(best_db));
    return result;
}

} // namespace cesim

#endif
