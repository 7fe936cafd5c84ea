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

#ifndef CESIM_MODEL_HPP
#define CESIM_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesim {

using cplx = std::complex<double>;

// Time convention used throughout the library: the block occupies time
// indices 0..T-1. Negative indices -1, -2, ..., -(L-1) address the boundary
// history (index -1 is the sample transmitted just before the block).

// Sizes of one precoding problem.
struct Dimensions {
    std::size_t num_antennas = 1; // N
    std::size_t num_users = 1;    // M
    std::size_t channel_taps = 1; // L
    std::size_t block_length = 1; // T

    void validate() const {
        if (num_antennas == 0 || num_users == 0 || channel_taps == 0 || block_length == 0)
            throw std::invalid_argument("Dimensions: N, M, L and T must all be positive.");
    }

    // Precoding is only meaningful with at least as many antennas as users.
    [[nodiscard]] bool underdetermined() const { return num_antennas < num_users; }

    [[nodiscard]] std::size_t history_length() const { return channel_taps - 1; }

    friend bool operator==(const Dimensions &, const Dimensions &) = default;
};

// Complex channel impulse responses h_{k,i}[l], stored contiguously as
// [user k][antenna i][tap l] so the L taps of one (k, i) link are adjacent.
class ChannelRealization {
  public:
    ChannelRealization() = default;

    explicit ChannelRealization(const Dimensions &dims)
        : dims_(dims), taps_(dims.num_users * dims.num_antennas * dims.channel_taps) {
        dims_.validate();
    }

    ChannelRealization(const Dimensions &dims, std::vector<cplx> taps) : dims_(dims), taps_(std::move(taps)) {
        dims_.validate();
        if (taps_.size() != dims_.num_users * dims_.num_antennas * dims_.channel_taps)
            throw std::invalid_argument("ChannelRealization: tap array does not have shape M x N x L.");
        for (const auto &h : taps_)
            if (!std::isfinite(h.real()) || !std::isfinite(h.imag()))
                throw std::invalid_argument("ChannelRealization: non-finite channel tap.");
    }

    [[nodiscard]] const Dimensions &dims() const { return dims_; }

    [[nodiscard]] cplx operator()(std::size_t k, std::size_t i, std::size_t l) const { return taps_[offset(k, i) + l]; }
    cplx &operator()(std::size_t k, std::size_t i, std::size_t l) { return taps_[offset(k, i) + l]; }

    // The L taps of the link from antenna i to user k.
    [[nodiscard]] std::span<const cplx> link(std::size_t k, std::size_t i) const {
        return {taps_.data() + offset(k, i), dims_.channel_taps};
    }

    [[nodiscard]] std::span<const cplx> data() const { return taps_; }

  private:
    [[nodiscard]] std::size_t offset(std::size_t k, std::size_t i) const {
        return (k * dims_.num_antennas + i) * dims_.channel_taps;
    }

    Dimensions dims_;
    std::vector<cplx> taps_;
};

// Information symbols u_k[t] together with the per-user energy scale E_k.
class SymbolFrame {
  public:
    SymbolFrame() = default;

    SymbolFrame(std::size_t num_users, std::size_t block_length)
        : num_users_(num_users), block_length_(block_length), symbols_(num_users * block_length),
          energies_(num_users, 1.0) {}

    SymbolFrame(std::size_t num_users, std::size_t block_length, std::vector<cplx> symbols,
                std::vector<double> energies)
        : num_users_(num_users), block_length_(block_length), symbols_(std::move(symbols)),
          energies_(std::move(energies)) {
        if (symbols_.size() != num_users_ * block_length_)
            throw std::invalid_argument("SymbolFrame: symbol array does not have shape M x T.");
        if (energies_.size() != num_users_)
            throw std::invalid_argument("SymbolFrame: energy vector must have length M.");
        for (double e : energies_)
            if (!(e >= 0.0) || !std::isfinite(e))
                throw std::invalid_argument("SymbolFrame: energies must be finite and nonnegative.");
        for (const auto &u : symbols_)
            if (!std::isfinite(u.real()) || !std::isfinite(u.imag()))
                throw std::invalid_argument("SymbolFrame: non-finite symbol.");
    }

    [[nodiscard]] std::size_t num_users() const { return num_users_; }
    [[nodiscard]] std::size_t block_length() const { return block_length_; }

    [[nodiscard]] cplx symbol(std::size_t k, std::size_t t) const { return symbols_[k * block_length_ + t]; }
    cplx &symbol(std::size_t k, std::size_t t) { return symbols_[k * block_length_ + t]; }

    [[nodiscard]] double energy(std::size_t k) const { return energies_[k]; }
    [[nodiscard]] const std::vector<double> &energies() const { return energies_; }

    void set_energies(std::vector<double> energies) {
        if (energies.size() != num_users_)
            throw std::invalid_argument("SymbolFrame: energy vector must have length M.");
        for (double e : energies)
            if (!(e >= 0.0) || !std::isfinite(e))
                throw std::invalid_argument("SymbolFrame: energies must be finite and nonnegative.");
        energies_ = std::move(energies);
    }

    void set_common_energy(double energy) { set_energies(std::vector<double>(num_users_, energy)); }

    // sqrt(E_k) u_k[t], the noise-free sample user k should observe.
    [[nodiscard]] cplx target(std::size_t k, std::size_t t) const { return std::sqrt(energies_[k]) * symbol(k, t); }

  private:
    std::size_t num_users_ = 0;
    std::size_t block_length_ = 0;
    std::vector<cplx> symbols_;
    std::vector<double> energies_;
};

// Transmit phase angles theta_i[t] for one block plus the fixed boundary
// history. Angles are kept unwrapped: the phase-variation constraint is
// defined on literal increments, and only exp(j theta) is transmitted.
class PhaseSchedule {
  public:
    PhaseSchedule() = default;

    // Zero history, zero angles.
    PhaseSchedule(std::size_t num_antennas, std::size_t block_length, std::size_t history_length)
        : num_antennas_(num_antennas), block_length_(block_length), history_length_(history_length),
          angles_(num_antennas * block_length, 0.0), history_(num_antennas * history_length, 0.0) {}

    // history is [antenna i][column j], column j holding time index j - history_length.
    PhaseSchedule(std::size_t num_antennas, std::size_t block_length, std::size_t history_length,
                  std::vector<double> angles, std::vector<double> history)
        : num_antennas_(num_antennas), block_length_(block_length), history_length_(history_length),
          angles_(std::move(angles)), history_(std::move(history)) {
        if (angles_.size() != num_antennas_ * block_length_)
            throw std::invalid_argument("PhaseSchedule: angle array does not have shape N x T.");
        if (history_.size() != num_antennas_ * history_length_)
            throw std::invalid_argument("PhaseSchedule: history does not have shape N x (L-1).");
        for (double a : angles_)
            if (!std::isfinite(a))
                throw std::invalid_argument("PhaseSchedule: non-finite angle.");
        for (double a : history_)
            if (!std::isfinite(a))
                throw std::invalid_argument("PhaseSchedule: non-finite history angle.");
    }

    [[nodiscard]] std::size_t num_antennas() const { return num_antennas_; }
    [[nodiscard]] std::size_t block_length() const { return block_length_; }
    [[nodiscard]] std::size_t history_length() const { return history_length_; }

    // Angle at time t, with t < 0 addressing the history.
    [[nodiscard]] double angle(std::size_t i, std::ptrdiff_t t) const {
        if (t >= 0)
            return angles_[i * block_length_ + static_cast<std::size_t>(t)];
        const auto back = static_cast<std::size_t>(-t);
        if (back > history_length_)
            throw std::out_of_range("PhaseSchedule: time index before the stored history.");
        return history_[i * history_length_ + history_length_ - back];
    }

    // Angle at time t >= 0; the history is read-only.
    [[nodiscard]] double &angle_at(std::size_t i, std::size_t t) { return angles_[i * block_length_ + t]; }
    [[nodiscard]] double angle_at(std::size_t i, std::size_t t) const { return angles_[i * block_length_ + t]; }

    // theta_i[t-1] for t >= 0, or 0 when t == 0 and there is no history.
    [[nodiscard]] double previous_angle(std::size_t i, std::size_t t) const {
        if (t > 0)
            return angles_[i * block_length_ + t - 1];
        return history_length_ == 0 ? 0.0 : history_[i * history_length_ + history_length_ - 1];
    }

    [[nodiscard]] std::span<const double> angles() const { return angles_; }
    [[nodiscard]] std::span<const double> history() const { return history_; }

    // Largest |theta_i[t] - theta_i[t-1]| over the block, including the
    // step out of the history (which counts as zero-angle when absent).
    [[nodiscard]] double max_increment() const {
        double worst = 0.0;
        for (std::size_t i = 0; i < num_antennas_; ++i)
            for (std::size_t t = 0; t < block_length_; ++t)
                worst = std::max(worst, std::abs(angle_at(i, t) - previous_angle(i, t)));
        return worst;
    }

    [[nodiscard]] bool feasible(double alpha, double slack = 1e-12) const {
        return max_increment() <= alpha * std::numbers::pi + slack;
    }

  private:
    std::size_t num_antennas_ = 0;
    std::size_t block_length_ = 0;
    std::size_t history_length_ = 0;
    std::vector<double> angles_;
    std::vector<double> history_;
};

// Which neighbours bound the arc searched when a single angle theta_r[q] is
// re-optimized.
enum class VisitArc {
    // Within alpha pi of theta_r[q-1] and (circularly) of theta_r[q+1]. The
    // current angle is always admissible, so no visit can raise f and the
    // schedule stays feasible throughout a pass.
    both_neighbors,
    // Within alpha pi of theta_r[q-1] only, the plain clamped closed form.
    // Feasibility holds at the end of each complete pass; within a pass a
    // visit may raise f when theta_r[q-1] has just moved away.
    backward_only,
};

// Settings of the iterative precoder.
struct PrecoderConfig {
    double alpha = 1.0;             // phase increments limited to [-alpha pi, alpha pi]
    std::size_t max_iterations = 5; // full passes over all N*T coordinates
    double rel_tolerance = 1e-4;    // stop once a pass lowers f by less than this fraction
    VisitArc arc = VisitArc::both_neighbors;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw std::invalid_argument("PrecoderConfig: alpha out of (0,1].");
        if (max_iterations == 0)
            throw std::invalid_argument("PrecoderConfig: max_iterations must be positive.");
        if (!(rel_tolerance >= 0.0))
            throw std::invalid_argument("PrecoderConfig: rel_tolerance must be nonnegative.");
    }
};

// Residuals S(k,t) between noise-free received signal and target, plus
// the objective f = sum |S|^2. Stored time-major, [time t][user k], so the
// residuals touched by one angle form a single contiguous run.
struct ResidualState {
    std::size_t num_users = 0;
    std::size_t block_length = 0;
    std::vector<cplx> residuals;
    double objective = 0.0;

    [[nodiscard]] cplx operator()(std::size_t k, std::size_t t) const { return residuals[t * num_users + k]; }
    cplx &operator()(std::size_t k, std::size_t t) { return residuals[t * num_users + k]; }

    [[nodiscard]] double sum_of_squares() const {
        double acc = 0.0;
        for (const auto &s : residuals)
            acc += std::norm(s);
        return acc;
    }
};

namespace detail {

inline void check_consistent(const ChannelRealization &H, const PhaseSchedule &theta) {
    const auto &d = H.dims();
    if (theta.num_antennas() != d.num_antennas || theta.block_length() != d.block_length)
        throw std::invalid_argument("PhaseSchedule shape does not match the channel dimensions.");
    if (theta.history_length() != d.history_length())
        throw std::invalid_argument("PhaseSchedule history must hold L-1 samples.");
}

inline void check_consistent(const ChannelRealization &H, const SymbolFrame &U) {
    const auto &d = H.dims();
    if (U.num_users() != d.num_users || U.block_length() != d.block_length)
        throw std::invalid_argument("SymbolFrame shape does not match the channel dimensions.");
}

inline void check_index(const Dimensions &d, std::size_t k, std::size_t t) {
    if (k >= d.num_users)
        throw std::out_of_range("user index out of range");
    if (t >= d.block_length)
        throw std::out_of_range("time index out of range");
}

} // namespace detail

// Noise-free received sample of user k at time t, without the sqrt(P_T)
// scale: (1/sqrt N) sum_i sum_l h_{k,i}[l] exp(j theta_i[t-l]).
inline cplx noiseless_rx(const ChannelRealization &H, const PhaseSchedule &theta, std::size_t k, std::size_t t) {
    detail::check_consistent(H, theta);
    const auto &d = H.dims();
    detail::check_index(d, k, t);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < d.num_antennas; ++i) {
        const auto taps = H.link(k, i);
        for (std::size_t l = 0; l < d.channel_taps; ++l) {
            const double a = theta.angle(i, static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(l));
            acc += taps[l] * std::polar(1.0, a);
        }
    }
    return acc / std::sqrt(static_cast<double>(d.num_antennas));
}

// Multi-user interference: received noise-free sample minus sqrt(E_k) u_k[t].
inline cplx mui(const ChannelRealization &H, const PhaseSchedule &theta, const SymbolFrame &U, std::size_t k,
                std::size_t t) {
    detail::check_consistent(H, U);
    return noiseless_rx(H, theta, k, t) - U.target(k, t);
}

// f = sum_t sum_k |mui(k,t)|^2.
inline double objective(const ChannelRealization &H, const PhaseSchedule &theta, const SymbolFrame &U) {
    detail::check_consistent(H, theta);
    detail::check_consistent(H, U);
    const auto &d = H.dims();
    double f = 0.0;
    for (std::size_t t = 0; t < d.block_length; ++t)
        for (std::size_t k = 0; k < d.num_users; ++k)
            f += std::norm(mui(H, theta, U, k, t));
    return f;
}

} // namespace cesim

#endif
