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

#ifndef CESIM_SOLVER_HPP
#define CESIM_SOLVER_HPP

#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

// Cyclic coordinate descent over the transmit phase angles.
//
// One iteration visits the N*T angles with time ascending in the outer loop
// and antenna ascending in the inner loop. A visit minimizes f over the
// single angle theta_r[q] with every other angle frozen. Writing the new
// angle as theta_r[q-1] + omega, f restricted to that angle is
//
//     const - (2 / sqrt N) |z| cos(omega + c),   c = ARG(z) in (-pi, pi],
//     z = -exp(j theta_r[q-1]) sum_{t=q}^{min(T-1,q+L-1)} sum_k h_{k,r}[t-q] conj(S_{r,q}(k,t)),
//
// where S_{r,q} is the residual with the contribution of theta_r[q] removed.
// Over omega in [-alpha pi, alpha pi] the minimizer is -c clamped to the
// interval: c < -alpha pi gives +alpha pi, c >= alpha pi gives -alpha pi.
// Only the M*L residuals (k, q..q+L-1) depend on theta_r[q], so a visit
// costs O(ML) whatever alpha is.

namespace cesim {

struct SolveReport {
    double initial_objective = 0.0;
    double final_objective = 0.0;
    std::vector<double> objective_per_iteration; // f after each complete pass
    std::size_t iterations_run = 0;
    bool sub_iteration_monotone = true;        // no single visit raised f beyond rounding
    double worst_sub_iteration_increase = 0.0; // largest single-visit increase of f
};

struct SolveResult {
    PhaseSchedule schedule;
    ResidualState state;
    SolveReport report;
};

namespace detail {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Increment for a given c = ARG(z), following the three closed intervals
// [-pi, -alpha pi), [-alpha pi, alpha pi), [alpha pi, pi].
inline double clamp_increment(double c, double alpha) {
    const double bound = alpha * std::numbers::pi;
    if (c < -bound)
        return bound;
    if (c < bound)
        return -c;
    return -bound;
}

// Principal value in (-pi, pi]; std::arg returns -pi for a negative-zero
// imaginary part.
inline double principal_arg(cplx z) {
    const double c = std::arg(z);
    return c <= -std::numbers::pi ? std::numbers::pi : c;
}

// Wraps x into (-pi, pi]. Arguments are differences of nearby unwrapped
// angles, so the loops run at most a couple of times.
inline double wrap_angle(double x) {
    while (x > std::numbers::pi)
        x -= two_pi;
    while (x <= -std::numbers::pi)
        x += two_pi;
    return x;
}

// Best increment when the new angle must also stay within alpha pi
// (circularly) of the following angle, which sits forward_offset from the
// previous one. current_offset is the increment of the angle being replaced;
// it is admissible, so the result never does worse than keeping it.
inline double clamp_increment_two_sided(double c, double alpha, double forward_offset, double current_offset) {
    const double unconstrained = clamp_increment(c, alpha);
    const double bound = alpha * std::numbers::pi;
    if (std::abs(wrap_angle(unconstrained - forward_offset)) <= bound)
        return unconstrained;
    double best = current_offset;
    double best_gain = std::cos(current_offset + c);
    auto consider = [&](double omega) {
        const double gain = std::cos(omega + c);
        if (gain > best_gain) {
            best_gain = gain;
            best = omega;
        }
    };
    // The forward arc, unrolled over one turn either side, cut to the backward arc.
    for (int n = -1; n <= 1; ++n) {
        const double lo = std::max(-bound, forward_offset - bound + n * two_pi);
        const double hi = std::min(bound, forward_offset + bound + n * two_pi);
        if (lo > hi + 1e-12) // arcs that only touch still count
            continue;
        consider(lo);
        consider(std::max(lo, hi));
        for (int m = -1; m <= 1; ++m) {
            const double peak = -c + m * two_pi;
            if (peak >= lo && peak <= hi)
                consider(peak);
        }
    }
    return best;
}

// Taps of one antenna r packed [tap l][user k], matching the residual
// layout: window entry j = l*M + k pairs h_{k,r}[l] with S(k, q+l).
inline std::vector<cplx> pack_taps(const ChannelRealization &H, std::size_t r) {
    const auto &d = H.dims();
    std::vector<cplx> out(d.channel_taps * d.num_users);
    for (std::size_t k = 0; k < d.num_users; ++k)
        for (std::size_t l = 0; l < d.channel_taps; ++l)
            out[l * d.num_users + k] = H(k, r, l);
    return out;
}

// Number of residual columns touched by an angle at time q.
inline std::size_t window_length(const Dimensions &d, std::size_t q) {
    return std::min(d.block_length, q + d.channel_taps) - q;
}

// sum_j h[j] conj(S[j]) over the n = len*M window entries starting at time q.
inline cplx correlate(const cplx *h, const ResidualState &state, std::size_t q, std::size_t n) {
    const cplx *s = state.residuals.data() + q * state.num_users;
    // Two partial sums halve the dependency chain.
    double re0 = 0.0, im0 = 0.0, re1 = 0.0, im1 = 0.0;
    std::size_t j = 0;
    for (; j + 1 < n; j += 2) {
        re0 += h[j].real() * s[j].real() + h[j].imag() * s[j].imag();
        im0 += h[j].imag() * s[j].real() - h[j].real() * s[j].imag();
        re1 += h[j + 1].real() * s[j + 1].real() + h[j + 1].imag() * s[j + 1].imag();
        im1 += h[j + 1].imag() * s[j + 1].real() - h[j + 1].real() * s[j + 1].imag();
    }
    if (j < n) {
        re0 += h[j].real() * s[j].real() + h[j].imag() * s[j].imag();
        im0 += h[j].imag() * s[j].real() - h[j].real() * s[j].imag();
    }
    return {re0 + re1, im0 + im1};
}

inline double window_gain(const cplx *h, std::size_t n) {
    double g = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        g += std::norm(h[j]);
    return g;
}

// z of the visit, given sum h conj(S), sum |h|^2 over the window, and the
// phasors prev = exp(j theta_r[q-1]), cur = exp(j theta_r[q]).
inline cplx update_direction(cplx cross, double gain, double inv_sqrt_n, cplx prev, cplx cur) {
    // sum h conj(S_{r,q}) = sum h conj(S) - conj(cur) sum |h|^2 / sqrt N
    return -prev * (cross - std::conj(cur) * (gain * inv_sqrt_n));
}

// S(k, q+l) += h_{k,r}[l] * step over the window.
inline void shift_residuals(const cplx *h, ResidualState &state, std::size_t q, std::size_t n, cplx step) {
    cplx *s = state.residuals.data() + q * state.num_users;
    for (std::size_t j = 0; j < n; ++j)
        s[j] = cplx(s[j].real() + h[j].real() * step.real() - h[j].imag() * step.imag(),
                    s[j].imag() + h[j].real() * step.imag() + h[j].imag() * step.real());
}

// Change in f from that shift, given cross = sum h conj(S) and gain =
// sum |h|^2 taken before it: sum |S + h step|^2 - |S|^2.
inline double shift_change(cplx cross, double gain, cplx step) {
    return 2.0 * (step.real() * cross.real() - step.imag() * cross.imag()) + gain * std::norm(step);
}

// Increment chosen for a visit, dispatching on the arc rule.
inline double choose_increment(double c, const PrecoderConfig &config, bool has_next, double forward_offset,
                               double current_offset) {
    if (config.arc == VisitArc::both_neighbors && has_next)
        return clamp_increment_two_sided(c, config.alpha, forward_offset, current_offset);
    return clamp_increment(c, config.alpha);
}

// Negative control for the self-check: swaps the two clamped branches so a
// visit that lands on the arc boundary jumps to the opposite end.
enum class UpdateRule { closed_form, flipped_branch };

inline double apply_rule(double omega, double bound, UpdateRule rule) {
    return rule == UpdateRule::flipped_branch && std::abs(omega) == bound ? -omega : omega;
}

} // namespace detail

// Constant extension of the history: theta_i[t] = theta_i[-1] for the whole
// block (zero when L = 1 or no history is given). history is N x (L-1),
// oldest column first.
inline PhaseSchedule init_schedule(const Dimensions &dims, std::optional<std::vector<double>> history,
                                   const PrecoderConfig &config) {
    dims.validate();
    config.validate();
    const std::size_t hl = dims.history_length();
    std::vector<double> hist = history ? std::move(*history) : std::vector<double>(dims.num_antennas * hl, 0.0);
    if (hist.size() != dims.num_antennas * hl)
        throw std::invalid_argument("init_schedule: history must have shape N x (L-1).");
    std::vector<double> angles(dims.num_antennas * dims.block_length, 0.0);
    for (std::size_t i = 0; i < dims.num_antennas; ++i) {
        const double last = hl == 0 ? 0.0 : hist[i * hl + hl - 1];
        std::fill_n(angles.begin() + static_cast<std::ptrdiff_t>(i * dims.block_length), dims.block_length, last);
    }
    return {dims.num_antennas, dims.block_length, hl, std::move(angles), std::move(hist)};
}

// Residuals S(k,t) = mui(k,t) for the whole block, computed from scratch.
inline ResidualState init_residuals(const ChannelRealization &H, const PhaseSchedule &theta, const SymbolFrame &U) {
    detail::check_consistent(H, theta);
    detail::check_consistent(H, U);
    const auto &d = H.dims();
    const std::size_t hl = d.history_length();
    const std::size_t span = d.block_length + hl;

    // phasor[i][hl + t] = exp(j theta_i[t]) for t in [-hl, T)
    std::vector<cplx> phasor(d.num_antennas * span);
    for (std::size_t i = 0; i < d.num_antennas; ++i)
        for (std::size_t j = 0; j < span; ++j)
            phasor[i * span + j] =
                std::polar(1.0, theta.angle(i, static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(hl)));

    ResidualState state{d.num_users, d.block_length, std::vector<cplx>(d.num_users * d.block_length), 0.0};
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(d.num_antennas));
    for (std::size_t k = 0; k < d.num_users; ++k) {
        for (std::size_t t = 0; t < d.block_length; ++t) {
            cplx acc = 0.0;
            for (std::size_t i = 0; i < d.num_antennas; ++i) {
                const cplx *h = H.link(k, i).data();
                const cplx *p = phasor.data() + i * span + hl + t;
                for (std::size_t l = 0; l < d.channel_taps; ++l)
                    acc += h[l] * *(p - l);
            }
            state(k, t) = acc * inv_sqrt_n - U.target(k, t);
        }
    }
    state.objective = state.sum_of_squares();
    return state;
}

// Minimizer of f over theta_r[q] alone, searched over the arc selected by
// config.arc. Returns the current angle when f does not depend on theta_r[q].
inline double coordinate_update(std::size_t r, std::size_t q, const ChannelRealization &H, const PhaseSchedule &theta,
                                const ResidualState &state, const PrecoderConfig &config,
                                detail::UpdateRule rule = detail::UpdateRule::closed_form) {
    const auto &d = H.dims();
    if (r >= d.num_antennas || q >= d.block_length)
        throw std::out_of_range("coordinate_update: (antenna, time) index out of range");
    const double previous = theta.previous_angle(r, q);
    const double current = theta.angle_at(r, q);
    const auto taps = detail::pack_taps(H, r);
    const std::size_t n = detail::window_length(d, q) * d.num_users;
    const cplx z = detail::update_direction(detail::correlate(taps.data(), state, q, n),
                                            detail::window_gain(taps.data(), n),
                                            1.0 / std::sqrt(static_cast<double>(d.num_antennas)),
                                            std::polar(1.0, previous), std::polar(1.0, current));
    if (z == cplx(0.0, 0.0))
        return current;
    const bool has_next = q + 1 < d.block_length;
    const double forward = has_next ? detail::wrap_angle(theta.angle_at(r, q + 1) - previous) : 0.0;
    const double omega = detail::choose_increment(detail::principal_arg(z), config, has_next, forward,
                                                  detail::wrap_angle(current - previous));
    return previous + detail::apply_rule(omega, config.alpha * std::numbers::pi, rule);
}

// Moves theta_r[q] to new_angle and patches the touched residuals and the
// objective.
inline void apply_update(std::size_t r, std::size_t q, double new_angle, const ChannelRealization &H,
                         PhaseSchedule &theta, ResidualState &state) {
    const auto &d = H.dims();
    if (r >= d.num_antennas || q >= d.block_length)
        throw std::out_of_range("apply_update: (antenna, time) index out of range");
    double &angle = theta.angle_at(r, q);
    if (new_angle == angle)
        return;
    const cplx step =
        (std::polar(1.0, new_angle) - std::polar(1.0, angle)) / std::sqrt(static_cast<double>(d.num_antennas));
    const auto taps = detail::pack_taps(H, r);
    const std::size_t n = detail::window_length(d, q) * d.num_users;
    state.objective += detail::shift_change(detail::correlate(taps.data(), state, q, n),
                                            detail::window_gain(taps.data(), n), step);
    detail::shift_residuals(taps.data(), state, q, n, step);
    angle = new_angle;
}

// Called after every complete pass with the pass number (from 1).
using IterationObserver = std::function<void(std::size_t, const PhaseSchedule &, const ResidualState &)>;

// Runs the cyclic coordinate descent from the constant extension of the
// history (all-zero when not given).
inline SolveResult solve(const ChannelRealization &H, const SymbolFrame &U, const PrecoderConfig &config,
                         std::optional<std::vector<double>> history = std::nullopt,
                         detail::UpdateRule rule = detail::UpdateRule::closed_form,
                         const IterationObserver &observer = {}) {
    config.validate();
    detail::check_consistent(H, U);
    const auto &d = H.dims();
    const std::size_t N = d.num_antennas, M = d.num_users, L = d.channel_taps, T = d.block_length;

    SolveResult out;
    out.schedule = init_schedule(d, std::move(history), config);
    out.state = init_residuals(H, out.schedule, U);
    auto &theta = out.schedule;
    auto &state = out.state;
    auto &report = out.report;
    report.initial_objective = state.objective;

    const double bound = config.alpha * std::numbers::pi;
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(N));
    const cplx turn_up = std::polar(1.0, bound), turn_down = std::conj(turn_up);

    // Packed taps per antenna, and the window gains sum |h_{k,r}[l]|^2 for
    // every window length.
    std::vector<cplx> taps(N * L * M);
    std::vector<double> gains(N * (L + 1), 0.0);
    for (std::size_t r = 0; r < N; ++r) {
        const auto packed = detail::pack_taps(H, r);
        std::copy(packed.begin(), packed.end(), taps.begin() + static_cast<std::ptrdiff_t>(r * L * M));
        for (std::size_t len = 1; len <= L; ++len)
            gains[r * (L + 1) + len] = detail::window_gain(taps.data() + r * L * M, len * M);
    }

    // exp(j theta_r[t]) for the block, plus exp(j theta_r[-1]).
    std::vector<cplx> phasor(N * T);
    std::vector<cplx> boundary(N);
    for (std::size_t r = 0; r < N; ++r) {
        boundary[r] = std::polar(1.0, theta.previous_angle(r, 0));
        for (std::size_t t = 0; t < T; ++t)
            phasor[r * T + t] = std::polar(1.0, theta.angle_at(r, t));
    }

    double last = state.objective;
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        for (std::size_t q = 0; q < T; ++q) {
            const std::size_t len = detail::window_length(d, q);
            const std::size_t n = len * M;
            const bool has_next = q + 1 < T;
            for (std::size_t r = 0; r < N; ++r) {
                const cplx *h = taps.data() + r * L * M;
                const cplx prev = q == 0 ? boundary[r] : phasor[r * T + q - 1];
                cplx &cur = phasor[r * T + q];
                const double previous = theta.previous_angle(r, q);
                double &angle = theta.angle_at(r, q);
                const double current_offset = detail::wrap_angle(angle - previous);

                const cplx cross = detail::correlate(h, state, q, n);
                const double gain = gains[r * (L + 1) + len];
                const cplx z = detail::update_direction(cross, gain, inv_sqrt_n, prev, cur);
                double omega;
                cplx next;
                if (z == cplx(0.0, 0.0)) {
                    // f is flat in this angle: keep the transmitted phasor.
                    omega = std::clamp(current_offset, -bound, bound);
                    next = prev * std::polar(1.0, omega);
                } else {
                    const double c = detail::principal_arg(z);
                    const double forward = has_next ? detail::wrap_angle(theta.angle_at(r, q + 1) - previous) : 0.0;
                    omega = detail::choose_increment(c, config, has_next, forward, current_offset);
                    omega = detail::apply_rule(omega, bound, rule);
                    // exp(-jc) is conj(z)/|z|; the clamped ends are fixed rotations.
                    if (omega == -c)
                        next = prev * std::conj(z) / std::sqrt(std::norm(z));
                    else if (omega == bound)
                        next = prev * turn_up;
                    else if (omega == -bound)
                        next = prev * turn_down;
                    else
                        next = prev * std::polar(1.0, omega);
                }

                const double before = state.objective;
                const cplx step = (next - cur) * inv_sqrt_n;
                const double change = detail::shift_change(cross, gain, step);
                detail::shift_residuals(h, state, q, n, step);
                state.objective += change;
                if (change > 1e-12 * std::max(before, 1.0)) {
                    report.sub_iteration_monotone = false;
                    report.worst_sub_iteration_increase = std::max(report.worst_sub_iteration_increase, change);
                }
                angle = previous + omega;
                cur = next;
            }
        }
        // Drop the rounding accumulated by the incremental updates.
        state.objective = state.sum_of_squares();
        report.objective_per_iteration.push_back(state.objective);
        report.iterations_run = iter + 1;
        if (observer)
            observer(iter + 1, theta, state);
        const double decrease = last - state.objective;
        const bool settled = decrease <= config.rel_tolerance * last;
        last = state.objective;
        if (settled)
            break;
    }
    report.final_objective = state.objective;
    return out;
}

} // namespace cesim

#endif
