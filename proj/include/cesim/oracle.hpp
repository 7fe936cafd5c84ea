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

#ifndef CESIM_ORACLE_HPP
#define CESIM_ORACLE_HPP

#include "model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

// Slow reference evaluations used by the tests and by `ce-sim selfcheck`.
// Nothing here calls into the solver or the rate code: transmit sequences
// are built explicitly and convolved, determinants are expanded by
// cofactors, and per-angle minima come from brute-force grids.

namespace cesim::oracle {

inline cplx unit_phasor(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Transmit samples exp(j theta_i[t]) for t = -(L-1) .. T-1, oldest first.
inline std::vector<cplx> transmit_sequence(const PhaseSchedule &theta, std::size_t i) {
    const auto hl = static_cast<std::ptrdiff_t>(theta.history_length());
    const auto T = static_cast<std::ptrdiff_t>(theta.block_length());
    std::vector<cplx> x;
    for (std::ptrdiff_t t = -hl; t < T; ++t)
        x.push_back(unit_phasor(theta.angle(i, t)));
    return x;
}

// Noise-free received sample by explicit FIR convolution of each antenna's
// transmit sequence.
inline cplx received(const ChannelRealization &H, const PhaseSchedule &theta, std::size_t k, std::size_t t) {
    const auto &d = H.dims();
    const std::size_t hl = d.channel_taps - 1;
    cplx acc = 0.0;
    for (std::size_t i = 0; i < d.num_antennas; ++i) {
        const auto x = transmit_sequence(theta, i);
        for (std::size_t l = 0; l < d.channel_taps; ++l)
            acc += H(k, i, l) * x[hl + t - l];
    }
    return acc / std::sqrt(static_cast<double>(d.num_antennas));
}

inline double objective(const ChannelRealization &H, const PhaseSchedule &theta, const SymbolFrame &U) {
    const auto &d = H.dims();
    double f = 0.0;
    for (std::size_t k = 0; k < d.num_users; ++k)
        for (std::size_t t = 0; t < d.block_length; ++t)
            f += std::norm(received(H, theta, k, t) - std::sqrt(U.energy(k)) * U.symbol(k, t));
    return f;
}

// Residuals [k][t] recomputed from scratch.
inline std::vector<cplx> residuals(const ChannelRealization &H, const PhaseSchedule &theta, const SymbolFrame &U) {
    const auto &d = H.dims();
    std::vector<cplx> s;
    for (std::size_t k = 0; k < d.num_users; ++k)
        for (std::size_t t = 0; t < d.block_length; ++t)
            s.push_back(received(H, theta, k, t) - std::sqrt(U.energy(k)) * U.symbol(k, t));
    return s;
}

// The part of f that depends on theta_r[q]: over the residuals (k, t) with
// q <= t < q + L, S(k,t) = rest + tap * exp(j theta_r[q]). Everything else
// in f is constant in this angle.
struct VisitLandscape {
    std::vector<cplx> rest;
    std::vector<cplx> tap;

    [[nodiscard]] double value(double angle) const {
        const cplx p = unit_phasor(angle);
        double v = 0.0;
        for (std::size_t j = 0; j < rest.size(); ++j)
            v += std::norm(rest[j] + tap[j] * p);
        return v;
    }

    // Scale of the local terms, used for relative tolerances.
    [[nodiscard]] double magnitude() const {
        double m = 0.0;
        for (std::size_t j = 0; j < rest.size(); ++j)
            m += std::norm(rest[j]) + std::norm(tap[j]);
        return m;
    }
};

inline VisitLandscape landscape(const ChannelRealization &H, const PhaseSchedule &theta, const SymbolFrame &U,
                                std::size_t r, std::size_t q) {
    const auto &d = H.dims();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d.num_antennas));
    VisitLandscape out;
    for (std::size_t k = 0; k < d.num_users; ++k) {
        for (std::size_t t = q; t < d.block_length && t < q + d.channel_taps; ++t) {
            cplx rest = 0.0;
            for (std::size_t i = 0; i < d.num_antennas; ++i)
                for (std::size_t l = 0; l < d.channel_taps; ++l) {
                    if (i == r && t - q == l)
                        continue;
                    const auto when = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(l);
                    rest += H(k, i, l) * unit_phasor(theta.angle(i, when));
                }
            out.rest.push_back(rest * scale - std::sqrt(U.energy(k)) * U.symbol(k, t));
            out.tap.push_back(H(k, r, t - q) * scale);
        }
    }
    return out;
}

// Circular distance between two angles, in [0, pi].
inline double circular_distance(double a, double b) {
    const double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
    return std::min(d, 2.0 * std::numbers::pi - d);
}

struct GridMinimum {
    double value = std::numeric_limits<double>::infinity();
    double angle = 0.0;
    std::size_t admissible_points = 0;
};

// Minimum of the landscape over `points` uniform angles base + omega,
// omega in [lo, hi], skipping those rejected by `admissible(angle)`.
template <typename Admissible>
GridMinimum grid_minimum(const VisitLandscape &land, double base, double lo, double hi, std::size_t points,
                         Admissible &&admissible) {
    if (points < 2)
        throw std::invalid_argument("grid_minimum: need at least two points");
    GridMinimum best;
    for (std::size_t g = 0; g < points; ++g) {
        const double angle = base + lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(points - 1);
        if (!admissible(angle))
            continue;
        ++best.admissible_points;
        const double v = land.value(angle);
        if (v < best.value) {
            best.value = v;
            best.angle = angle;
        }
    }
    return best;
}

inline GridMinimum grid_minimum(const VisitLandscape &land, double base, double lo, double hi, std::size_t points) {
    return grid_minimum(land, base, lo, hi, points, [](double) { return true; });
}

// Determinant by Laplace expansion along the first row. O(n!), for n <= 6.
inline cplx cofactor_determinant(const std::vector<cplx> &a, std::size_t n) {
    if (a.size() != n * n)
        throw std::invalid_argument("cofactor_determinant: size mismatch");
    if (n == 0)
        return 1.0;
    if (n == 1)
        return a[0];
    cplx det = 0.0;
    std::vector<cplx> minor((n - 1) * (n - 1));
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t m = 0;
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (j != col)
                    minor[m++] = a[i * n + j];
        const double sign = col % 2 == 0 ? 1.0 : -1.0;
        det += sign * a[col] * cofactor_determinant(minor, n - 1);
    }
    return det;
}

// [log2 E - (1/T) log2 det(cov + I/snr)]^+ with a cofactor determinant.
inline double rate_bound(double energy, const Eigen::MatrixXcd &cov, double snr) {
    const auto n = static_cast<std::size_t>(cov.rows());
    std::vector<cplx> a(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a[i * n + j] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + (i == j ? 1.0 / snr : 0.0);
    const double det = cofactor_determinant(a, n).real();
    return std::max(0.0, std::log2(energy) - std::log2(det) / static_cast<double>(n));
}

} // namespace cesim::oracle

#endif
