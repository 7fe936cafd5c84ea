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

#ifndef CESIM_CHANNEL_HPP
#define CESIM_CHANNEL_HPP

#include "model.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

// Seeded random channels and symbol frames.
//
// Every draw is a pure function of (stream key, element index): a Philox
// 4x32-10 block cipher maps the element index to 128 random bits, which a
// Box-Muller transform turns into one circularly-symmetric complex Gaussian.
// No generator state is carried between draws, so the values a task sees do
// not depend on which thread runs it or in which order.

namespace cesim {

// Identifies one independent random stream.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    friend bool operator==(const SeedSpec &, const SeedSpec &) = default;
};

namespace detail {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Philox4x32 with 10 rounds (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{m0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{m1} * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

// Uniform in (0, 1] from the top 53 bits.
constexpr double unit_open_closed(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

} // namespace detail

// Deterministic counter-based source of complex Gaussians.
class GaussianStream {
  public:
    explicit GaussianStream(const SeedSpec &seed) {
        const std::uint64_t k = detail::mix64(detail::mix64(seed.master_seed) ^ seed.stream_id);
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    // Element `index` of the stream: CN(0, variance).
    [[nodiscard]] cplx complex_normal(std::uint64_t index, double variance = 1.0) const {
        const auto r = detail::philox4x32(
            {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x243F6A88u, 0x85A308D3u},
            key_);
        const std::uint64_t a = (std::uint64_t{r[0]} << 32) | r[1];
        const std::uint64_t b = (std::uint64_t{r[2]} << 32) | r[3];
        // |z|^2 is exponential with mean `variance`; the phase is uniform.
        const double radius = std::sqrt(-variance * std::log(detail::unit_open_closed(a)));
        const double phase = 2.0 * std::numbers::pi * detail::unit_open_closed(b);
        return std::polar(radius, phase);
    }

  private:
    std::array<std::uint32_t, 2> key_{};
};

// Stream identifiers for the Monte-Carlo tasks. Each (kind, indices) tuple
// maps to its own stream, so channels and frames never share draws.
enum class StreamKind : std::uint64_t { channel = 1, symbols = 2, custom = 3 };

inline SeedSpec derive_seed(std::uint64_t master_seed, StreamKind kind, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t id = detail::mix64(static_cast<std::uint64_t>(kind));
    id = detail::mix64(id ^ a);
    id = detail::mix64(id ^ (b + 0x632BE59BD9B4E019ULL));
    return {master_seed, id};
}

// i.i.d. Rayleigh taps with a uniform power delay profile: every h_{k,i}[l]
// is CN(0, 1/L).
inline ChannelRealization sample_channel(const Dimensions &dims, const SeedSpec &seed) {
    dims.validate();
    const GaussianStream stream(seed);
    const double variance = 1.0 / static_cast<double>(dims.channel_taps);
    std::vector<cplx> taps(dims.num_users * dims.num_antennas * dims.channel_taps);
    for (std::size_t n = 0; n < taps.size(); ++n)
        taps[n] = stream.complex_normal(n, variance);
    return {dims, std::move(taps)};
}

// u_k[t] i.i.d. CN(0, 1); energies default to 1 and are set by the caller.
inline SymbolFrame sample_symbols(const Dimensions &dims, const SeedSpec &seed) {
    dims.validate();
    const GaussianStream stream(seed);
    std::vector<cplx> symbols(dims.num_users * dims.block_length);
    for (std::size_t n = 0; n < symbols.size(); ++n)
        symbols[n] = stream.complex_normal(n);
    return {dims.num_users, dims.block_length, std::move(symbols), std::vector<double>(dims.num_users, 1.0)};
}

} // namespace cesim

#endif
