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

// ce-sim: command-line front end.
//
//   ce-sim run --config sweep.cfg      minimum-power or fixed-snr sweep to CSV
//   ce-sim selfcheck                   oracle suites, nonzero exit on failure
//   ce-sim rate --N 32 --M 4 ...       one ergodic-rate evaluation

#include <cesim/experiment.hpp>
#include <cesim/selfcheck.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

int run_command(const std::string &config_path, std::optional<std::size_t> threads,
                const std::optional<std::string> &out, bool quiet) {
    auto spec = cesim::load_config(config_path);
    if (threads)
        spec.threads = *threads;
    if (out)
        spec.out = *out;
    auto progress = [&](const std::string &msg) {
        if (!quiet)
            std::cerr << "ce-sim: " << msg << '\n';
    };
    const auto outcome = cesim::run_sweep_to_file(spec, std::cout, progress);
    return outcome.complete() ? 0 : 1;
}

int selfcheck_command(std::uint64_t seed, const std::string &fault) {
    cesim::check::SelfcheckOptions opt;
    opt.seed = seed;
    if (fault == "flipped-branch")
        opt.rule = cesim::detail::UpdateRule::flipped_branch;
    else if (!fault.empty())
        throw std::invalid_argument("unknown fault '" + fault + "'");
    return cesim::check::run_selfcheck(opt, std::cout).passed() ? 0 : 1;
}

struct RateArgs {
    std::size_t N = 32, M = 4, L = 4, T = 32;
    double alpha = 1.0;
    double snr_db = 10.0;
    std::optional<double> energy;
    std::uint64_t seed = 1;
    std::size_t channels = 50;
    std::size_t frames = 0;
    std::size_t max_iterations = 5;
    std::size_t threads = 0;
};

int rate_command(const RateArgs &a) {
    const cesim::Dimensions dims{a.N, a.M, a.L, a.T};
    dims.validate();
    if (dims.underdetermined())
        std::cerr << "ce-sim: warning: fewer antennas than users (N < M)\n";
    const cesim::PrecoderConfig precoder{a.alpha, a.max_iterations};
    precoder.validate();
    const cesim::RateConfig rc{.snr = cesim::db_to_linear(a.snr_db), .frames_per_channel = a.frames,
                               .num_channels = a.channels};
    rc.validate();
    cesim::ErgodicRateEvaluator eval(dims, precoder, rc.num_channels, rc.frames(a.T), a.seed, a.threads);
    double energy = 0.0, rate = 0.0;
    if (a.energy) {
        energy = *a.energy;
        rate = eval.rate(energy, rc.snr);
    } else {
        const auto best = cesim::optimize_symbol_energy(eval, rc.snr);
        energy = best.energy;
        rate = best.rate;
    }
    std::printf("N=%zu M=%zu L=%zu T=%zu alpha=%g snr_db=%g channels=%zu frames=%zu seed=%llu\n", a.N, a.M, a.L, a.T,
                a.alpha, a.snr_db, rc.num_channels, rc.frames(a.T), static_cast<unsigned long long>(a.seed));
    std::printf("energy=%.6g%s\n", energy, a.energy ? "" : " (optimized)");
    std::printf("rate_bpcu=%.6f\n", rate);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Constant-envelope MU-MIMO precoding simulator"};
    app.require_subcommand(1);

    auto *run = app.add_subcommand("run", "Run a sweep described by a config file and write CSV");
    std::string config_path;
    std::optional<std::size_t> run_threads;
    std::optional<std::string> run_out;
    bool quiet = false;
    run->add_option("--config", config_path, "Config file (key=value lines)")->required();
    run->add_option("--threads", run_threads, "Worker threads (CE_SIM_THREADS overrides)");
    run->add_option("--out", run_out, "Output CSV path (overrides the config's out)");
    run->add_flag("--quiet", quiet, "No progress messages");

    auto *self = app.add_subcommand("selfcheck", "Run the oracle suites");
    std::uint64_t check_seed = cesim::check::SelfcheckOptions{}.seed;
    std::string fault;
    self->add_option("--seed", check_seed, "Seed for the random problems");
    self->add_option("--inject-fault", fault)->group(""); // negative control: flipped-branch

    auto *rate = app.add_subcommand("rate", "Evaluate the per-user ergodic rate at one point");
    RateArgs ra;
    rate->add_option("--N", ra.N, "Transmit antennas")->capture_default_str();
    rate->add_option("--M", ra.M, "Users")->capture_default_str();
    rate->add_option("--L", ra.L, "Channel taps")->capture_default_str();
    rate->add_option("--T", ra.T, "Block length")->capture_default_str();
    rate->add_option("--alpha", ra.alpha, "Phase-variation bound in units of pi")->capture_default_str();
    rate->add_option("--snr-db", ra.snr_db, "P_T / sigma^2 in dB")->capture_default_str();
    rate->add_option("--energy", ra.energy, "Common symbol energy E' (optimized when omitted)");
    rate->add_option("--seed", ra.seed, "Master seed")->capture_default_str();
    rate->add_option("--channels", ra.channels, "Channel draws")->capture_default_str();
    rate->add_option("--frames", ra.frames, "Symbol frames per channel (0: max(200, 4T))")->capture_default_str();
    rate->add_option("--max-iterations", ra.max_iterations, "Solver passes")->capture_default_str();
    rate->add_option("--threads", ra.threads, "Worker threads (CE_SIM_THREADS overrides)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return run_command(config_path, run_threads, run_out, quiet);
        if (*self)
            return selfcheck_command(check_seed, fault);
        if (*rate)
            return rate_command(ra);
    } catch (const std::exception &e) {
        std::cerr << "ce-sim: error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
