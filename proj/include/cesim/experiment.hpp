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

#ifndef CESIM_EXPERIMENT_HPP
#define CESIM_EXPERIMENT_HPP

#include "rate.hpp"

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Sweep configuration and CSV output for `ce-sim run`.
//
// Config format: one `key=value` per line, `#` starts a comment, lists are
// comma-separated. Example:
//
//     M=5
//     L=4
//     T=64
//     N=20,40,80
//     alpha=1.0,0.5
//     target_rate=1.0
//     seed=42
//     out=fig3.csv

namespace cesim {

// How minimum-power mode searches: energy_outer runs min_power_over_energy,
// bisection runs min_power_for_rate. Both target the same quantity.
enum class PowerSearch { energy_outer, bisection };

struct ExperimentSpec {
    std::size_t num_users = 0;     // M
    std::size_t channel_taps = 0;  // L
    std::size_t block_length = 0;  // T
    std::vector<std::size_t> antennas; // N sweep
    std::vector<double> alphas;        // alpha sweep
    std::optional<double> target_rate; // minimum-power mode
    std::vector<double> snr_db;        // fixed-snr mode
    std::uint64_t seed = 0;
    std::string out; // empty: standard output

    std::size_t num_channels = 50;
    std::size_t frames = 0; // 0: max(200, 4T)
    std::size_t max_iterations = 5;
    double rel_tolerance = 1e-4;
    VisitArc arc = VisitArc::both_neighbors;
    EnergySearch energy{};
    PowerBracket bracket{};
    PowerSearch power_search = PowerSearch::energy_outer;
    std::size_t threads = 0; // 0: all processors

    [[nodiscard]] std::size_t frames_per_channel() const {
        return RateConfig{.frames_per_channel = frames}.frames(block_length);
    }

    [[nodiscard]] PrecoderConfig precoder(double alpha) const {
        return {alpha, max_iterations, rel_tolerance, arc};
    }

    // Resolved settings as key=value lines, in a fixed order.
    [[nodiscard]] std::vector<std::string> describe() const;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] inline void config_error(std::string_view key, const std::string &what) {
    throw std::invalid_argument("config key '" + std::string(key) + "': " + what);
}

inline std::vector<std::string_view> split_list(std::string_view key, std::string_view value) {
    std::vector<std::string_view> items;
    if (trim(value).empty())
        config_error(key, "empty value");
    std::size_t start = 0;
    while (true) {
        const auto comma = value.find(',', start);
        const auto item = trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
        if (item.empty())
            config_error(key, "empty list entry");
        items.push_back(item);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return items;
}

inline double parse_double(std::string_view key, std::string_view text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        config_error(key, "malformed number '" + std::string(text) + "'");
    return v;
}

inline std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        config_error(key, "expected a nonnegative integer, got '" + std::string(text) + "'");
    return v;
}

inline std::size_t parse_positive(std::string_view key, std::string_view text) {
    const auto v = parse_unsigned(key, text);
    if (v == 0)
        config_error(key, "must be positive");
    return static_cast<std::size_t>(v);
}

inline std::string format_double(const char *fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

} // namespace detail

// Parses and validates a config. Errors name the offending key.
inline ExperimentSpec parse_config(std::string_view text) {
    using namespace detail;
    std::map<std::string, std::string, std::less<>> entries;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        std::string_view line = text.substr(pos, end == text.npos ? text.npos : end - pos);
        pos = end == text.npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != line.npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == line.npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": missing key");
        if (!entries.emplace(std::string(key), std::string(trim(line.substr(eq + 1)))).second)
            config_error(key, "given more than once");
    }

    static const std::set<std::string, std::less<>> known = {
        "M",           "L",            "T",           "N",          "alpha",        "target_rate",
        "snr_db",      "seed",         "out",         "channels",   "frames",       "max_iterations",
        "rel_tolerance", "arc",        "energy_points", "energy_min", "energy_max", "energy_tolerance",
        "snr_low_db",  "snr_high_db",  "snr_width_db", "power_search", "threads"};
    for (const auto &[key, value] : entries)
        if (!known.contains(key))
            config_error(key, "unknown key");

    auto optional = [&](std::string_view key) -> std::optional<std::string_view> {
        const auto it = entries.find(key);
        if (it == entries.end())
            return std::nullopt;
        if (it->second.empty())
            config_error(key, "empty value");
        return std::string_view(it->second);
    };

    // Values that are present are checked first, so a bad value is reported
    // even when other required keys are absent.
    ExperimentSpec spec;
    if (auto v = optional("M"))
        spec.num_users = parse_positive("M", *v);
    if (auto v = optional("L"))
        spec.channel_taps = parse_positive("L", *v);
    if (auto v = optional("T"))
        spec.block_length = parse_positive("T", *v);
    if (auto v = optional("N"))
        for (auto item : split_list("N", *v))
            spec.antennas.push_back(parse_positive("N", item));
    if (auto v = optional("alpha"))
        for (auto item : split_list("alpha", *v)) {
            const double a = parse_double("alpha", item);
            if (!(a > 0.0 && a <= 1.0))
                config_error("alpha", "alpha out of (0,1]");
            spec.alphas.push_back(a);
        }
    if (auto v = optional("seed"))
        spec.seed = parse_unsigned("seed", *v);

    const auto target = optional("target_rate");
    const auto snr = optional("snr_db");
    if (target) {
        const double r = parse_double("target_rate", *target);
        if (!(r > 0.0))
            config_error("target_rate", "must be positive");
        spec.target_rate = r;
    }
    if (snr)
        for (auto item : split_list("snr_db", *snr))
            spec.snr_db.push_back(parse_double("snr_db", item));

    if (auto v = optional("out"))
        spec.out = std::string(*v);
    if (auto v = optional("channels"))
        spec.num_channels = parse_positive("channels", *v);
    if (auto v = optional("frames"))
        spec.frames = parse_positive("frames", *v);
    if (auto v = optional("max_iterations"))
        spec.max_iterations = parse_positive("max_iterations", *v);
    if (auto v = optional("rel_tolerance")) {
        spec.rel_tolerance = parse_double("rel_tolerance", *v);
        if (spec.rel_tolerance < 0.0)
            config_error("rel_tolerance", "must be nonnegative");
    }
    if (auto v = optional("arc")) {
        if (*v == "both")
            spec.arc = VisitArc::both_neighbors;
        else if (*v == "backward")
            spec.arc = VisitArc::backward_only;
        else
            config_error("arc", "expected 'both' or 'backward'");
    }
    if (auto v = optional("energy_points")) {
        spec.energy.grid_points = parse_positive("energy_points", *v);
        if (spec.energy.grid_points < 2)
            config_error("energy_points", "need at least 2");
    }
    if (auto v = optional("energy_min"))
        spec.energy.min_energy = parse_double("energy_min", *v);
    if (auto v = optional("energy_max"))
        spec.energy.max_energy = parse_double("energy_max", *v);
    if (!(spec.energy.min_energy > 0.0 && spec.energy.max_energy > spec.energy.min_energy))
        config_error("energy_min", "need 0 < energy_min < energy_max");
    if (auto v = optional("energy_tolerance")) {
        spec.energy.log10_tolerance = parse_double("energy_tolerance", *v);
        if (!(spec.energy.log10_tolerance > 0.0))
            config_error("energy_tolerance", "must be positive");
    }
    if (auto v = optional("snr_low_db"))
        spec.bracket.low_db = parse_double("snr_low_db", *v);
    if (auto v = optional("snr_high_db"))
        spec.bracket.high_db = parse_double("snr_high_db", *v);
    if (!(spec.bracket.high_db > spec.bracket.low_db))
        config_error("snr_high_db", "need snr_low_db < snr_high_db");
    if (auto v = optional("snr_width_db")) {
        spec.bracket.width_db = parse_double("snr_width_db", *v);
        if (!(spec.bracket.width_db > 0.0))
            config_error("snr_width_db", "must be positive");
    }
    if (auto v = optional("power_search")) {
        if (*v == "energy")
            spec.power_search = PowerSearch::energy_outer;
        else if (*v == "bisection")
            spec.power_search = PowerSearch::bisection;
        else
            config_error("power_search", "expected 'energy' or 'bisection'");
    }
    if (auto v = optional("threads"))
        spec.threads = static_cast<std::size_t>(parse_unsigned("threads", *v));
    for (const char *key : {"M", "L", "T", "N", "alpha", "seed"})
        if (!entries.contains(key))
            config_error(key, "required key missing");
    if (target.has_value() == snr.has_value())
        config_error(target ? "snr_db" : "target_rate", "exactly one of target_rate and snr_db is required");
    return spec;
}

inline ExperimentSpec load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

inline std::vector<std::string> ExperimentSpec::describe() const {
    using detail::format_double;
    auto join = [](const auto &values, auto fmt) {
        std::string s;
        for (const auto &v : values)
            s += (s.empty() ? "" : ",") + fmt(v);
        return s;
    };
    auto g = [](double v) { return format_double("%.17g", v); };
    std::vector<std::string> lines = {
        "M=" + std::to_string(num_users),
        "L=" + std::to_string(channel_taps),
        "T=" + std::to_string(block_length),
        "N=" + join(antennas, [](std::size_t n) { return std::to_string(n); }),
        "alpha=" + join(alphas, g),
    };
    if (target_rate)
        lines.push_back("target_rate=" + g(*target_rate));
    else
        lines.push_back("snr_db=" + join(snr_db, g));
    lines.insert(lines.end(), {
                                  "seed=" + std::to_string(seed),
                                  "channels=" + std::to_string(num_channels),
                                  "frames=" + std::to_string(frames_per_channel()),
                                  "max_iterations=" + std::to_string(max_iterations),
                                  "rel_tolerance=" + g(rel_tolerance),
                                  std::string("arc=") + (arc == VisitArc::both_neighbors ? "both" : "backward"),
                                  "energy_points=" + std::to_string(energy.grid_points),
                                  "energy_min=" + g(energy.min_energy),
                                  "energy_max=" + g(energy.max_energy),
                                  "energy_tolerance=" + g(energy.log10_tolerance),
                                  "snr_low_db=" + g(bracket.low_db),
                                  "snr_high_db=" + g(bracket.high_db),
                                  "snr_width_db=" + g(bracket.width_db),
                                  std::string("power_search=") +
                                      (power_search == PowerSearch::energy_outer ? "energy" : "bisection"),
                              });
    return lines;
}

// One sweep point.
struct ExperimentRow {
    std::size_t num_antennas = 0;
    double alpha = 0.0;
    std::optional<double> snr_db; // minimum snr, or the fixed snr; empty when infeasible
    double energy = 0.0;
    double rate = 0.0;
    std::vector<std::string> diagnostics;
};

inline constexpr std::string_view csv_header = "N,M,L,T,alpha,snr_min_db,energy,rate_bpcu,seed";

inline std::string format_row(const ExperimentSpec &spec, const ExperimentRow &row) {
    using detail::format_double;
    return std::to_string(row.num_antennas) + ',' + std::to_string(spec.num_users) + ',' +
           std::to_string(spec.channel_taps) + ',' + std::to_string(spec.block_length) + ',' +
           format_double("%.6g", row.alpha) + ',' + (row.snr_db ? format_double("%.4f", *row.snr_db) : "inf") +
           ',' + format_double("%.6g", row.energy) + ',' + format_double("%.6f", row.rate) + ',' +
           std::to_string(spec.seed);
}

// Sweep points in output order: N outer, alpha, then snr (fixed-snr mode).
struct SweepPoint {
    std::size_t num_antennas;
    double alpha;
    std::optional<double> snr_db;
};

inline std::vector<SweepPoint> sweep_points(const ExperimentSpec &spec) {
    std::vector<SweepPoint> points;
    for (auto n : spec.antennas)
        for (double a : spec.alphas) {
            if (spec.target_rate)
                points.push_back({n, a, std::nullopt});
            else
                for (double s : spec.snr_db)
                    points.push_back({n, a, s});
        }
    return points;
}

// Evaluates one point. Every point draws its channels and frames from the
// same master seed, so points that differ only in alpha see identical
// random inputs.
inline ExperimentRow evaluate_point(const ExperimentSpec &spec, const SweepPoint &point, std::size_t threads) {
    const Dimensions dims{point.num_antennas, spec.num_users, spec.channel_taps, spec.block_length};
    ErgodicRateEvaluator eval(dims, spec.precoder(point.alpha), spec.num_channels, spec.frames_per_channel(),
                              spec.seed, threads);
    ExperimentRow row;
    row.num_antennas = point.num_antennas;
    row.alpha = point.alpha;
    if (spec.target_rate) {
        const auto r = spec.power_search == PowerSearch::energy_outer
                           ? min_power_over_energy(eval, *spec.target_rate, spec.energy, spec.bracket)
                           : min_power_for_rate(eval, *spec.target_rate, spec.energy, spec.bracket);
        row.snr_db = r.snr_db;
        row.energy = r.energy;
        row.rate = r.rate;
        row.diagnostics = r.diagnostics;
    } else {
        const auto r = optimize_symbol_energy(eval, db_to_linear(*point.snr_db), spec.energy);
        row.snr_db = point.snr_db;
        row.energy = r.energy;
        row.rate = r.rate;
    }
    return row;
}

struct SweepOutcome {
    std::vector<ExperimentRow> rows;
    std::size_t failed = 0;

    [[nodiscard]] bool complete() const { return failed == 0; }
};

// Runs every point and writes the CSV to `out`. Comment lines carry the
// resolved config, build id and start time; all other lines depend only on
// the config. `progress` receives one message per finished point.
inline SweepOutcome run_sweep(const ExperimentSpec &spec, std::ostream &out,
                              const std::function<void(const std::string &)> &progress = {}) {
    const std::size_t threads = resolve_threads(spec.threads);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);

    out << "# ce-sim run\n";
#ifdef CESIM_BUILD_ID
    out << "# build: " << CESIM_BUILD_ID << '\n';
#else
    out << "# build: unknown\n";
#endif
    out << "# started: " << stamp << '\n';
    for (const auto &line : spec.describe())
        out << "# config: " << line << '\n';
    out << "# rate_bpcu: per-user ergodic rate bound, averaged over users and channel draws\n";
    out << csv_header << '\n';

    SweepOutcome outcome;
    std::vector<std::string> notes;
    for (const auto &point : sweep_points(spec)) {
        std::string label = "N=" + std::to_string(point.num_antennas) + " alpha=" +
                            detail::format_double("%.6g", point.alpha);
        if (point.snr_db)
            label += " snr_db=" + detail::format_double("%.6g", *point.snr_db);
        try {
            auto row = evaluate_point(spec, point, threads);
            out << format_row(spec, row) << '\n';
            out.flush();
            for (const auto &d : row.diagnostics)
                notes.push_back(label + ": " + d);
            if (progress)
                progress(label + " -> " + format_row(spec, row));
            outcome.rows.push_back(std::move(row));
        } catch (const std::exception &e) {
            ++outcome.failed;
            notes.push_back(label + ": failed: " + e.what());
            if (progress)
                progress(label + " failed: " + e.what());
        }
    }
    for (const auto &n : notes)
        out << "# " << n << '\n';
    return outcome;
}

// run_sweep into spec.out (standard output when empty). I/O errors name
// the path.
inline SweepOutcome run_sweep_to_file(const ExperimentSpec &spec, std::ostream &fallback,
                                      const std::function<void(const std::string &)> &progress = {}) {
    if (spec.out.empty())
        return run_sweep(spec, fallback, progress);
    std::ofstream file(spec.out, std::ios::binary | std::ios::trunc);
    if (!file)
        throw std::runtime_error("cannot open output file '" + spec.out + "'");
    auto outcome = run_sweep(spec, file, progress);
    file.flush();
    if (!file)
        throw std::runtime_error("write failed for output file '" + spec.out + "'");
    return outcome;
}

} // namespace cesim

#endif
