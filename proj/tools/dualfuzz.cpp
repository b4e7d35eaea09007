// Copyright 2026 The dualfuzz Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: run, compare, sweep-alpha, oracle.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dualfuzz/harness.hpp"
#include "dualfuzz/oracle.hpp"

namespace fs = std::filesystem;
using namespace dualfuzz;

namespace {

struct Overrides {
    std::string config_file;
    std::string preset;
    std::optional<std::string> env, strategy, partitions;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> tests, db_size, window;
    std::optional<double> alpha, theta;
    std::string out = "out";
};

void add_common(CLI::App* cmd, Overrides& o, bool with_strategy)
{
    cmd->add_option("--config", o.config_file, "key = value configuration file");
    cmd->add_option("--preset", o.preset, "acasxu-like, coopnavi-like, bipedal-like, rlcarla-like, ilcarla-like");
    cmd->add_option("--env", o.env, "intercept2d, corridor_nav or walker1d");
    if (with_strategy)
        cmd->add_option("--strategy", o.strategy, "dual-space, random or sensitivity-only");
    cmd->add_option("--seed", o.seed, "root random seed");
    cmd->add_option("--tests", o.tests, "loop iterations after initialization");
    cmd->add_option("--db-size", o.db_size, "initial database size");
    cmd->add_option("--alpha", o.alpha, "directional-branch probability");
    cmd->add_option("--theta", o.theta, "efficiency threshold for local mode");
    cmd->add_option("--window", o.window, "efficiency window length");
    cmd->add_option("--partitions", o.partitions, "cells per axis: one count or a comma list");
    cmd->add_option("--out", o.out, "output directory")->capture_default_str();
}

CampaignConfig build_config(const Overrides& o)
{
    CampaignConfig cfg;
    if (!o.preset.empty())
        apply_preset(cfg, o.preset);
    if (!o.config_file.empty())
        load_config_file(cfg, o.config_file);
    if (o.env)
        cfg.env = *o.env;
    if (o.strategy)
        cfg.strategy = parse_strategy(*o.strategy);
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.tests)
        cfg.n_tests = *o.tests;
    if (o.db_size)
        cfg.n_scenarios = *o.db_size;
    if (o.alpha)
        cfg.generator.alpha = *o.alpha;
    if (o.theta)
        cfg.theta = *o.theta;
    if (o.window)
        cfg.window = *o.window;
    if (o.partitions)
        set_config_value(cfg, "partitions", *o.partitions);
    cfg.out = o.out;
    cfg.validate();
    return cfg;
}

void print_summary(const CampaignReport& r)
{
    const auto& d = r.diversity;
    std::printf("%-16s critical=%llu coverage=%llu distance=%s traj=%s (log %s) wall=%.3fs\n",
                to_string(r.config.strategy), static_cast<unsigned long long>(d.critical_count),
                static_cast<unsigned long long>(d.coverage),
                d.distance ? format_number(*d.distance).c_str() : "n/a", format_number(d.trajectory).c_str(),
                format_number(d.log_trajectory).c_str(), r.wall_seconds);
    for (const auto& w : d.warnings)
        std::printf("  warning: %s\n", w.c_str());
}

void write_metrics(const std::vector<ComparisonRow>& rows, const std::string& dir)
{
    fs::create_directories(dir);
    std::ofstream f(fs::path(dir) / "metrics.csv");
    write_metrics_csv(f, rows);
    write_metrics_csv(std::cout, rows);
}

int cmd_run(const Overrides& o)
{
    const auto cfg = build_config(o);
    CampaignArtifacts a;
    const auto rep = run_campaign(cfg, &a);
    write_campaign_outputs(rep, a, cfg.out);
    print_summary(rep);
    std::printf("wrote %s\n", cfg.out.c_str());
    return 0;
}

int cmd_compare(const Overrides& o)
{
    auto cfg = build_config(o);
    std::vector<CampaignReport> reports;
    for (auto s : {Strategy::DualSpace, Strategy::Random, Strategy::SensitivityOnly}) {
        cfg.strategy = s;
        CampaignArtifacts a;
        reports.push_back(run_campaign(cfg, &a));
        write_campaign_outputs(reports.back(), a, (fs::path(cfg.out) / to_string(s)).string());
        print_summary(reports.back());
    }
    write_metrics(compare_campaigns(reports), cfg.out);
    return 0;
}

int cmd_sweep(const Overrides& o)
{
    const auto cfg = build_config(o);
    write_metrics(sweep_alpha(cfg), cfg.out);
    return 0;
}

int cmd_oracle(const std::string& env, std::size_t resolution, std::size_t samples, std::uint64_t seed,
               const std::string& out)
{
    if (!out.empty() && fs::path(out).has_parent_path())
        fs::create_directories(fs::path(out).parent_path());
    std::ofstream file;
    if (!out.empty()) {
        file.open(out);
        if (!file)
            throw std::runtime_error("cannot write " + out);
    }
    std::ostream& os = out.empty() ? std::cout : file;
    if (env == "intercept2d") {
        const auto map = intercept_slice_map(resolution);
        write_slice_map(os, map);
        std::fprintf(stderr, "intercept2d slice: %zu x %zu, critical fraction %s\n", map.resolution,
                     map.resolution, format_number(map.critical_fraction()).c_str());
    } else {
        const auto mc = monte_carlo_critical_measure(*make_environment(env), samples, seed);
        os << "# dualfuzz oracle " << env << " constants_version " << kConstantsVersion << '\n';
        os << "samples " << mc.samples << "\ncritical " << mc.critical << "\nfraction "
           << format_number(mc.fraction()) << '\n';
        std::fprintf(stderr, "%s: critical fraction %s over %zu samples\n", env.c_str(),
                     format_number(mc.fraction()).c_str(), mc.samples);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dual-space guided fuzz testing of decision-making agents"};
    app.require_subcommand(1);

    Overrides run_o, cmp_o, sweep_o;
    auto* run = app.add_subcommand("run", "run one campaign");
    add_common(run, run_o, true);
    auto* cmp = app.add_subcommand("compare", "run every strategy on one configuration");
    add_common(cmp, cmp_o, false);
    auto* sweep = app.add_subcommand("sweep-alpha", "sweep alpha over {0, 0.2, ..., 1}");
    add_common(sweep, sweep_o, false);

    std::string oracle_env = "intercept2d";
    std::size_t resolution = kSliceResolution;
    std::size_t samples = 10000;
    std::uint64_t oracle_seed = 1;
    std::string oracle_out;
    auto* oracle = app.add_subcommand("oracle", "regenerate brute-force environment oracles");
    oracle->add_option("--env", oracle_env, "environment")->capture_default_str();
    oracle->add_option("--resolution", resolution, "grid points per slice axis")->capture_default_str();
    oracle->add_option("--tests", samples, "Monte-Carlo samples for non-slice environments")->capture_default_str();
    oracle->add_option("--seed", oracle_seed, "Monte-Carlo seed")->capture_default_str();
    oracle->add_option("--out", oracle_out, "output file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run)
            return cmd_run(run_o);
        if (*cmp)
            return cmd_compare(cmp_o);
        if (*sweep)
            return cmd_sweep(sweep_o);
        if (*oracle)
            return cmd_oracle(oracle_env, resolution, samples, oracle_seed, oracle_out);
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
