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

#pragma once

// Campaign driver: configuration, the guided generation loop and its two
// baselines, report/log/checkpoint persistence, and cross-campaign
// comparison.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "database.hpp"
#include "envs.hpp"
#include "generator.hpp"
#include "metrics.hpp"
#include "novelty.hpp"
#include "rng.hpp"
#include "space.hpp"

namespace dualfuzz {

inline constexpr const char* kVersion = "dualfuzz 0.1.0";

enum class Strategy { DualSpace, Random, SensitivityOnly };

inline const char* to_string(Strategy s)
{
    switch (s) {
    case Strategy::DualSpace: return "dual-space";
    case Strategy::Random: return "random";
    case Strategy::SensitivityOnly: return "sensitivity-only";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s)
{
    if (s == "dual-space" || s == "dual")
        return Strategy::DualSpace;
    if (s == "random")
        return Strategy::Random;
    if (s == "sensitivity-only" || s == "sensitivity")
        return Strategy::SensitivityOnly;
    throw InputError("unknown strategy '" + s + "' (expected dual-space, random or sensitivity-only)");
}

struct CampaignConfig {
    std::string env = "intercept2d";
    Strategy strategy = Strategy::DualSpace;
    std::uint64_t seed = 1;
    std::size_t n_scenarios = 100; // initial database size
    std::size_t n_tests = 1000;    // loop iterations, initialization excluded
    std::size_t window = 100;
    double theta = 0.1;
    std::optional<std::size_t> capacity; // base pool cap; 4 * n_scenarios when unset
    SensitivityPrior sensitivity_prior = SensitivityPrior::MaxObserved;
    std::vector<std::uint32_t> partitions; // one entry = same count on every axis; empty = environment default
    GeneratorConfig generator;
    NoveltyConfig novelty;
    NoveltyModelConfig model;
    std::optional<EnvScoringConfig> scoring; // environment default when unset
    DistanceNormalization distance_norm = DistanceNormalization::TwoOverQ;
    std::string out; // output directory; nothing is written when empty

    void validate() const
    {
        if (n_tests < 1)
            throw InputError("tests must be at least 1");
        if (n_scenarios < 1)
            throw InputError("db_size must be at least 1");
        if (window < 1)
            throw InputError("window must be at least 1");
        if (!(theta >= 0.0 && theta <= 1.0))
            throw InputError("theta must lie in [0, 1]");
        if (capacity && *capacity < 1)
            throw InputError("capacity must be at least 1");
        for (auto m : partitions)
            if (m < 1)
                throw InputError("partition counts must be positive");
        generator.validate();
        novelty.validate();
        model.validate();
        if (scoring)
            scoring->validate();
        make_environment(env); // rejects unknown names
    }
};

/// Default cells per axis for each built-in environment.
inline std::uint32_t default_partitions_for(const std::string& env)
{
    if (env == "intercept2d")
        return 20;
    if (env == "corridor_nav")
        return 3;
    return 4;
}

inline std::vector<std::uint32_t> resolve_partitions(const CampaignConfig& cfg, std::size_t dims)
{
    if (cfg.partitions.empty())
        return std::vector<std::uint32_t>(dims, default_partitions_for(cfg.env));
    if (cfg.partitions.size() == 1)
        return std::vector<std::uint32_t>(dims, cfg.partitions.front());
    if (cfg.partitions.size() != dims)
        throw InputError("partitions lists " + std::to_string(cfg.partitions.size()) + " counts for a " +
                         std::to_string(dims) + "-dimensional environment");
    return cfg.partitions;
}

struct Preset {
    std::string name;
    std::string env;
    std::size_t n_scenarios;
    std::size_t n_tests;
    std::size_t window;
    double theta;
};

/// Budgets and switching thresholds of the reference benchmark settings,
/// mapped onto the built-in environments.
inline const std::vector<Preset>& presets()
{
    static const std::vector<Preset> p = {
        {"acasxu-like", "intercept2d", 2000, 100000, 1000, 0.001},
        {"coopnavi-like", "corridor_nav", 1000, 10000, 1000, 0.13},
        {"bipedal-like", "walker1d", 1000, 1000, 100, 0.14},
        {"rlcarla-like", "corridor_nav", 100, 600, 100, 0.1},
        {"ilcarla-like", "corridor_nav", 100, 600, 100, 0.2},
    };
    return p;
}

inline void apply_preset(CampaignConfig& cfg, const std::string& name)
{
    for (const auto& p : presets()) {
        if (p.name == name) {
            cfg.env = p.env;
            cfg.n_scenarios = p.n_scenarios;
            cfg.n_tests = p.n_tests;
            cfg.window = p.window;
            cfg.theta = p.theta;
            return;
        }
    }
    throw InputError("unknown preset '" + name + "'");
}

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size())
        throw InputError("config key '" + key + "': '" + v + "' is not a number");
    return x;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v[0] != '-')
            x = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size())
        throw InputError("config key '" + key + "': '" + v + "' is not a nonnegative integer");
    return x;
}

inline std::vector<std::uint32_t> parse_partitions(const std::string& v)
{
    std::vector<std::uint32_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto n = parse_unsigned("partitions", trim(item));
        if (n < 1 || n > 0xffffffffULL)
            throw InputError("partition counts must be positive 32-bit integers");
        out.push_back(static_cast<std::uint32_t>(n));
    }
    if (out.empty())
        throw InputError("partitions must list at least one count");
    return out;
}

} // namespace detail

/// Sets one configuration key. Unknown keys are errors.
inline void set_config_value(CampaignConfig& cfg, const std::string& key, const std::string& value)
{
    using detail::parse_double;
    using detail::parse_unsigned;
    auto scoring = [&]() -> EnvScoringConfig& {
        if (!cfg.scoring)
            cfg.scoring = make_environment(cfg.env)->scoring();
        return *cfg.scoring;
    };
    if (key == "preset")
        apply_preset(cfg, value);
    else if (key == "env")
        cfg.env = value;
    else if (key == "strategy")
        cfg.strategy = parse_strategy(value);
    else if (key == "seed")
        cfg.seed = parse_unsigned(key, value);
    else if (key == "tests")
        cfg.n_tests = parse_unsigned(key, value);
    else if (key == "db_size")
        cfg.n_scenarios = parse_unsigned(key, value);
    else if (key == "window")
        cfg.window = parse_unsigned(key, value);
    else if (key == "theta")
        cfg.theta = parse_double(key, value);
    else if (key == "capacity")
        cfg.capacity = parse_unsigned(key, value);
    else if (key == "sensitivity_prior") {
        if (value == "zero")
            cfg.sensitivity_prior = SensitivityPrior::Zero;
        else if (value == "max_observed")
            cfg.sensitivity_prior = SensitivityPrior::MaxObserved;
        else
            throw InputError("sensitivity_prior must be 'zero' or 'max_observed'");
    } else if (key == "partitions")
        cfg.partitions = detail::parse_partitions(value);
    else if (key == "alpha")
        cfg.generator.alpha = parse_double(key, value);
    else if (key == "top_k")
        cfg.generator.top_k = parse_unsigned(key, value);
    else if (key == "perturb_scale")
        cfg.generator.perturb_scale = parse_double(key, value);
    else if (key == "hysteresis")
        cfg.generator.hysteresis = parse_unsigned(key, value);
    else if (key == "novelty_mode") {
        if (value == "quantile")
            cfg.novelty.mode = ThresholdMode::Quantile;
        else if (value == "fixed")
            cfg.novelty.mode = ThresholdMode::Fixed;
        else
            throw InputError("novelty_mode must be 'quantile' or 'fixed'");
    } else if (key == "tau")
        cfg.novelty.tau = parse_double(key, value);
    else if (key == "quantile")
        cfg.novelty.quantile = parse_double(key, value);
    else if (key == "novelty_window")
        cfg.novelty.window = parse_unsigned(key, value);
    else if (key == "components")
        cfg.model.components = parse_unsigned(key, value);
    else if (key == "subsample")
        cfg.model.subsample = parse_unsigned(key, value);
    else if (key == "gamma")
        scoring().gamma = parse_double(key, value);
    else if (key == "w_dist")
        scoring().w_dist = parse_double(key, value);
    else if (key == "w_vel")
        scoring().w_vel = parse_double(key, value);
    else if (key == "lambda_f")
        scoring().lambda_f = parse_double(key, value);
    else if (key == "horizon")
        scoring().horizon = static_cast<int>(parse_unsigned(key, value));
    else if (key == "distance_norm") {
        if (value == "two_over_q")
            cfg.distance_norm = DistanceNormalization::TwoOverQ;
        else if (value == "pair_mean")
            cfg.distance_norm = DistanceNormalization::PairMean;
        else
            throw InputError("distance_norm must be 'two_over_q' or 'pair_mean'");
    } else if (key == "out")
        cfg.out = value;
    else
        throw InputError("unknown config key '" + key + "'");
}

/// Reads `key = value` lines; '#' starts a comment.
inline void load_config(CampaignConfig& cfg, std::istream& is)
{
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
        set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline void load_config_file(CampaignConfig& cfg, const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw InputError("cannot open config file " + path);
    load_config(cfg, f);
}

/// One line of log.csv.
struct LogRow {
    std::uint64_t iteration = 0;
    std::string mode;   // local, global, uniform
    std::string branch; // local, directional, random, uniform
    bool fallback = false;
    std::optional<std::uint64_t> base_id;
    std::uint64_t cell = 0;
    Scenario scenario;
    double task_score = 0.0;
    bool critical = false;
    bool violation = false;
    bool timed_out = false;
    std::optional<double> log_prob;
    std::optional<double> threshold;
    std::optional<double> sensitivity;
    std::string admission;
    double efficiency = 0.0;
};

struct CampaignReport {
    CampaignConfig config;
    std::vector<std::uint32_t> partitions;
    std::uint64_t total_cells = 0;
    std::uint64_t critical_count = 0;      // loop iterations only
    std::uint64_t init_critical_count = 0; // database initialization
    std::uint64_t grid_critical = 0;       // sum of F over the grid
    std::uint64_t env_runs = 0;
    std::uint64_t local_iterations = 0;
    std::uint64_t global_iterations = 0;
    std::uint64_t directional_iterations = 0;
    std::uint64_t mode_switches = 0;
    std::uint64_t base_size = 0;
    std::uint64_t evictions = 0;
    std::uint64_t archive_size = 0;
    DiversityReport diversity;
    double wall_seconds = 0.0; // not serialized, so report.json stays reproducible
    std::vector<LogRow> log;
};

struct CampaignArtifacts {
    ScenarioDatabase database;
    SubspaceGrid grid;
    GmmNoveltyModel model;
};

namespace detail {

inline std::string json_string(const std::string& s)
{
    std::string o = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            o += '\\';
            o += c;
        } else if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            o += buf;
        } else {
            o += c;
        }
    }
    return o + "\"";
}

inline std::string json_number(double v) { return std::isfinite(v) ? format_number(v) : "null"; }

inline std::string json_number(const std::optional<double>& v) { return v ? json_number(*v) : "null"; }

inline std::string csv_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

} // namespace detail

/// Runs one campaign: database initialization, then n_tests guided (or
/// baseline) iterations, then the diversity metrics. Every random draw comes
/// from named substreams of cfg.seed.
inline CampaignReport run_campaign(const CampaignConfig& cfg, CampaignArtifacts* artifacts = nullptr)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto env = make_environment(cfg.env, cfg.scoring ? &*cfg.scoring : nullptr);
    const auto parts = resolve_partitions(cfg, env->bounds().size());
    const ScenarioSpec spec = env->make_spec(parts);

    RandomStream init_rng = substream(cfg.seed, "init");
    RandomStream select_rng = substream(cfg.seed, "select");
    RandomStream perturb_rng = substream(cfg.seed, "perturb");
    RandomStream explore_rng = substream(cfg.seed, "explore");
    RandomStream uniform_rng = substream(cfg.seed, "uniform");

    CampaignReport rep;
    rep.config = cfg;
    rep.partitions = parts;
    rep.total_cells = spec.total_cells();

    SubspaceGrid grid(spec);
    GmmNoveltyModel model(cfg.model);
    NoveltyThreshold threshold(cfg.novelty);
    WindowMonitor monitor(cfg.window, cfg.theta, cfg.generator.hysteresis);
    std::vector<Scenario> loop_critical;
    std::vector<Trajectory> loop_critical_traj;

    // Log-probabilities of the initial pool, keyed by scenario, patched into
    // the records once the pool exists.
    std::map<std::vector<double>, double> init_log_prob;
    const std::size_t capacity = cfg.capacity.value_or(4 * cfg.n_scenarios);
    ScenarioDatabase db = init_database(
        *env, spec, cfg.n_scenarios, init_rng, capacity, [&](const Scenario& s, const EpisodeResult& res) {
            ++rep.env_runs;
            grid.record_test(s, res.critical);
            if (res.critical)
                ++rep.init_critical_count;
            const auto traj = res.trajectory();
            if (model.fitted()) {
                const double lp = model.log_probability(traj);
                init_log_prob[s.params] = lp;
                threshold.push(lp);
            }
            model.fit_online(traj);
        });
    for (const auto& [params, lp] : init_log_prob)
        for (const auto& r : db.base())
            if (r.scenario.params == params)
                if (auto* rec = db.find(r.id)) {
                    rec->log_prob = lp;
                    break;
                }

    Mode previous = monitor.mode();
    for (std::uint64_t it = 0; it < cfg.n_tests; ++it) {
        LogRow row;
        row.iteration = it;
        row.efficiency = monitor.efficiency();

        Mode mode = Mode::LocalPerturbation;
        if (cfg.strategy == Strategy::DualSpace)
            mode = monitor.evaluate(row.efficiency);
        if (cfg.strategy != Strategy::Random && it > 0 && mode != previous)
            ++rep.mode_switches;
        previous = mode;

        std::optional<ScenarioRecord> base;
        Scenario s;
        if (cfg.strategy == Strategy::Random) {
            row.mode = "uniform";
            row.branch = "uniform";
            s = spec.sample_uniform(uniform_rng);
        } else if (mode == Mode::LocalPerturbation) {
            row.mode = to_string(Mode::LocalPerturbation);
            row.branch = to_string(Branch::Local);
            base = select_base_local(db, select_rng, cfg.sensitivity_prior);
            row.base_id = base->id;
            s = perturb_local(base->scenario, spec, cfg.generator, perturb_rng);
            ++rep.local_iterations;
        } else {
            row.mode = to_string(Mode::GlobalExploration);
            auto g = explore_global(grid, cfg.generator, explore_rng);
            row.branch = to_string(g.choice.branch);
            row.fallback = g.choice.fallback;
            if (g.choice.branch == Branch::Directional)
                ++rep.directional_iterations;
            s = std::move(g.scenario);
            ++rep.global_iterations;
        }

        EpisodeResult res;
        try {
            res = env->run(s);
        } catch (const std::exception& e) {
            throw std::runtime_error("environment failed at iteration " + std::to_string(it) + ": " + e.what());
        }
        ++rep.env_runs;

        const auto traj = res.trajectory();
        ScenarioRecord rec;
        rec.scenario = s;
        rec.task_score = res.task_score;
        rec.critical = res.critical;
        rec.origin = base ? Origin::Perturbed : Origin::Explored;
        if (base)
            rec.parent = base->id;
        rec.log_prob = model.log_probability(traj);
        row.log_prob = rec.log_prob;

        if (cfg.strategy == Strategy::Random) {
            if (res.critical)
                db.archive(s);
            row.admission = res.critical ? to_string(Admission::Archived) : "none";
        } else {
            const double tau = threshold.value();
            row.threshold = tau;
            double reference = db.mean_task_score();
            if (base) {
                const double sigma = sensitivity(base->task_score, res.task_score, base->scenario, s);
                db.observe_sensitivity(base->id, sigma);
                row.sensitivity = sigma;
                reference = base->task_score;
                // The same pair measurement is the child's first observation.
                rec.sensitivity = sigma;
                rec.sensitivity_observed = true;
            }
            row.admission = to_string(maybe_admit(db, rec, reference, tau));
        }
        threshold.push(*rec.log_prob);
        model.fit_online(traj);

        row.cell = grid.record_test(s, res.critical).label;
        monitor.push(res.critical);

        row.scenario = std::move(s);
        row.task_score = res.task_score;
        row.critical = res.critical;
        row.violation = res.any_violation();
        row.timed_out = res.timed_out;
        if (res.critical) {
            ++rep.critical_count;
            loop_critical.push_back(row.scenario);
            loop_critical_traj.push_back(traj);
        }
        rep.log.push_back(std::move(row));
    }

    rep.grid_critical = grid.total_critical();
    rep.base_size = db.size();
    rep.evictions = db.evictions();
    rep.archive_size = db.critical_set().size();

    auto& d = rep.diversity;
    d.critical_count = rep.critical_count;
    d.coverage = coverage(loop_critical, spec);
    d.distance = mean_pairwise_distance(loop_critical, spec.metric(), cfg.distance_norm);
    if (loop_critical.size() < 2)
        d.warnings.push_back("fewer than two critical scenarios: distance defined as 0");
    if (!d.distance)
        d.warnings.push_back("no metric dimension: distance omitted");
    const auto ts = trajectory_similarity(model, loop_critical_traj);
    d.trajectory = ts.empty ? 0.0 : ts.value;
    d.log_trajectory = ts.log_value;
    if (ts.empty)
        d.warnings.push_back("no critical trajectories: trajectory similarity defined as 0");

    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (artifacts) {
        artifacts->database = std::move(db);
        artifacts->grid = std::move(grid);
        artifacts->model = std::move(model);
    }
    return rep;
}

inline CampaignReport run_dual_space(CampaignConfig cfg)
{
    cfg.strategy = Strategy::DualSpace;
    return run_campaign(cfg);
}

inline CampaignReport run_random(CampaignConfig cfg)
{
    cfg.strategy = Strategy::Random;
    return run_campaign(cfg);
}

inline CampaignReport run_sensitivity_only(CampaignConfig cfg)
{
    cfg.strategy = Strategy::SensitivityOnly;
    return run_campaign(cfg);
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_config_json(std::ostream& os, const CampaignConfig& c, const std::vector<std::uint32_t>& parts)
{
    using detail::json_number;
    using detail::json_string;
    os << "{\"env\": " << json_string(c.env) << ", \"strategy\": " << json_string(to_string(c.strategy))
       << ", \"seed\": " << c.seed << ", \"db_size\": " << c.n_scenarios << ", \"tests\": " << c.n_tests
       << ", \"window\": " << c.window << ", \"theta\": " << json_number(c.theta)
       << ", \"capacity\": " << c.capacity.value_or(4 * c.n_scenarios) << ", \"sensitivity_prior\": "
       << json_string(to_string(c.sensitivity_prior)) << ", \"partitions\": [";
    for (std::size_t i = 0; i < parts.size(); ++i)
        os << (i ? ", " : "") << parts[i];
    os << "], \"alpha\": " << json_number(c.generator.alpha) << ", \"top_k\": " << c.generator.top_k
       << ", \"perturb_scale\": " << json_number(c.generator.perturb_scale)
       << ", \"hysteresis\": " << c.generator.hysteresis << ", \"novelty_mode\": "
       << json_string(c.novelty.mode == ThresholdMode::Quantile ? "quantile" : "fixed")
       << ", \"tau\": " << json_number(c.novelty.tau) << ", \"quantile\": " << json_number(c.novelty.quantile)
       << ", \"novelty_window\": " << c.novelty.window << ", \"components\": " << c.model.components
       << ", \"subsample\": " << c.model.subsample;
    const auto sc = c.scoring ? *c.scoring : make_environment(c.env)->scoring();
    os << ", \"gamma\": " << json_number(sc.gamma) << ", \"w_dist\": " << json_number(sc.w_dist)
       << ", \"w_vel\": " << json_number(sc.w_vel) << ", \"lambda_f\": " << json_number(sc.lambda_f)
       << ", \"horizon\": " << sc.horizon << ", \"distance_norm\": "
       << json_string(c.distance_norm == DistanceNormalization::TwoOverQ ? "two_over_q" : "pair_mean") << "}";
}

inline void write_report_json(std::ostream& os, const CampaignReport& r)
{
    using detail::json_number;
    using detail::json_string;
    const auto& d = r.diversity;
    os << "{\n";
    os << "  \"version\": " << json_string(kVersion) << ",\n";
    os << "  \"constants_version\": " << kConstantsVersion << ",\n";
    os << "  \"config\": ";
    write_config_json(os, r.config, r.partitions);
    os << ",\n";
    os << "  \"total_cells\": " << r.total_cells << ",\n";
    os << "  \"env_runs\": " << r.env_runs << ",\n";
    os << "  \"critical_count\": " << r.critical_count << ",\n";
    os << "  \"init_critical_count\": " << r.init_critical_count << ",\n";
    os << "  \"grid_critical\": " << r.grid_critical << ",\n";
    os << "  \"local_iterations\": " << r.local_iterations << ",\n";
    os << "  \"global_iterations\": " << r.global_iterations << ",\n";
    os << "  \"directional_iterations\": " << r.directional_iterations << ",\n";
    os << "  \"mode_switches\": " << r.mode_switches << ",\n";
    os << "  \"base_size\": " << r.base_size << ",\n";
    os << "  \"evictions\": " << r.evictions << ",\n";
    os << "  \"archive_size\": " << r.archive_size << ",\n";
    os << "  \"diversity\": {\"critical_count\": " << d.critical_count << ", \"coverage\": " << d.coverage
       << ", \"distance\": " << json_number(d.distance) << ", \"trajectory_similarity\": "
       << json_number(d.trajectory) << ", \"log_trajectory_similarity\": " << json_number(d.log_trajectory)
       << ", \"warnings\": [";
    for (std::size_t i = 0; i < d.warnings.size(); ++i)
        os << (i ? ", " : "") << json_string(d.warnings[i]);
    os << "]},\n";
    os << "  \"log\": \"log.csv\"\n";
    os << "}\n";
}

inline void write_log_csv(std::ostream& os, const CampaignReport& r)
{
    using detail::csv_number;
    os << "iteration,mode,branch,fallback,base_id,cell,task_score,critical,violation,timed_out,log_prob,threshold,"
          "sensitivity,admission,efficiency";
    for (std::size_t i = 0; i < r.partitions.size(); ++i)
        os << ",p" << i;
    os << '\n';
    for (const auto& row : r.log) {
        os << row.iteration << ',' << row.mode << ',' << row.branch << ',' << (row.fallback ? 1 : 0) << ','
           << (row.base_id ? std::to_string(*row.base_id) : "") << ',' << row.cell << ','
           << format_number(row.task_score) << ',' << (row.critical ? 1 : 0) << ',' << (row.violation ? 1 : 0)
           << ',' << (row.timed_out ? 1 : 0) << ',' << csv_number(row.log_prob) << ','
           << csv_number(row.threshold) << ',' << csv_number(row.sensitivity) << ',' << row.admission << ','
           << format_number(row.efficiency);
        for (double p : row.scenario.params)
            os << ',' << format_number(p);
        os << '\n';
    }
}

/// Database checkpoint: a header line, one line per base record, then one
/// line per archived critical scenario.
inline void write_database_jsonl(std::ostream& os, const ScenarioDatabase& db)
{
    using detail::json_number;
    auto params = [&](const Scenario& s) {
        std::string o = "[";
        for (std::size_t i = 0; i < s.size(); ++i)
            o += (i ? ", " : "") + format_number(s[i]);
        return o + "]";
    };
    os << "{\"type\": \"header\", \"version\": 1, \"next_id\": " << db.next_id() << ", \"capacity\": ";
    if (db.capacity())
        os << *db.capacity();
    else
        os << "null";
    os << ", \"evictions\": " << db.evictions() << "}\n";
    for (const auto& r : db.base()) {
        os << "{\"type\": \"base\", \"id\": " << r.id << ", \"params\": " << params(r.scenario)
           << ", \"task_score\": " << format_number(r.task_score) << ", \"critical\": "
           << (r.critical ? "true" : "false") << ", \"sensitivity\": " << format_number(r.sensitivity)
           << ", \"sensitivity_observed\": " << (r.sensitivity_observed ? "true" : "false")
           << ", \"log_prob\": " << json_number(r.log_prob) << ", \"origin\": \"" << to_string(r.origin)
           << "\", \"parent\": " << (r.parent ? std::to_string(*r.parent) : "null") << "}\n";
    }
    for (const auto& s : db.critical_set())
        os << "{\"type\": \"critical\", \"params\": " << params(s) << "}\n";
}

inline ScenarioDatabase read_database_jsonl(std::istream& is)
{
    using nlohmann::json;
    std::string line;
    std::optional<ScenarioDatabase> db;
    std::uint64_t next_id = 0;
    std::vector<ScenarioRecord> base;
    std::vector<Scenario> critical;
    int lineno = 0;
    auto origin_of = [](const std::string& s) {
        if (s == "initial")
            return Origin::Initial;
        if (s == "perturbed")
            return Origin::Perturbed;
        if (s == "explored")
            return Origin::Explored;
        throw InputError("database checkpoint: unknown origin '" + s + "'");
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        try {
            const auto j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                if (j.at("version").get<int>() != 1)
                    throw InputError("unsupported version");
                std::optional<std::size_t> cap;
                if (!j.at("capacity").is_null())
                    cap = j.at("capacity").get<std::size_t>();
                db.emplace(cap);
                next_id = j.at("next_id").get<std::uint64_t>();
            } else if (type == "base") {
                ScenarioRecord r;
                r.id = j.at("id").get<std::uint64_t>();
                r.scenario.params = j.at("params").get<std::vector<double>>();
                r.task_score = j.at("task_score").get<double>();
                r.critical = j.at("critical").get<bool>();
                r.sensitivity = j.at("sensitivity").get<double>();
                r.sensitivity_observed = j.at("sensitivity_observed").get<bool>();
                if (!j.at("log_prob").is_null())
                    r.log_prob = j.at("log_prob").get<double>();
                r.origin = origin_of(j.at("origin").get<std::string>());
                if (!j.at("parent").is_null())
                    r.parent = j.at("parent").get<std::uint64_t>();
                base.push_back(std::move(r));
            } else if (type == "critical") {
                critical.push_back(Scenario{j.at("params").get<std::vector<double>>()});
            } else {
                throw InputError("unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw InputError("database checkpoint line " + std::to_string(lineno) + ": " + e.what());
        } catch (const InputError& e) {
            throw InputError("database checkpoint line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!db)
        throw InputError("database checkpoint: missing header");
    db->restore(std::move(base), std::move(critical), next_id);
    return std::move(*db);
}

/// Grid state: one line per touched cell, ascending by label.
inline void write_grid_jsonl(std::ostream& os, const SubspaceGrid& grid)
{
    for (const auto& [label, st] : grid.touched()) {
        const auto idx = index_of(grid.spec(), label);
        os << "{\"label\": " << label << ", \"multi_index\": [";
        for (std::size_t i = 0; i < idx.k.size(); ++i)
            os << (i ? ", " : "") << idx.k[i];
        os << "], \"D\": " << st.density << ", \"F\": " << st.critical
           << ", \"K\": " << format_number(st.criticality()) << "}\n";
    }
}

/// Writes report.json, log.csv, db.jsonl, grid.jsonl and model.txt into dir.
inline void write_campaign_outputs(const CampaignReport& r, const CampaignArtifacts& a, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(fs::path(dir) / name);
        if (!f)
            throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
        return f;
    };
    {
        auto f = open("report.json");
        write_report_json(f, r);
    }
    {
        auto f = open("log.csv");
        write_log_csv(f, r);
    }
    {
        auto f = open("db.jsonl");
        write_database_jsonl(f, a.database);
    }
    {
        auto f = open("grid.jsonl");
        write_grid_jsonl(f, a.grid);
    }
    {
        auto f = open("model.txt");
        a.model.write(f);
    }
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonRow {
    std::string label;
    std::uint64_t critical_count = 0;
    std::uint64_t coverage = 0;
    std::optional<double> distance;
    double trajectory = 0.0;
    double log_trajectory = 0.0;
    double score = 0.0;
    // Relative to the first row; traj counts as improved when it drops.
    std::optional<double> improve_critical;
    std::optional<double> improve_coverage;
    std::optional<double> improve_distance;
    std::optional<double> improve_trajectory;
};

inline std::optional<double> relative_change(double x, double ref)
{
    if (ref == 0.0)
        return x == 0.0 ? std::optional<double>(0.0) : std::nullopt;
    return (x - ref) / ref;
}

inline std::vector<ComparisonRow> compare_campaigns(const std::vector<CampaignReport>& reports,
                                                    const std::vector<std::string>& labels = {})
{
    if (reports.size() < 2)
        throw InputError("comparison needs at least two reports");
    if (!labels.empty() && labels.size() != reports.size())
        throw InputError("one label per report expected");
    const auto& first = reports.front().config;
    for (const auto& r : reports) {
        if (r.config.env != first.env)
            throw InputError("cannot compare campaigns on different environments");
        if (r.config.n_tests != first.n_tests)
            throw InputError("cannot compare campaigns with different test budgets");
    }
    std::vector<MetricRow> metric_rows;
    for (const auto& r : reports) {
        MetricRow m;
        m.cri = static_cast<double>(r.diversity.critical_count);
        m.cvg = static_cast<double>(r.diversity.coverage);
        m.dis = r.diversity.distance.value_or(0.0);
        m.traj = r.diversity.trajectory;
        m.log_traj = r.diversity.log_trajectory;
        metric_rows.push_back(m);
    }
    const auto scores = hybrid_score(metric_rows);
    std::vector<ComparisonRow> out;
    const auto& ref = reports.front().diversity;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& d = reports[i].diversity;
        ComparisonRow row;
        row.label = labels.empty() ? to_string(reports[i].config.strategy) : labels[i];
        row.critical_count = d.critical_count;
        row.coverage = d.coverage;
        row.distance = d.distance;
        row.trajectory = d.trajectory;
        row.log_trajectory = d.log_trajectory;
        row.score = scores[i];
        row.improve_critical =
            relative_change(static_cast<double>(d.critical_count), static_cast<double>(ref.critical_count));
        row.improve_coverage = relative_change(static_cast<double>(d.coverage), static_cast<double>(ref.coverage));
        if (d.distance && ref.distance)
            row.improve_distance = relative_change(*d.distance, *ref.distance);
        if (std::isfinite(d.log_trajectory) && std::isfinite(ref.log_trajectory))
            row.improve_trajectory = 0.0 - std::expm1(d.log_trajectory - ref.log_trajectory);
        else if (d.log_trajectory == ref.log_trajectory)
            row.improve_trajectory = 0.0;
        out.push_back(std::move(row));
    }
    return out;
}

inline void write_metrics_csv(std::ostream& os, const std::vector<ComparisonRow>& rows)
{
    using detail::csv_number;
    os << "label,critical_count,coverage,distance,trajectory_similarity,log_trajectory_similarity,score,"
          "improve_critical,improve_coverage,improve_distance,improve_trajectory\n";
    for (const auto& r : rows) {
        os << r.label << ',' << r.critical_count << ',' << r.coverage << ',' << csv_number(r.distance) << ','
           << format_number(r.trajectory) << ',' << format_number(r.log_trajectory) << ','
           << format_number(r.score) << ',' << csv_number(r.improve_critical) << ','
           << csv_number(r.improve_coverage) << ',' << csv_number(r.improve_distance) << ','
           << csv_number(r.improve_trajectory) << '\n';
    }
}

inline const std::vector<double>& sweep_alphas()
{
    static const std::vector<double> a = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    return a;
}

/// Runs the dual-space strategy once per alpha and compares the results.
inline std::vector<ComparisonRow> sweep_alpha(CampaignConfig cfg, const std::vector<double>& alphas = sweep_alphas())
{
    cfg.strategy = Strategy::DualSpace;
    std::vector<CampaignReport> reports;
    std::vector<std::string> labels;
    for (double a : alphas) {
        cfg.generator.alpha = a;
        reports.push_back(run_campaign(cfg));
        labels.push_back("alpha=" + format_number(a));
    }
    return compare_campaigns(reports, labels);
}

} // namespace dualfuzz
