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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Tolerances and budgets are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dualfuzz/harness.hpp"
#include "dualfuzz/oracle.hpp"

using namespace dualfuzz;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kBranchTolerance = 0.03;
constexpr double kNormalizationTolerance = 0.05;
constexpr double kRecoveryTolerance = 0.1;
constexpr double kEmSlack = 1e-9;
constexpr double kTelescopeTolerance = 1e-10;
constexpr double kMetricTolerance = 1e-12;
constexpr double kRandomRatio = 1.2;
constexpr double kSensitivityRatio = 1.1;
constexpr int kCoverageWins = 7;
constexpr double kSliceLow = 0.02;
constexpr double kSliceHigh = 0.05;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            if (!detail.empty())
                detail += "; ";
            detail += what;
        }
    }
};

std::string num(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Grid correctness

std::vector<std::vector<std::uint32_t>> all_indices(const std::vector<std::uint32_t>& m)
{
    std::vector<std::vector<std::uint32_t>> out;
    std::vector<std::uint32_t> k(m.size(), 0);
    for (;;) {
        out.push_back(k);
        std::size_t i = 0;
        while (i < m.size() && ++k[i] == m[i])
            k[i++] = 0;
        if (i == m.size())
            return out;
    }
}

Outcome grid_correctness()
{
    Outcome o;
    const std::vector<std::vector<std::uint32_t>> big = {
        {1000000}, {1000, 1000}, {100, 100, 100}, {10, 10, 10, 10, 10, 10}, {7, 3, 11, 5, 13, 2, 9}};
    for (const auto& m : big) {
        const ScenarioSpec spec(std::vector<Interval>(m.size(), Interval{0.0, 1.0}), m);
        // Oracle: labels are visited in order by an odometer over multi-indices.
        std::vector<std::uint32_t> k(m.size(), 0);
        bool ok = true;
        for (std::uint64_t expect = 1; expect <= spec.total_cells(); ++expect) {
            const auto idx = index_of(spec, expect);
            ok = ok && idx.k == k && label_of(spec, k) == expect;
            std::size_t i = 0;
            while (i < m.size() && ++k[i] == m[i])
                k[i++] = 0;
        }
        o.require(ok, "label bijection fails on a " + std::to_string(spec.total_cells()) + "-cell grid");
    }

    std::size_t grids = 0;
    std::function<void(std::vector<std::uint32_t>&, std::size_t)> each = [&](std::vector<std::uint32_t>& m,
                                                                             std::size_t dims) {
        if (m.size() == dims) {
            ++grids;
            const ScenarioSpec spec(std::vector<Interval>(dims, Interval{0.0, 1.0}), m);
            const auto cells = all_indices(m);
            std::vector<std::vector<std::uint64_t>> nb(spec.total_cells() + 1);
            for (const auto& a : cells) {
                std::vector<std::uint64_t> expect;
                for (const auto& b : cells) {
                    std::uint32_t cheb = 0;
                    for (std::size_t i = 0; i < dims; ++i)
                        cheb = std::max(cheb, a[i] > b[i] ? a[i] - b[i] : b[i] - a[i]);
                    if (cheb == 1)
                        expect.push_back(label_of(spec, b));
                }
                std::sort(expect.begin(), expect.end());
                std::vector<std::uint64_t> got;
                for (const auto& c : neighbors(spec, make_index(spec, a)))
                    got.push_back(c.label);
                std::sort(got.begin(), got.end());
                if (got != expect)
                    o.require(false, "neighbor set mismatch");
                nb[label_of(spec, a)] = got;
            }
            for (std::uint64_t a = 1; a <= spec.total_cells(); ++a)
                for (auto b : nb[a])
                    if (!std::binary_search(nb[b].begin(), nb[b].end(), a))
                        o.require(false, "neighbor relation not symmetric");
            return;
        }
        for (std::uint32_t v = 1; v <= 4; ++v) {
            m.push_back(v);
            each(m, dims);
            m.pop_back();
        }
    };
    for (std::size_t dims = 1; dims <= 3; ++dims) {
        std::vector<std::uint32_t> m;
        each(m, dims);
    }

    // Figure fixture: four cells along the first axis, five along the second.
    const ScenarioSpec fig({{0.0, 1.0}, {0.0, 1.0}}, {4, 5});
    SubspaceGrid grid(fig);
    for (bool c : {false, true, false})
        grid.record_test(index_of(fig, 6), c);
    std::vector<std::uint64_t> labels;
    for (const auto& c : neighbors(fig, index_of(fig, 6)))
        labels.push_back(c.label);
    o.require(grid.stats(6).density == 3 && grid.stats(6).critical == 1, "figure D/F");
    o.require(grid.stats(6).criticality() == 1.0 / 3.0, "figure K");
    o.require(labels == std::vector<std::uint64_t>{1, 2, 3, 5, 7, 9, 10, 11}, "figure neighborhood");
    if (o.pass)
        o.detail = "5 grids up to 1e6 cells, " + std::to_string(grids) + " small grids, figure fixture";
    return o;
}

// ---------------------------------------------------------------------------
// 2. Branch statistics

Outcome branch_statistics()
{
    Outcome o;
    const ScenarioSpec spec({{0.0, 1.0}, {0.0, 1.0}}, {20, 20});
    SubspaceGrid grid(spec);
    grid.record_test(make_index(spec, {10, 10}), true);
    const int n = 10000;
    std::string freqs;
    for (double alpha : {0.0, 0.5, 0.8, 1.0}) {
        GeneratorConfig cfg;
        cfg.alpha = alpha;
        RandomStream rng(static_cast<std::uint64_t>(alpha * 100) + 1);
        int dir = 0;
        for (int i = 0; i < n; ++i)
            dir += choose_global_cell(grid, cfg, rng).branch == Branch::Directional ? 1 : 0;
        const double f = dir / static_cast<double>(n);
        if (alpha == 0.0 || alpha == 1.0)
            o.require(f == alpha, "alpha " + num(alpha) + " gave " + num(f));
        else
            o.require(std::abs(f - alpha) <= kBranchTolerance, "alpha " + num(alpha) + " gave " + num(f));
        freqs += (freqs.empty() ? "" : " ") + num(f);
    }
    if (o.pass)
        o.detail = "directional frequencies " + freqs;
    return o;
}

// ---------------------------------------------------------------------------
// 3. Mode switching

Outcome mode_switching()
{
    Outcome o;
    const Mode L = Mode::LocalPerturbation, G = Mode::GlobalExploration;
    int streams = 0;
    for (double theta : {0.001, 0.13, 0.14, 0.1, 0.2}) {
        const double below = std::nextafter(theta, 0.0);
        const double above = std::min(1.0, theta * 2.0);
        {
            WindowMonitor m(10, theta, 1);
            const std::vector<double> r = {theta, below, theta, below, below, above, 0.0, 1.0};
            const std::vector<Mode> want = {L, G, L, G, G, L, G, L};
            for (std::size_t i = 0; i < r.size(); ++i)
                o.require(m.evaluate(r[i]) == want[i], "h=1 theta=" + num(theta) + " step " + std::to_string(i));
            ++streams;
        }
        {
            WindowMonitor m(10, theta, 3);
            const std::vector<double> r = {below, below, theta, below, below, below, theta, theta, above, below};
            const std::vector<Mode> want = {L, L, L, L, L, G, G, G, L, L};
            for (std::size_t i = 0; i < r.size(); ++i)
                o.require(m.evaluate(r[i]) == want[i], "h=3 theta=" + num(theta) + " step " + std::to_string(i));
            ++streams;
        }
    }
    // Windowed readings: W = 1000 with one critical test sits exactly on 0.001.
    WindowMonitor w(1000, 0.001, 1);
    for (int i = 0; i < 999; ++i)
        w.push(false);
    o.require(choose_mode(w) == L, "partial window reads as local");
    w.push(true);
    o.require(w.efficiency() == 0.001 && choose_mode(w) == L, "0.001 at theta 0.001 is local");
    for (int i = 0; i < 1000; ++i)
        w.push(false);
    o.require(choose_mode(w) == G, "window without criticals is global");
    ++streams;
    if (o.pass)
        o.detail = std::to_string(streams) + " scripted streams";
    return o;
}

// ---------------------------------------------------------------------------
// 4. Mixture model

Vector vec(std::initializer_list<double> v)
{
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double a : v)
        x(i++) = a;
    return x;
}

Matrix diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

double normal_pdf(double x, double mu, double var)
{
    return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_pdf2(double x, double y, double mx, double my, double sxx, double sxy, double syy)
{
    const double det = sxx * syy - sxy * sxy;
    const double dx = x - mx, dy = y - my;
    const double q = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

Outcome mixture_model()
{
    Outcome o;
    // EM monotonicity.
    RandomStream rng(5);
    std::vector<Vector> data;
    for (int i = 0; i < 600; ++i) {
        if (i % 3 == 0)
            data.push_back(vec({rng.normal() * 0.5 - 2.0, rng.normal() * 0.3 + 1.0}));
        else
            data.push_back(vec({rng.normal() + 3.0, rng.normal() * 0.8 - 1.0}));
    }
    GaussianMixture g({0.25, 0.25, 0.25, 0.25}, {data[0], data[1], data[2], data[5]},
                      std::vector<Matrix>(4, diag({1.0, 1.0})));
    double prev = -INFINITY;
    double worst = 0.0;
    for (int it = 0; it < 60; ++it) {
        const double ll = em_step(g, data, 1e-9);
        worst = std::min(worst, ll - prev);
        prev = ll;
    }
    o.require(worst >= -kEmSlack, "EM log-likelihood decreased by " + num(-worst));

    // Normalization in one and two dimensions.
    Matrix c(2, 2);
    c << 0.8, -0.3, -0.3, 0.5;
    const GaussianMixture g1({0.4, 0.6}, {vec({-1.0}), vec({2.5})}, {diag({0.25}), diag({1.0})});
    const GaussianMixture g2({0.5, 0.5}, {vec({0.0, 0.0}), vec({3.0, -2.0})}, {c, diag({0.3, 0.6})});
    RandomStream mc(17);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i)
        s1 += gmm_density(g1, vec({mc.uniform(-5.0, 10.5)}));
    for (int i = 0; i < n; ++i)
        s2 += gmm_density(g2, vec({mc.uniform(-7.2, 9.2), mc.uniform(-8.2, 5.7)}));
    const double i1 = s1 / n * 15.5, i2 = s2 / n * 16.4 * 13.9;
    o.require(std::abs(i1 - 1.0) <= kNormalizationTolerance, "1-D integral " + num(i1));
    o.require(std::abs(i2 - 1.0) <= kNormalizationTolerance, "2-D integral " + num(i2));

    // Single-Gaussian recovery through the online updates.
    NoveltyModelConfig one;
    one.components = 1;
    RandomStream pts(2024);
    OnlineMixture m;
    for (int b = 0; b < 10; ++b) {
        std::vector<Vector> batch;
        for (int i = 0; i < 50; ++i)
            batch.push_back(vec({3.0 + 0.5 * pts.normal()}));
        m.absorb(batch, one);
    }
    const double mu = m.mixture().means()[0](0), var = m.mixture().covariances()[0](0, 0);
    o.require(std::abs(mu - 3.0) <= kRecoveryTolerance, "recovered mean " + num(mu));
    o.require(std::abs(var - 0.25) <= kRecoveryTolerance, "recovered variance " + num(var));

    // Telescoped trajectory probability against a direct evaluation.
    Matrix tc(2, 2);
    tc << 1.0, 0.2, 0.2, 0.5;
    const GaussianMixture st({0.3, 0.7}, {vec({0.0}), vec({2.0})}, {diag({1.0}), diag({0.5})});
    const GaussianMixture tr({1.0}, {vec({1.0, 1.5})}, {tc});
    const auto model = GmmNoveltyModel::from_mixtures(st, tr);
    Trajectory traj;
    traj.states = {{0.2}, {1.1}, {2.4}};
    auto gs = [](double x) { return 0.3 * normal_pdf(x, 0.0, 1.0) + 0.7 * normal_pdf(x, 2.0, 0.5); };
    auto gc = [](double a, double b) { return normal_pdf2(a, b, 1.0, 1.5, 1.0, 0.2, 0.5); };
    const double direct = std::log(gs(0.2)) + std::log(gc(0.2, 1.1)) - std::log(gs(0.2)) +
                          std::log(gc(1.1, 2.4)) - std::log(gs(1.1));
    const double got = trajectory_probability(model, traj);
    o.require(std::abs(got - direct) <= kTelescopeTolerance, "telescoped error " + num(got - direct));
    if (o.pass)
        o.detail = "integrals " + num(i1) + ", " + num(i2) + "; mean " + num(mu) + ", variance " + num(var);
    return o;
}

// ---------------------------------------------------------------------------
// 5. Metric oracles

Outcome metric_oracles()
{
    Outcome o;
    const auto d1 = mean_pairwise_distance(std::vector<Scenario>{Scenario{{0.0, 0.0}}, Scenario{{3.0, 4.0}}});
    o.require(d1 && *d1 == 5.0, "3-4-5 distance");
    const auto d2 = mean_pairwise_distance(std::vector<Scenario>{Scenario{{0.0}}, Scenario{{1.0}}, Scenario{{2.0}}});
    o.require(d2 && std::abs(*d2 - 8.0 / 3.0) <= kMetricTolerance, "collinear distance");
    const ScenarioSpec spec({{0.0, 1.0}, {0.0, 1.0}}, {5, 4});
    o.require(coverage(std::vector<Scenario>{Scenario{{0.05, 0.05}}, Scenario{{0.1, 0.1}}, Scenario{{0.9, 0.9}}},
                       spec) == 2,
              "coverage");
    const auto ends = hybrid_score(std::vector<MetricRow>{{10, 5, 3, 0.1, {}}, {1, 1, 1, 0.9, {}}});
    o.require(ends[0] == 1.0 && ends[1] == 0.0, "min-max endpoints");
    const auto ties = hybrid_score(std::vector<MetricRow>(3, MetricRow{2, 2, 2, 0.5, {}}));
    o.require(std::all_of(ties.begin(), ties.end(), [](double x) { return x == 0.5; }), "zero-spread rule");

    const std::vector<MetricRow> table = {
        {752, 98, 6775.98, 0.66e-3, {}},  {585, 113, 7343.27, 8.74e-3, {}}, {636, 111, 7529.82, 1.41e-3, {}},
        {718, 130, 6702.47, 1.94e-3, {}}, {973, 135, 6211.37, 4.05e-3, {}}, {820, 150, 6369.71, 1.01e-3, {}},
    };
    const auto s = hybrid_score(table);
    const auto best = std::max_element(s.begin(), s.end()) - s.begin();
    o.require(best == 4, "alpha table ranks row " + std::to_string(best) + " first");
    if (o.pass)
        o.detail = "alpha=0.8 scores " + num(s[4]) + " (next " + num(s[5]) + ")";
    return o;
}

// ---------------------------------------------------------------------------
// 6. Planted-region benchmark

CampaignConfig benchmark_config(std::uint64_t seed, Strategy s)
{
    CampaignConfig c;
    c.env = "intercept2d";
    c.strategy = s;
    c.seed = seed;
    c.n_scenarios = 200;
    c.n_tests = 5000;
    c.window = 100;
    c.theta = 0.15;
    c.partitions = {20};
    return c;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome planted_region()
{
    Outcome o;
    const auto slice = intercept_slice_map();
    const double frac = slice.critical_fraction();
    o.require(frac >= kSliceLow && frac <= kSliceHigh, "slice critical measure " + num(frac));

    std::vector<double> dual, rnd, sens;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto d = run_campaign(benchmark_config(seed, Strategy::DualSpace));
        const auto r = run_campaign(benchmark_config(seed, Strategy::Random));
        const auto s = run_campaign(benchmark_config(seed, Strategy::SensitivityOnly));
        dual.push_back(static_cast<double>(d.critical_count));
        rnd.push_back(static_cast<double>(r.critical_count));
        sens.push_back(static_cast<double>(s.critical_count));
        wins += d.diversity.coverage >= s.diversity.coverage ? 1 : 0;
    }
    const double md = median(dual), mr = median(rnd), ms = median(sens);
    o.require(md >= kRandomRatio * mr, "median " + num(md) + " vs random " + num(mr));
    o.require(md >= kSensitivityRatio * ms, "median " + num(md) + " vs sensitivity-only " + num(ms));
    o.require(wins >= kCoverageWins, "coverage wins " + std::to_string(wins) + "/10");
    o.detail = (o.pass ? "" : o.detail + "; ") + "slice " + num(frac) + ", medians " + num(md) + "/" + num(mr) +
               "/" + num(ms) + " (x" + num(md / mr) + ", x" + num(md / ms) + "), coverage wins " +
               std::to_string(wins) + "/10";
    return o;
}

// ---------------------------------------------------------------------------
// 7. Environment score contract

Outcome score_contract()
{
    Outcome o;
    std::string detail;
    for (const auto& name : environment_names()) {
        const auto env = make_environment(name);
        const auto spec = env->make_spec(std::vector<std::uint32_t>(env->bounds().size(), 1));
        RandomStream rng(77);
        double cs = 0.0, ns = 0.0;
        int c = 0, n = 0;
        for (int i = 0; i < 500; ++i) {
            const auto r = env->run(spec.sample_uniform(rng));
            if (r.any_violation() && !r.critical)
                o.require(false, name + ": violation without critical flag");
            (r.critical ? cs : ns) += r.task_score;
            (r.critical ? c : n) += 1;
        }
        o.require(c > 0 && n > 0, name + ": one class is empty");
        if (c > 0 && n > 0) {
            o.require(cs / c < ns / n, name + ": critical mean " + num(cs / c) + " >= " + num(ns / n));
            detail += (detail.empty() ? "" : ", ") + name + " " + num(cs / c) + " < " + num(ns / n);
        }
        CampaignConfig cfg;
        cfg.env = name;
        cfg.n_scenarios = 50;
        cfg.n_tests = 500;
        cfg.window = 50;
        for (const auto& row : run_campaign(cfg).log)
            if (row.violation && !row.critical)
                o.require(false, name + ": logged violation without critical flag");
    }
    if (o.pass)
        o.detail = detail;
    return o;
}

// ---------------------------------------------------------------------------
// 8. Determinism

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism()
{
    Outcome o;
    const auto dir = fs::temp_directory_path() / "dualfuzz_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = std::string(DUALFUZZ_FIXTURE_DIR) + "/walker1d_seed7.cfg";
    for (const char* sub : {"a", "b"}) {
        const std::string cmd = std::string(DUALFUZZ_CLI) + " run --config " + cfg + " --out " +
                                (dir / sub).string() + " > " + (dir / (std::string(sub) + ".txt")).string();
        o.require(std::system(cmd.c_str()) == 0, "cli run failed");
    }
    for (const char* f : {"report.json", "log.csv"})
        o.require(!slurp(dir / "a" / f).empty() && slurp(dir / "a" / f) == slurp(dir / "b" / f),
                  std::string(f) + " differs between runs");
    o.require(slurp(dir / "a" / "log.csv") == slurp(fs::path(DUALFUZZ_FIXTURE_DIR) / "walker1d_seed7_log.csv"),
              "golden log differs");
    fs::remove_all(dir);
    if (o.pass)
        o.detail = "report.json and log.csv byte-identical; golden log reproduced";
    return o;
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        Outcome (*fn)();
    };
    const std::vector<Criterion> criteria = {
        {1, "grid correctness", 30, grid_correctness},
        {2, "branch statistics", 10, branch_statistics},
        {3, "mode switching", 1, mode_switching},
        {4, "mixture model", 60, mixture_model},
        {5, "metric oracles", 1, metric_oracles},
        {6, "planted-region benchmark", 900, planted_region},
        {7, "environment score contract", 120, score_contract},
        {8, "determinism", 30, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_seconds)
            o.require(false, "runtime " + num(secs) + " s over budget " + num(c.budget_seconds) + " s");
        std::printf("criterion %d %s: %s (%s) [%.2f s]\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
