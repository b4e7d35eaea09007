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

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "dualfuzz/database.hpp"
#include "dualfuzz/harness.hpp"

using namespace dualfuzz;

namespace {

ScenarioRecord record(std::vector<double> p, double score, double sigma = 0.0, bool observed = true)
{
    ScenarioRecord r;
    r.scenario = Scenario{std::move(p)};
    r.task_score = score;
    r.sensitivity = sigma;
    r.sensitivity_observed = observed;
    return r;
}

// Upper 0.1% point of chi-square: 10.828 (1 dof), 13.816 (2 dof).
double chi_square(const std::vector<int>& counts, const std::vector<double>& probs)
{
    int n = 0;
    for (int c : counts)
        n += c;
    double x2 = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double e = n * probs[i];
        x2 += (counts[i] - e) * (counts[i] - e) / e;
    }
    return x2;
}

std::vector<int> draw_counts(const ScenarioDatabase& db, int n, std::uint64_t seed,
                             SensitivityPrior prior = SensitivityPrior::MaxObserved)
{
    RandomStream rng(seed);
    std::vector<int> counts(db.size(), 0);
    for (int i = 0; i < n; ++i)
        ++counts[select_base_local(db, rng, prior).id];
    return counts;
}

} // namespace

TEST(Sensitivity, Examples)
{
    EXPECT_DOUBLE_EQ(sensitivity(1.0, 0.5, Scenario{{0.0}}, Scenario{{0.25}}), 2.0);
    EXPECT_EQ(sensitivity(3.0, 3.0, Scenario{{0.0, 0.0}}, Scenario{{3.0, 4.0}}), 0.0);
    EXPECT_DOUBLE_EQ(sensitivity(0.0, 10.0, Scenario{{0.0, 0.0}}, Scenario{{3.0, 4.0}}), 2.0);
    EXPECT_THROW(sensitivity(1.0, 2.0, Scenario{{0.5}}, Scenario{{0.5}}), InputError);
}

TEST(Selection, SingleRecord)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 1.0));
    RandomStream rng(1);
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(select_base_local(db, rng).id, 0u);
    EXPECT_THROW(select_base_local(ScenarioDatabase{}, rng), InputError);
}

TEST(Selection, ZeroSensitivitiesAreUniform)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 1.0));
    db.insert_base(record({0.2}, 1.0));
    const auto c = draw_counts(db, 10000, 3);
    EXPECT_NEAR(c[0] / 10000.0, 0.5, 0.03);
}

TEST(Selection, SmoothedWeights)
{
    // sigma = {3 eps, eps}: weights (sigma + eps) are {4 eps, 2 eps}.
    const double eps = ScenarioDatabase::kSelectionSmoothing;
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 1.0, 3 * eps));
    db.insert_base(record({0.2}, 1.0, eps));
    const auto c = draw_counts(db, 10000, 4);
    EXPECT_NEAR(c[0] / 10000.0, 2.0 / 3.0, 0.03);
}

TEST(Selection, ProportionalToSensitivity)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 1.0, 3.0));
    db.insert_base(record({0.2}, 1.0, 1.0));
    const auto c = draw_counts(db, 10000, 5);
    EXPECT_NEAR(c[0] / 10000.0, 0.75, 0.03);
}

TEST(Selection, ChiSquareAgainstWeights)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 1.0, 0.5));
    db.insert_base(record({0.2}, 1.0, 2.0));
    db.insert_base(record({0.3}, 1.0, 1.5));
    const auto c = draw_counts(db, 20000, 6);
    const double e = ScenarioDatabase::kSelectionSmoothing;
    const double t = 4.0 + 3 * e;
    EXPECT_LT(chi_square(c, {(0.5 + e) / t, (2.0 + e) / t, (1.5 + e) / t}), 13.816);
}

TEST(Selection, UnobservedRecordsUseThePrior)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 1.0, 2.0, true));
    db.insert_base(record({0.2}, 1.0, 0.0, false));
    const auto w = selection_weights(db, SensitivityPrior::MaxObserved);
    EXPECT_DOUBLE_EQ(w[1], 2.0 + ScenarioDatabase::kSelectionSmoothing);
    const auto z = selection_weights(db, SensitivityPrior::Zero);
    EXPECT_DOUBLE_EQ(z[1], ScenarioDatabase::kSelectionSmoothing);
    const auto c = draw_counts(db, 10000, 7, SensitivityPrior::MaxObserved);
    EXPECT_NEAR(c[1] / 10000.0, 0.5, 0.03);
}

TEST(Sensitivity, ObservationKeepsMaximum)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 1.0, 0.0, false));
    db.observe_sensitivity(0, 0.4);
    EXPECT_TRUE(db.base()[0].sensitivity_observed);
    db.observe_sensitivity(0, 2.5);
    db.observe_sensitivity(0, 1.0);
    EXPECT_EQ(db.base()[0].sensitivity, 2.5);
}

TEST(Admission, CriticalGoesToArchiveOnly)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 0.9));
    auto r = record({0.2}, -40.0);
    r.critical = true;
    EXPECT_EQ(maybe_admit(db, r, db.base()[0], 0.0), Admission::Archived);
    EXPECT_EQ(db.size(), 1u);
    EXPECT_EQ(db.critical_set().size(), 1u);
}

TEST(Admission, LowerScoreAdmitted)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 0.9));
    EXPECT_EQ(maybe_admit(db, record({0.2}, 0.4), db.base()[0], std::nullopt), Admission::AdmittedScore);
    EXPECT_EQ(db.size(), 2u);
}

TEST(Admission, NovelTrajectoryAdmitted)
{
    ScenarioDatabase db;
    db.insert_base(record({0.1}, 0.9));
    const double tau = -20.0;
    auto r = record({0.2}, 1.5);
    r.log_prob = tau + std::log(0.1);
    EXPECT_EQ(maybe_admit(db, r, db.base()[0], tau), Admission::AdmittedNovelty);
    auto q = record({0.3}, 1.5);
    q.log_prob = tau + 1.0;
    EXPECT_EQ(maybe_admit(db, q, db.base()[0], tau), Admission::Discarded);
    EXPECT_EQ(maybe_admit(db, record({0.1}, 0.2), 0.9, tau), Admission::Duplicate);
    EXPECT_EQ(db.size(), 2u);
}

TEST(Capacity, EvictsLeastNovel)
{
    ScenarioDatabase db(std::size_t{3});
    for (int i = 0; i < 3; ++i) {
        auto r = record({0.1 * i}, 1.0);
        r.log_prob = -10.0 + i;
        db.insert_base(r);
    }
    auto r = record({0.9}, 1.0);
    r.log_prob = -50.0;
    db.insert_base(r);
    ASSERT_EQ(db.size(), 3u);
    EXPECT_EQ(db.find(2), nullptr); // log-prob -8, the least novel
    EXPECT_NE(db.find(3), nullptr);
    EXPECT_EQ(db.evictions(), 1u);
    EXPECT_FALSE(db.contains(Scenario{{0.2}}));
}

TEST(Init, SeedsPoolAndArchivesCriticals)
{
    const auto env = make_environment("walker1d");
    const auto spec = env->make_spec(std::vector<std::uint32_t>(8, 2));
    RandomStream rng(21);
    int seen = 0;
    const auto db = init_database(*env, spec, 60, rng, std::nullopt,
                                  [&](const Scenario&, const EpisodeResult&) { ++seen; });
    EXPECT_EQ(seen, 60);
    EXPECT_EQ(db.size(), 60u);
    std::size_t crit = 0;
    for (const auto& r : db.base()) {
        EXPECT_TRUE(spec.contains(r.scenario));
        EXPECT_EQ(r.origin, Origin::Initial);
        crit += r.critical ? 1 : 0;
    }
    EXPECT_EQ(db.critical_set().size(), crit);
    RandomStream one(1);
    EXPECT_EQ(init_database(*env, spec, 1, one).size(), 1u);
    EXPECT_THROW(init_database(*env, spec, 0, one), InputError);
}

TEST(Init, FailureNamesTheScenario)
{
    struct Broken final : Environment {
        Broken() : Environment(EnvScoringConfig{}) {}
        std::string_view name() const override { return "broken"; }
        std::vector<Interval> bounds() const override { return {{0.0, 1.0}}; }
        std::size_t state_dim() const override { return 1; }
        EpisodeResult run(const Scenario&) const override { throw std::runtime_error("solver diverged"); }
    } env;
    RandomStream rng(1);
    try {
        init_database(env, env.make_spec({2}), 3, rng);
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("initial scenario 0"), std::string::npos);
        EXPECT_NE(msg.find("solver diverged"), std::string::npos);
    }
}

TEST(Checkpoint, JsonlRoundTrip)
{
    ScenarioDatabase db(std::size_t{10});
    auto a = record({0.1, -2.5}, 3.25, 1.5);
    a.log_prob = -12.125;
    db.insert_base(a);
    auto b = record({1.0 / 3.0, 7.0}, -0.1, 0.0, false);
    b.origin = Origin::Perturbed;
    b.parent = 0;
    db.insert_base(b);
    db.archive(Scenario{{0.7, 0.8}});
    std::stringstream ss;
    write_database_jsonl(ss, db);
    const auto back = read_database_jsonl(ss);
    EXPECT_EQ(back.base(), db.base());
    EXPECT_EQ(back.critical_set(), db.critical_set());
    EXPECT_EQ(back.next_id(), db.next_id());
    EXPECT_EQ(back.capacity(), db.capacity());
    std::stringstream bad("{\"type\": \"base\"}\n");
    EXPECT_THROW(read_database_jsonl(bad), InputError);
}
