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

// Seed pool: base scenarios with task score, sensitivity and novelty, the
// archive of critical scenarios, and the admission rules that grow the pool.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core.hpp"
#include "envs.hpp"
#include "rng.hpp"
#include "space.hpp"

namespace dualfuzz {

enum class Origin { Initial, Perturbed, Explored };

inline const char* to_string(Origin o)
{
    switch (o) {
    case Origin::Initial: return "initial";
    case Origin::Perturbed: return "perturbed";
    case Origin::Explored: return "explored";
    }
    return "?";
}

struct ScenarioRecord {
    std::uint64_t id = 0;
    Scenario scenario;
    double task_score = 0.0;
    bool critical = false;
    double sensitivity = 0.0;
    bool sensitivity_observed = false;
    std::optional<double> log_prob; // trajectory log-probability at evaluation time
    Origin origin = Origin::Initial;
    std::optional<std::uint64_t> parent;

    friend bool operator==(const ScenarioRecord&, const ScenarioRecord&) = default;
};

/// sigma = |T_base - T_new| / ||base - new||_2.
inline double sensitivity(double score_base, double score_new, const Scenario& base, const Scenario& moved)
{
    if (base.size() != moved.size())
        throw InputError("sensitivity: scenarios differ in dimension");
    double d2 = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i)
        d2 += (base[i] - moved[i]) * (base[i] - moved[i]);
    if (d2 == 0.0)
        throw InputError("sensitivity: perturbed scenario coincides with its base");
    return std::abs(score_base - score_new) / std::sqrt(d2);
}

enum class Admission { Archived, AdmittedScore, AdmittedNovelty, Duplicate, Discarded };

inline const char* to_string(Admission a)
{
    switch (a) {
    case Admission::Archived: return "archived";
    case Admission::AdmittedScore: return "admitted_score";
    case Admission::AdmittedNovelty: return "admitted_novelty";
    case Admission::Duplicate: return "duplicate";
    case Admission::Discarded: return "discarded";
    }
    return "?";
}

class ScenarioDatabase {
public:
    static constexpr double kSelectionSmoothing = 1e-6;

    ScenarioDatabase() = default;
    explicit ScenarioDatabase(std::optional<std::size_t> capacity) : capacity_(capacity) {}

    const std::vector<ScenarioRecord>& base() const { return base_; }
    const std::vector<Scenario>& critical_set() const { return critical_; }
    std::optional<std::size_t> capacity() const { return capacity_; }
    void set_capacity(std::optional<std::size_t> c) { capacity_ = c; }
    std::uint64_t next_id() const { return next_id_; }
    std::uint64_t evictions() const { return evictions_; }
    bool empty() const { return base_.empty(); }
    std::size_t size() const { return base_.size(); }

    bool contains(const Scenario& s) const { return keys_.count(s.params) > 0; }

    ScenarioRecord* find(std::uint64_t id)
    {
        auto it = std::find_if(base_.begin(), base_.end(), [id](const auto& r) { return r.id == id; });
        return it == base_.end() ? nullptr : &*it;
    }

    /// Adds a record to the base pool (assigning its id). Returns false for
    /// an exact duplicate.
    bool insert_base(ScenarioRecord r)
    {
        if (contains(r.scenario))
            return false;
        r.id = next_id_++;
        keys_.insert(r.scenario.params);
        base_.push_back(std::move(r));
        enforce_capacity();
        return true;
    }

    void archive(const Scenario& s) { critical_.push_back(s); }

    /// Keeps the largest sensitivity observed for a record.
    void observe_sensitivity(std::uint64_t id, double sigma)
    {
        if (auto* r = find(id)) {
            r->sensitivity = r->sensitivity_observed ? std::max(r->sensitivity, sigma) : sigma;
            r->sensitivity_observed = true;
        }
    }

    double mean_task_score() const
    {
        if (base_.empty())
            return 0.0;
        double s = 0.0;
        for (const auto& r : base_)
            s += r.task_score;
        return s / static_cast<double>(base_.size());
    }

    // Used when restoring a checkpoint.
    void restore(std::vector<ScenarioRecord> base, std::vector<Scenario> critical, std::uint64_t next_id)
    {
        base_ = std::move(base);
        critical_ = std::move(critical);
        keys_.clear();
        for (const auto& r : base_)
            keys_.insert(r.scenario.params);
        next_id_ = next_id;
    }

private:
    // Evicts the least novel record (largest trajectory log-probability;
    // records never scored count as most novel; ties go to the oldest).
    void enforce_capacity()
    {
        if (!capacity_)
            return;
        while (base_.size() > *capacity_) {
            auto score = [](const ScenarioRecord& r) {
                return r.log_prob.value_or(-std::numeric_limits<double>::infinity());
            };
            auto victim = base_.begin();
            for (auto it = base_.begin(); it != base_.end(); ++it)
                if (score(*it) > score(*victim))
                    victim = it;
            keys_.erase(victim->scenario.params);
            base_.erase(victim);
            ++evictions_;
        }
    }

    std::vector<ScenarioRecord> base_;
    std::vector<Scenario> critical_;
    std::set<std::vector<double>> keys_;
    std::optional<std::size_t> capacity_;
    std::uint64_t next_id_ = 0;
    std::uint64_t evictions_ = 0;
};

/// Uniformly samples `n` scenarios, runs each once, and seeds the pool.
/// `on_result` sees every initial episode in order (grid and novelty
/// bookkeeping hook).
template <typename OnResult>
ScenarioDatabase init_database(const Environment& env, const ScenarioSpec& spec, std::size_t n, RandomStream& rng,
                               std::optional<std::size_t> capacity, OnResult&& on_result)
{
    if (n < 1)
        throw InputError("database needs at least one initial scenario");
    ScenarioDatabase db(capacity);
    for (std::size_t i = 0; i < n; ++i) {
        Scenario s = spec.sample_uniform(rng);
        EpisodeResult res;
        try {
            res = env.run(s);
        } catch (const std::exception& e) {
            std::string where;
            for (std::size_t j = 0; j < s.size(); ++j)
                where += (j ? "," : "") + format_number(s[j]);
            throw std::runtime_error("environment failed on initial scenario " + std::to_string(i) + " (" + where +
                                     "): " + e.what());
        }
        ScenarioRecord r;
        r.scenario = s;
        r.task_score = res.task_score;
        r.critical = res.critical;
        r.origin = Origin::Initial;
        if (res.critical)
            db.archive(s);
        db.insert_base(std::move(r));
        on_result(s, res);
    }
    return db;
}

inline ScenarioDatabase init_database(const Environment& env, const ScenarioSpec& spec, std::size_t n,
                                      RandomStream& rng, std::optional<std::size_t> capacity = std::nullopt)
{
    return init_database(env, spec, n, rng, capacity, [](const Scenario&, const EpisodeResult&) {});
}

/// Weight given to a record whose sensitivity has not been observed yet.
enum class SensitivityPrior {
    Zero,        // sigma = 0: reachable only through the smoothing term
    MaxObserved, // the largest sigma observed in the pool (0 while none is)
};

inline const char* to_string(SensitivityPrior p) { return p == SensitivityPrior::Zero ? "zero" : "max_observed"; }

/// Selection weight sigma + epsilon of every base record, in pool order.
inline std::vector<double> selection_weights(const ScenarioDatabase& db,
                                             SensitivityPrior prior = SensitivityPrior::MaxObserved)
{
    double prior_sigma = 0.0;
    if (prior == SensitivityPrior::MaxObserved)
        for (const auto& r : db.base())
            if (r.sensitivity_observed)
                prior_sigma = std::max(prior_sigma, r.sensitivity);
    std::vector<double> w;
    w.reserve(db.size());
    for (const auto& r : db.base())
        w.push_back((r.sensitivity_observed ? r.sensitivity : prior_sigma) + ScenarioDatabase::kSelectionSmoothing);
    return w;
}

/// Draws a base record with probability proportional to sigma + epsilon.
inline const ScenarioRecord& select_base_local(const ScenarioDatabase& db, RandomStream& rng,
                                               SensitivityPrior prior = SensitivityPrior::MaxObserved)
{
    if (db.empty())
        throw InputError("cannot select a base scenario from an empty database");
    const auto w = selection_weights(db, prior);
    double total = 0.0;
    for (double x : w)
        total += x;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
        u -= w[i];
        if (u < 0.0)
            return db.base()[i];
    }
    return db.base().back();
}

/// Applies the admission rule to an evaluated, non-archived scenario.
/// Critical scenarios go to the archive only; others enter the pool when
/// their task score undercuts the reference or their trajectory is novel
/// (log-probability below the threshold).
inline Admission maybe_admit(ScenarioDatabase& db, ScenarioRecord rec, double reference_score,
                             std::optional<double> threshold)
{
    if (rec.critical) {
        db.archive(rec.scenario);
        return Admission::Archived;
    }
    Admission why;
    if (rec.task_score < reference_score)
        why = Admission::AdmittedScore;
    else if (rec.log_prob && threshold && *rec.log_prob < *threshold)
        why = Admission::AdmittedNovelty;
    else
        return Admission::Discarded;
    if (!db.insert_base(std::move(rec)))
        return Admission::Duplicate;
    return why;
}

inline Admission maybe_admit(ScenarioDatabase& db, ScenarioRecord rec, const ScenarioRecord& base,
                             std::optional<double> threshold)
{
    return maybe_admit(db, std::move(rec), base.task_score, threshold);
}

} // namespace dualfuzz
