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

// Parameter- and behavior-space diversity metrics and the weighted hybrid
// score used to rank configurations against each other.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "novelty.hpp"
#include "space.hpp"

namespace dualfuzz {

struct DiversityReport {
    std::uint64_t critical_count = 0;  // Q
    std::uint64_t coverage = 0;        // cvg
    std::optional<double> distance;    // dis; absent when no dimension is metric
    double trajectory = 0.0;           // traj, linear density units
    double log_trajectory = 0.0;       // log of traj
    std::vector<std::string> warnings;
};

/// Number of distinct cells occupied by `scenarios`.
inline std::uint64_t coverage(std::span<const Scenario> scenarios, const ScenarioSpec& spec)
{
    std::set<std::uint64_t> cells;
    for (const auto& s : scenarios)
        cells.insert(abstract(spec, s).label);
    return cells.size();
}

enum class DistanceNormalization {
    TwoOverQ,   // 2/Q * sum_{i<j} ||s_i - s_j||
    PairMean,   // 2/(Q(Q-1)) * sum_{i<j} ||s_i - s_j||
};

/// Pairwise Euclidean distance sum with the chosen prefactor, over the
/// dimensions flagged in `metric` (all when empty). nullopt when every
/// dimension is non-metric; 0 for fewer than two scenarios.
inline std::optional<double> mean_pairwise_distance(std::span<const Scenario> scenarios,
                                                    const std::vector<bool>& metric = {},
                                                    DistanceNormalization norm = DistanceNormalization::TwoOverQ)
{
    if (!metric.empty() && std::none_of(metric.begin(), metric.end(), [](bool b) { return b; }))
        return std::nullopt;
    const std::size_t q = scenarios.size();
    if (q < 2)
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < q; ++i) {
        for (std::size_t j = i + 1; j < q; ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < scenarios[i].size(); ++k) {
                if (!metric.empty() && !metric[k])
                    continue;
                const double d = scenarios[i][k] - scenarios[j][k];
                d2 += d * d;
            }
            sum += std::sqrt(d2);
        }
    }
    const double qd = static_cast<double>(q);
    return norm == DistanceNormalization::TwoOverQ ? 2.0 / qd * sum : 2.0 / (qd * (qd - 1.0)) * sum;
}

/// Mean of Pr over a set, computed from log-probabilities. Returns the log
/// of the mean; exp() of it is the linear-space metric.
inline double log_mean_probability(std::span<const double> log_probs)
{
    if (log_probs.empty())
        return -std::numeric_limits<double>::infinity();
    return log_sum_exp(log_probs) - std::log(static_cast<double>(log_probs.size()));
}

struct TrajectorySimilarity {
    double value = 0.0; // linear mean
    double log_value = -std::numeric_limits<double>::infinity();
    bool empty = true;
};

inline TrajectorySimilarity trajectory_similarity(const GmmNoveltyModel& model, std::span<const Trajectory> trajs)
{
    TrajectorySimilarity out;
    if (trajs.empty())
        return out;
    std::vector<double> lp;
    lp.reserve(trajs.size());
    for (const auto& t : trajs)
        lp.push_back(model.log_probability(t));
    out.log_value = log_mean_probability(lp);
    out.value = std::exp(out.log_value);
    out.empty = false;
    return out;
}

/// One configuration's raw metrics, as fed to hybrid_score.
struct MetricRow {
    double cri = 0.0;
    double cvg = 0.0;
    double dis = 0.0;
    double traj = 0.0;
    // When set, 1/traj is taken from this log value instead of traj.
    // Min-max normalization is scale free, so the column is evaluated as
    // exp(-log_traj - max) and never overflows.
    std::optional<double> log_traj;
};

inline constexpr std::array<double, 4> kHybridWeights = {0.5, 0.2, 0.1, 0.2};

/// Weighted sum of min-max normalized columns (cri, cvg, dis, 1/traj)
/// across the compared configurations. A column with no spread maps to 0.5.
inline std::vector<double> hybrid_score(std::span<const MetricRow> rows,
                                        const std::array<double, 4>& weights = kHybridWeights)
{
    if (rows.size() < 2)
        throw InputError("hybrid score needs at least two configurations to normalize across");
    const std::size_t n = rows.size();
    std::array<std::vector<double>, 4> cols;
    for (auto& c : cols)
        c.resize(n);
    const bool logs = std::all_of(rows.begin(), rows.end(), [](const MetricRow& r) { return r.log_traj.has_value(); });
    double top = -std::numeric_limits<double>::infinity();
    if (logs)
        for (const auto& r : rows)
            top = std::max(top, -*r.log_traj);
    for (std::size_t i = 0; i < n; ++i) {
        cols[0][i] = rows[i].cri;
        cols[1][i] = rows[i].cvg;
        cols[2][i] = rows[i].dis;
        if (!logs)
            cols[3][i] = 1.0 / rows[i].traj;
        else if (std::isinf(top)) // an empty set (traj = 0) dominates the column
            cols[3][i] = std::isinf(*rows[i].log_traj) ? 1.0 : 0.0;
        else
            cols[3][i] = std::exp(-*rows[i].log_traj - top);
    }
    std::vector<double> score(n, 0.0);
    for (std::size_t c = 0; c < 4; ++c) {
        const auto [lo, hi] = std::minmax_element(cols[c].begin(), cols[c].end());
        const double spread = *hi - *lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = (spread > 0.0 && std::isfinite(spread)) ? (cols[c][i] - *lo) / spread : 0.5;
            score[i] += weights[c] * v;
        }
    }
    return score;
}

} // namespace dualfuzz
