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

// Hypercube tessellation of the scenario parameter space and the per-cell
// statistics (test density D, critical count F, criticality K) kept on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace dualfuzz {

struct Interval {
    double lo;
    double hi;
    double width() const { return hi - lo; }
};

/// N-dimensional parameter box plus its uniform partition counts.
///
/// `metric[i] == false` marks a dimension without a meaningful distance
/// (e.g. an encoded category); distance-based metrics skip it.
class ScenarioSpec {
public:
    ScenarioSpec() = default;

    ScenarioSpec(std::vector<Interval> bounds, std::vector<std::uint32_t> partitions,
                 std::vector<bool> metric = {})
        : bounds_(std::move(bounds))
        , partitions_(std::move(partitions))
        , metric_(std::move(metric))
    {
        if (bounds_.empty())
            throw InputError("scenario spec needs at least one dimension");
        if (partitions_.size() != bounds_.size())
            throw InputError("partition count list does not match the number of dimensions");
        if (metric_.empty())
            metric_.assign(bounds_.size(), true);
        if (metric_.size() != bounds_.size())
            throw InputError("metric mask does not match the number of dimensions");
        total_ = 1;
        for (std::size_t i = 0; i < bounds_.size(); ++i) {
            if (!(bounds_[i].lo < bounds_[i].hi) || !std::isfinite(bounds_[i].lo) || !std::isfinite(bounds_[i].hi))
                throw InputError("dimension " + std::to_string(i) + " has an empty or non-finite interval");
            if (partitions_[i] < 1)
                throw InputError("dimension " + std::to_string(i) + " has zero partitions");
            if (total_ > std::numeric_limits<std::uint64_t>::max() / partitions_[i])
                throw InputError("total cell count does not fit in 64 bits");
            total_ *= partitions_[i];
        }
    }

    /// Uniform partitions: the same count on every dimension.
    static ScenarioSpec uniform(std::vector<Interval> bounds, std::uint32_t m, std::vector<bool> metric = {})
    {
        std::vector<std::uint32_t> parts(bounds.size(), m);
        return ScenarioSpec(std::move(bounds), std::move(parts), std::move(metric));
    }

    /// Largest uniform partition count with m^N <= max_cells.
    static std::uint32_t default_partitions(std::size_t dims, std::uint64_t max_cells = 1'000'000)
    {
        std::uint32_t m = 1;
        for (;;) {
            long double cells = std::pow(static_cast<long double>(m + 1), static_cast<long double>(dims));
            if (cells > static_cast<long double>(max_cells))
                return m;
            ++m;
        }
    }

    std::size_t dims() const { return bounds_.size(); }
    const Interval& bound(std::size_t i) const { return bounds_[i]; }
    const std::vector<Interval>& bounds() const { return bounds_; }
    std::uint32_t partitions(std::size_t i) const { return partitions_[i]; }
    const std::vector<std::uint32_t>& partitions() const { return partitions_; }
    const std::vector<bool>& metric() const { return metric_; }
    std::uint64_t total_cells() const { return total_; }

    /// j-th division point of dimension i; endpoints are exact.
    double partition_point(std::size_t i, std::uint32_t j) const
    {
        const auto& b = bounds_[i];
        const auto m = partitions_[i];
        if (j == 0)
            return b.lo;
        if (j >= m)
            return b.hi;
        return b.lo + (static_cast<double>(j) / m) * (b.hi - b.lo);
    }

    bool contains(const Scenario& s) const
    {
        if (s.size() != dims())
            return false;
        for (std::size_t i = 0; i < dims(); ++i)
            if (!(s[i] >= bounds_[i].lo && s[i] <= bounds_[i].hi))
                return false;
        return true;
    }

    Scenario clip(Scenario s) const
    {
        for (std::size_t i = 0; i < dims(); ++i)
            s[i] = std::clamp(s[i], bounds_[i].lo, bounds_[i].hi);
        return s;
    }

    Scenario sample_uniform(RandomStream& rng) const
    {
        Scenario s{std::vector<double>(dims())};
        for (std::size_t i = 0; i < dims(); ++i)
            s[i] = rng.uniform(bounds_[i].lo, bounds_[i].hi);
        return s;
    }

private:
    std::vector<Interval> bounds_;
    std::vector<std::uint32_t> partitions_;
    std::vector<bool> metric_;
    std::uint64_t total_ = 0;
};

/// A cell of the tessellation: multi-index and 1-based label.
struct SubspaceIndex {
    std::vector<std::uint32_t> k;
    std::uint64_t label = 0;

    friend bool operator==(const SubspaceIndex& a, const SubspaceIndex& b) { return a.label == b.label; }
};

struct SubspaceStats {
    std::uint64_t density = 0;  // D
    std::uint64_t critical = 0; // F

    // K = F / D, and 0 for a cell that was never tested.
    double criticality() const { return density == 0 ? 0.0 : static_cast<double>(critical) / density; }
};

/// Division points p^(0..m) of one dimension.
inline std::vector<double> partition_points(const ScenarioSpec& spec, std::size_t dim)
{
    if (dim >= spec.dims())
        throw InputError("dimension out of range");
    std::vector<double> pts(spec.partitions(dim) + 1);
    for (std::uint32_t j = 0; j < pts.size(); ++j)
        pts[j] = spec.partition_point(dim, j);
    return pts;
}

// Row-major with dimension 0 varying fastest.
inline std::uint64_t label_of(const ScenarioSpec& spec, const std::vector<std::uint32_t>& k)
{
    if (k.size() != spec.dims())
        throw InputError("multi-index has the wrong number of dimensions");
    std::uint64_t label = 0;
    std::uint64_t stride = 1;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] >= spec.partitions(i))
            throw InputError("multi-index component " + std::to_string(i) + " out of range");
        label += k[i] * stride;
        stride *= spec.partitions(i);
    }
    return label + 1;
}

inline SubspaceIndex index_of(const ScenarioSpec& spec, std::uint64_t label)
{
    if (label < 1 || label > spec.total_cells())
        throw InputError("cell label " + std::to_string(label) + " out of range");
    SubspaceIndex idx;
    idx.label = label;
    idx.k.resize(spec.dims());
    std::uint64_t rest = label - 1;
    for (std::size_t i = 0; i < spec.dims(); ++i) {
        idx.k[i] = static_cast<std::uint32_t>(rest % spec.partitions(i));
        rest /= spec.partitions(i);
    }
    return idx;
}

inline SubspaceIndex make_index(const ScenarioSpec& spec, std::vector<std::uint32_t> k)
{
    const auto label = label_of(spec, k);
    return SubspaceIndex{std::move(k), label};
}

/// The abstraction map from a scenario to its cell. Cells are half-open
/// except the last one per dimension, which also owns the upper bound.
inline SubspaceIndex abstract(const ScenarioSpec& spec, const Scenario& s)
{
    if (s.size() != spec.dims())
        throw InputError("scenario has " + std::to_string(s.size()) + " coordinates, spec has " +
                         std::to_string(spec.dims()));
    std::vector<std::uint32_t> k(spec.dims());
    for (std::size_t i = 0; i < spec.dims(); ++i) {
        const auto& b = spec.bound(i);
        if (!(s[i] >= b.lo && s[i] <= b.hi))
            throw InputError("coordinate " + std::to_string(i) + " is outside its bounds");
        const auto m = spec.partitions(i);
        double pos = std::floor((s[i] - b.lo) / b.width() * m);
        auto ki = static_cast<std::uint32_t>(std::clamp(pos, 0.0, static_cast<double>(m - 1)));
        // Reconcile rounding with the exact division points.
        while (ki > 0 && s[i] < spec.partition_point(i, ki))
            --ki;
        while (ki + 1 < m && s[i] >= spec.partition_point(i, ki + 1))
            ++ki;
        k[i] = ki;
    }
    return make_index(spec, std::move(k));
}

/// Moore neighborhood, truncated at the grid boundary, ascending by label.
inline std::vector<SubspaceIndex> neighbors(const ScenarioSpec& spec, const SubspaceIndex& cell)
{
    const std::size_t n = spec.dims();
    std::vector<std::uint32_t> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = cell.k[i] == 0 ? 0 : cell.k[i] - 1;
        hi[i] = std::min(cell.k[i] + 1, spec.partitions(i) - 1);
    }
    std::vector<SubspaceIndex> out;
    std::vector<std::uint32_t> cur = lo;
    for (;;) {
        if (cur != cell.k)
            out.push_back(make_index(spec, cur));
        std::size_t i = 0;
        while (i < n && cur[i] == hi[i]) {
            cur[i] = lo[i];
            ++i;
        }
        if (i == n)
            break;
        ++cur[i];
    }
    // The odometer runs dimension 0 fastest, which is already label order.
    return out;
}

/// Sparse per-cell statistics over a tessellated spec.
class SubspaceGrid {
public:
    SubspaceGrid() = default;
    explicit SubspaceGrid(ScenarioSpec spec) : spec_(std::move(spec)) {}

    const ScenarioSpec& spec() const { return spec_; }

    void record_test(const SubspaceIndex& cell, bool critical)
    {
        if (cell.label < 1 || cell.label > spec_.total_cells())
            throw InputError("cell label out of range");
        auto& st = cells_[cell.label];
        ++st.density;
        if (critical)
            ++st.critical;
        ++total_tests_;
    }

    SubspaceIndex record_test(const Scenario& s, bool critical)
    {
        auto cell = abstract(spec_, s);
        record_test(cell, critical);
        return cell;
    }

    SubspaceStats stats(std::uint64_t label) const
    {
        auto it = cells_.find(label);
        return it == cells_.end() ? SubspaceStats{} : it->second;
    }
    SubspaceStats stats(const SubspaceIndex& cell) const { return stats(cell.label); }

    /// Touched cells, ascending by label.
    const std::map<std::uint64_t, SubspaceStats>& touched() const { return cells_; }

    std::uint64_t covered_count() const { return cells_.size(); }
    std::uint64_t zero_density_count() const { return spec_.total_cells() - cells_.size(); }
    std::uint64_t total_tests() const { return total_tests_; }

    std::uint64_t total_critical() const
    {
        std::uint64_t f = 0;
        for (const auto& [label, st] : cells_)
            f += st.critical;
        return f;
    }

    /// Label of the r-th (0-based, ascending) untested cell.
    std::uint64_t nth_zero_density(std::uint64_t r) const
    {
        if (r >= zero_density_count())
            throw InputError("zero-density rank out of range");
        std::uint64_t label = r + 1;
        for (const auto& [touched, st] : cells_) {
            if (touched <= label)
                ++label;
            else
                break;
        }
        return label;
    }

    /// Every untested cell. Materializes up to total_cells() entries.
    std::vector<SubspaceIndex> zero_density_subspaces() const
    {
        std::vector<SubspaceIndex> out;
        out.reserve(zero_density_count());
        auto it = cells_.begin();
        for (std::uint64_t label = 1; label <= spec_.total_cells(); ++label) {
            if (it != cells_.end() && it->first == label) {
                ++it;
                continue;
            }
            out.push_back(index_of(spec_, label));
        }
        return out;
    }

    /// Tested cells ordered by K desc, then F desc, then label asc.
    std::vector<SubspaceIndex> top_k_critical(std::size_t k) const
    {
        if (k < 1)
            throw InputError("top-k needs k >= 1");
        std::vector<std::pair<std::uint64_t, SubspaceStats>> v(cells_.begin(), cells_.end());
        const auto n = std::min(k, v.size());
        std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), v.end(),
                          [](const auto& a, const auto& b) {
                              // Compare F_a/D_a with F_b/D_b exactly.
                              const auto lhs = a.second.critical * b.second.density;
                              const auto rhs = b.second.critical * a.second.density;
                              if (lhs != rhs)
                                  return lhs > rhs;
                              if (a.second.critical != b.second.critical)
                                  return a.second.critical > b.second.critical;
                              return a.first < b.first;
                          });
        std::vector<SubspaceIndex> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(index_of(spec_, v[i].first));
        return out;
    }

    /// Cells holding the minimal density among all cells (untested cells
    /// included, so this is only non-trivial once coverage is complete).
    std::vector<std::uint64_t> min_density_labels() const
    {
        std::vector<std::uint64_t> out;
        if (zero_density_count() > 0)
            return out;
        std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
        for (const auto& [label, st] : cells_)
            best = std::min(best, st.density);
        for (const auto& [label, st] : cells_)
            if (st.density == best)
                out.push_back(label);
        return out;
    }

private:
    ScenarioSpec spec_;
    std::map<std::uint64_t, SubspaceStats> cells_;
    std::uint64_t total_tests_ = 0;
};

} // namespace dualfuzz
