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

// Dual-mode scenario generation: sensitivity-guided local perturbation and
// hybrid global exploration, switched by a sliding-window efficiency monitor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "core.hpp"
#include "rng.hpp"
#include "space.hpp"

namespace dualfuzz {

enum class Mode { LocalPerturbation, GlobalExploration };

inline const char* to_string(Mode m) { return m == Mode::LocalPerturbation ? "local" : "global"; }

enum class Branch { Local, Directional, Random };

inline const char* to_string(Branch b)
{
    switch (b) {
    case Branch::Local: return "local";
    case Branch::Directional: return "directional";
    case Branch::Random: return "random";
    }
    return "?";
}

struct GeneratorConfig {
    double alpha = 0.8;          // directional-branch probability
    std::size_t top_k = 5;
    double perturb_scale = 0.05; // fraction of each dimension's range
    std::size_t hysteresis = 1;

    void validate() const
    {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw InputError("alpha must lie in [0, 1]");
        if (top_k < 1)
            throw InputError("top_k must be at least 1");
        if (!(perturb_scale > 0.0 && perturb_scale <= 1.0))
            throw InputError("perturb_scale must lie in (0, 1]");
        if (hysteresis < 1)
            throw InputError("hysteresis must be at least 1");
    }
};

/// Critical fraction over the last W tests, plus the hysteresis state that
/// turns efficiency readings into a generation mode.
class WindowMonitor {
public:
    WindowMonitor(std::size_t window, double theta, std::size_t hysteresis = 1,
                  Mode initial = Mode::LocalPerturbation)
        : window_(window)
        , theta_(theta)
        , hysteresis_(hysteresis)
        , mode_(initial)
    {
        if (window_ < 1)
            throw InputError("window size must be at least 1");
        if (!(theta_ >= 0.0 && theta_ <= 1.0))
            throw InputError("theta must lie in [0, 1]");
        if (hysteresis_ < 1)
            throw InputError("hysteresis must be at least 1");
    }

    void push(bool critical)
    {
        buffer_.push_back(critical);
        critical_ += critical ? 1 : 0;
        if (buffer_.size() > window_) {
            critical_ -= buffer_.front() ? 1 : 0;
            buffer_.pop_front();
        }
    }

    /// #F = N_cri / W. Reads 1.0 until the window has filled, so a campaign
    /// starts out perturbing its seed pool.
    double efficiency() const
    {
        if (buffer_.size() < window_)
            return 1.0;
        return static_cast<double>(critical_) / static_cast<double>(window_);
    }

    /// Feeds one efficiency reading through the hysteresis rule: the mode
    /// flips once h consecutive readings disagree with it.
    Mode evaluate(double reading)
    {
        const Mode wanted = reading >= theta_ ? Mode::LocalPerturbation : Mode::GlobalExploration;
        if (wanted == mode_) {
            streak_ = 0;
        } else if (++streak_ >= hysteresis_) {
            mode_ = wanted;
            streak_ = 0;
        }
        return mode_;
    }

    Mode mode() const { return mode_; }
    std::size_t window() const { return window_; }
    double theta() const { return theta_; }
    std::size_t hysteresis() const { return hysteresis_; }
    std::size_t observed() const { return buffer_.size(); }
    std::size_t critical_in_window() const { return critical_; }

private:
    std::size_t window_;
    double theta_;
    std::size_t hysteresis_;
    Mode mode_;
    std::size_t streak_ = 0;
    std::deque<bool> buffer_;
    std::size_t critical_ = 0;
};

inline double efficiency(const WindowMonitor& m) { return m.efficiency(); }

inline Mode choose_mode(WindowMonitor& m) { return m.evaluate(m.efficiency()); }

/// Uniform per-coordinate offsets of up to perturb_scale * range, clipped to
/// the box. Never returns the base itself.
inline Scenario perturb_local(const Scenario& base, const ScenarioSpec& spec, const GeneratorConfig& cfg,
                              RandomStream& rng)
{
    if (!spec.contains(base))
        throw InputError("base scenario is outside the spec box");
    for (;;) {
        Scenario s = base;
        for (std::size_t i = 0; i < spec.dims(); ++i) {
            const double r = cfg.perturb_scale * spec.bound(i).width();
            s[i] += rng.uniform(-r, r);
        }
        s = spec.clip(std::move(s));
        if (s != base)
            return s;
    }
}

/// Uniform point inside a cell's box [p_k, p_{k+1}) per dimension.
inline Scenario sample_within(const ScenarioSpec& spec, const SubspaceIndex& cell, RandomStream& rng)
{
    Scenario s{std::vector<double>(spec.dims())};
    for (std::size_t i = 0; i < spec.dims(); ++i) {
        const double lo = spec.partition_point(i, cell.k[i]);
        const double hi = spec.partition_point(i, cell.k[i] + 1);
        double x = lo + (hi - lo) * rng.uniform();
        if (x >= hi)
            x = std::nextafter(hi, lo);
        s[i] = std::max(x, lo);
    }
    return s;
}

/// Calls fn(label) for every Moore neighbor of `cell` inside the grid, in
/// ascending label order, without materializing multi-indices.
template <typename Fn>
void for_each_neighbor_label(const ScenarioSpec& spec, const SubspaceIndex& cell, Fn&& fn)
{
    const std::size_t n = spec.dims();
    std::vector<std::uint32_t> lo(n), hi(n), cur(n);
    std::vector<std::uint64_t> stride(n);
    std::uint64_t st = 1;
    std::uint64_t label = 1;
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = cell.k[i] == 0 ? 0 : cell.k[i] - 1;
        hi[i] = std::min(cell.k[i] + 1, spec.partitions(i) - 1);
        cur[i] = lo[i];
        stride[i] = st;
        label += lo[i] * st;
        st *= spec.partitions(i);
    }
    for (;;) {
        if (label != cell.label)
            fn(label);
        std::size_t i = 0;
        while (i < n && cur[i] == hi[i]) {
            label -= (cur[i] - lo[i]) * stride[i];
            cur[i] = lo[i];
            ++i;
        }
        if (i == n)
            return;
        ++cur[i];
        label += stride[i];
    }
}

struct GlobalChoice {
    SubspaceIndex cell;
    Branch branch = Branch::Random;
    bool fallback = false;                 // directional branch drawn but infeasible
    std::optional<std::uint64_t> source;   // the high-criticality cell steered from
};

/// Target-cell choice of hybrid global exploration. With probability alpha,
/// an untested neighbor of one of the top-k critical cells (cells with
/// K > 0 only); otherwise, or when that set is empty, any untested cell;
/// once every cell is tested, a cell of minimal density.
inline GlobalChoice choose_global_cell(const SubspaceGrid& grid, const GeneratorConfig& cfg, RandomStream& rng)
{
    const auto& spec = grid.spec();
    GlobalChoice out;
    const double r = rng.uniform();
    if (r < cfg.alpha) {
        auto top = grid.top_k_critical(cfg.top_k);
        std::erase_if(top, [&](const SubspaceIndex& c) { return grid.stats(c).critical == 0; });
        if (!top.empty()) {
            const auto& src = top[rng.index(top.size())];
            std::vector<std::uint64_t> cands;
            for_each_neighbor_label(spec, src, [&](std::uint64_t l) {
                if (grid.stats(l).density == 0)
                    cands.push_back(l);
            });
            if (!cands.empty()) {
                out.cell = index_of(spec, cands[rng.index(cands.size())]);
                out.branch = Branch::Directional;
                out.source = src.label;
                return out;
            }
        }
        out.fallback = true;
    }
    out.branch = Branch::Random;
    if (grid.zero_density_count() > 0) {
        out.cell = index_of(spec, grid.nth_zero_density(rng.index(grid.zero_density_count())));
    } else {
        const auto mins = grid.min_density_labels();
        out.cell = index_of(spec, mins[rng.index(mins.size())]);
    }
    return out;
}

struct GlobalSample {
    Scenario scenario;
    GlobalChoice choice;
};

inline GlobalSample explore_global(const SubspaceGrid& grid, const GeneratorConfig& cfg, RandomStream& rng)
{
    GlobalSample g;
    g.choice = choose_global_cell(grid, cfg, rng);
    g.scenario = sample_within(grid.spec(), g.choice.cell, rng);
    return g;
}

} // namespace dualfuzz
