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

// Environment contract and the three built-in scripted environments.
//
// Every environment is a pure function of (scenario, constants). Constants
// live in `constants::` and are versioned by kConstantsVersion; the slice
// oracle fixture under tests/fixtures records the version it was built with.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "space.hpp"

namespace dualfuzz {

inline constexpr int kConstantsVersion = 1;

/// Weights of the discounted task execution score.
struct EnvScoringConfig {
    double gamma = 0.99;
    double w_dist = 1.0;
    double w_vel = 0.1;
    double lambda_f = 50.0; // per distinct violated constraint
    int horizon = 200;      // M_max, in steps

    void validate() const
    {
        if (!(gamma > 0.0 && gamma <= 1.0))
            throw InputError("discount factor must lie in (0, 1]");
        if (w_dist < 0.0 || w_vel < 0.0 || lambda_f < 0.0)
            throw InputError("scoring weights must be nonnegative");
        if (horizon < 1)
            throw InputError("horizon must be at least one step");
    }
};

struct StepObservation {
    std::vector<double> state;
    double distance = 0.0;    // d_t
    double speed_error = 0.0; // delta v_t
    bool violation = false;
};

/// Ordered state-feature vectors T_0..T_M.
struct Trajectory {
    std::vector<std::vector<double>> states;

    std::size_t size() const { return states.size(); }
    bool empty() const { return states.empty(); }
    std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }
};

struct EpisodeResult {
    std::vector<StepObservation> steps;
    double task_score = 0.0;
    bool critical = false;
    bool timed_out = false;

    bool any_violation() const
    {
        return std::any_of(steps.begin(), steps.end(), [](const auto& s) { return s.violation; });
    }

    Trajectory trajectory() const
    {
        Trajectory t;
        t.states.reserve(steps.size());
        for (const auto& s : steps)
            t.states.push_back(s.state);
        return t;
    }
};

/// Discounted score sum_t gamma^t (w_dist f(d_t) + w_vel g(dv_t)) minus
/// lambda_f per violated constraint. A step violation counts as one
/// constraint; `extra_violations` adds others (e.g. a timeout).
template <typename DistanceScore, typename SpeedScore>
double task_score(std::span<const StepObservation> steps, const EnvScoringConfig& cfg, DistanceScore&& f,
                  SpeedScore&& g, int extra_violations = 0)
{
    if (steps.empty())
        throw InputError("task score needs at least one step");
    double sum = 0.0;
    double discount = 1.0;
    bool violated = false;
    for (const auto& s : steps) {
        sum += discount * (cfg.w_dist * f(s.distance) + cfg.w_vel * g(s.speed_error));
        discount *= cfg.gamma;
        violated = violated || s.violation;
    }
    const int constraints = (violated ? 1 : 0) + extra_violations;
    return sum - cfg.lambda_f * constraints;
}

class Environment {
public:
    explicit Environment(EnvScoringConfig scoring) : scoring_(scoring) { scoring_.validate(); }
    virtual ~Environment() = default;

    virtual std::string_view name() const = 0;
    virtual std::vector<Interval> bounds() const = 0;
    virtual std::vector<bool> metric() const { return std::vector<bool>(bounds().size(), true); }
    virtual std::size_t state_dim() const = 0;

    /// Simulates one episode. Throws InputError for out-of-box scenarios.
    virtual EpisodeResult run(const Scenario& s) const = 0;

    const EnvScoringConfig& scoring() const { return scoring_; }

    ScenarioSpec make_spec(std::vector<std::uint32_t> partitions) const
    {
        return ScenarioSpec(bounds(), std::move(partitions), metric());
    }

protected:
    void check_scenario(const Scenario& s) const
    {
        const auto b = bounds();
        if (s.size() != b.size())
            throw InputError(std::string(name()) + ": scenario has " + std::to_string(s.size()) +
                             " parameters, expected " + std::to_string(b.size()));
        for (std::size_t i = 0; i < b.size(); ++i)
            if (!(s[i] >= b[i].lo && s[i] <= b[i].hi))
                throw InputError(std::string(name()) + ": parameter " + std::to_string(i) + " out of range");
    }

    EnvScoringConfig scoring_;
};

namespace constants {

namespace intercept {
inline constexpr double kDt = 0.1;
inline constexpr double kSpeedUnit = 10.0; // a speed of 1.0 covers 10 length units per time unit
inline constexpr double kCollisionRadius = 0.3;
inline constexpr double kActivationRadius = 1.5;
inline constexpr double kLookahead = 3.0;     // time units
inline constexpr double kMaxTurn = 0.03;      // rad per step
inline constexpr double kAvoidSpeedFactor = 0.6;
inline constexpr double kGoalX = 10.0;
inline constexpr double kGoalY = 0.0;
inline constexpr double kGoalRadius = 0.5;
inline constexpr double kDistanceCap = 5.0;
inline constexpr int kHorizon = 200;
} // namespace intercept

namespace corridor {
inline constexpr double kDt = 0.1;
inline constexpr double kSpeed = 1.0;
inline constexpr double kAttraction = 1.0;
inline constexpr double kRepulsion = 0.4;
inline constexpr double kInfluence = 1.0; // repulsion acts within this surface distance
inline constexpr double kGoalRadius = 0.2;
inline constexpr int kHorizon = 300;
} // namespace corridor

namespace walker {
inline constexpr int kSegments = 8;
inline constexpr double kDt = 0.05;
inline constexpr double kGravity = 10.0;
inline constexpr double kSpeed = 1.0;       // commanded horizontal speed
inline constexpr double kApex = 0.8;        // apex height of a hop above its launch point
inline constexpr double kLegReach = 0.8;    // a face whose top is within reach of the hip is climbed
inline constexpr double kClearance = kApex + kLegReach; // h_max: the largest climbable step
inline constexpr double kStanceTime = 0.1;
inline constexpr int kHorizon = 400;
inline double launch_velocity() { return std::sqrt(2.0 * kGravity * kApex); }
} // namespace walker

} // namespace constants

/// Two aircraft in the plane. The ego flies from the origin to (10, 0)
/// under a closest-point-of-approach avoidance law; the intruder flies a
/// straight line. Parameters: intruder x0, y0, heading, speed; ego speed.
class Intercept2d final : public Environment {
public:
    explicit Intercept2d(EnvScoringConfig scoring = default_scoring(),
                         double activation_radius = constants::intercept::kActivationRadius)
        : Environment(scoring)
        , activation_radius_(activation_radius)
    {
    }

    static EnvScoringConfig default_scoring()
    {
        EnvScoringConfig c;
        c.horizon = constants::intercept::kHorizon;
        return c;
    }

    std::string_view name() const override { return "intercept2d"; }
    std::vector<Interval> bounds() const override
    {
        return {{-10.0, 10.0}, {-10.0, 10.0}, {0.0, 2.0 * std::numbers::pi}, {0.1, 1.0}, {0.1, 1.0}};
    }
    std::size_t state_dim() const override { return 4; }
    double activation_radius() const { return activation_radius_; }

    EpisodeResult run(const Scenario& s) const override
    {
        using namespace constants::intercept;
        check_scenario(s);
        const double step_len = kDt * kSpeedUnit;
        double ex = 0.0, ey = 0.0, eh = 0.0;
        double ix = s[0], iy = s[1];
        const double ivx = s[3] * step_len * std::cos(s[2]);
        const double ivy = s[3] * step_len * std::sin(s[2]);
        const double cmd = s[4];

        EpisodeResult res;
        double speed = cmd;
        bool done = false;
        for (int t = 0; t <= scoring_.horizon; ++t) {
            StepObservation obs;
            obs.state = {ex, ey, ix, iy};
            obs.distance = std::hypot(ix - ex, iy - ey);
            obs.speed_error = speed - cmd;
            obs.violation = obs.distance < kCollisionRadius;
            res.steps.push_back(std::move(obs));
            if (res.steps.back().violation || t == scoring_.horizon)
                break;

            // Policy: pick heading and speed for the coming step.
            double rx = ix - ex, ry = iy - ey;
            double evx = cmd * step_len * std::cos(eh), evy = cmd * step_len * std::sin(eh);
            double wx = ivx - evx, wy = ivy - evy;
            double w2 = wx * wx + wy * wy;
            bool avoid = false;
            if (activation_radius_ > 0.0 && w2 > 0.0) {
                double tcpa = -(rx * wx + ry * wy) / w2; // in steps
                if (tcpa > 0.0 && tcpa * kDt < kLookahead) {
                    double miss = std::hypot(rx + wx * tcpa, ry + wy * tcpa);
                    avoid = miss < activation_radius_;
                }
            }
            if (avoid) {
                // Turn away from the side the intruder is on.
                double side = std::cos(eh) * ry - std::sin(eh) * rx;
                eh += side >= 0.0 ? -kMaxTurn : kMaxTurn;
                speed = cmd * kAvoidSpeedFactor;
            } else {
                double want = std::atan2(kGoalY - ey, kGoalX - ex);
                double diff = std::remainder(want - eh, 2.0 * std::numbers::pi);
                eh += std::clamp(diff, -kMaxTurn, kMaxTurn);
                speed = cmd;
            }
            eh = std::remainder(eh, 2.0 * std::numbers::pi);

            const double dx = speed * step_len * std::cos(eh), dy = speed * step_len * std::sin(eh);
            // Closest approach over the step (relative motion is linear).
            const double mx = ivx - dx, my = ivy - dy;
            const double m2 = mx * mx + my * my;
            double tau = m2 > 0.0 ? std::clamp(-(rx * mx + ry * my) / m2, 0.0, 1.0) : 0.0;
            const double sep_min = std::hypot(rx + mx * tau, ry + my * tau);
            // Goal check over the step segment.
            const double gx = kGoalX - ex, gy = kGoalY - ey;
            const double d2 = dx * dx + dy * dy;
            double u = d2 > 0.0 ? std::clamp((gx * dx + gy * dy) / d2, 0.0, 1.0) : 0.0;
            const double goal_min = std::hypot(gx - dx * u, gy - dy * u);

            ex += dx;
            ey += dy;
            ix += ivx;
            iy += ivy;
            if (sep_min < kCollisionRadius) {
                StepObservation hit;
                hit.state = {ex, ey, ix, iy};
                hit.distance = sep_min;
                hit.speed_error = speed - cmd;
                hit.violation = true;
                res.steps.push_back(std::move(hit));
                break;
            }
            if (goal_min <= kGoalRadius) {
                StepObservation last;
                last.state = {ex, ey, ix, iy};
                last.distance = std::hypot(ix - ex, iy - ey);
                last.speed_error = speed - cmd;
                res.steps.push_back(std::move(last));
                done = true;
                break;
            }
        }
        const bool violated = res.any_violation();
        res.timed_out = !done && !violated;
        res.critical = violated || res.timed_out;
        res.task_score = task_score(
            std::span<const StepObservation>(res.steps), scoring_,
            [](double d) { return std::min(d, kDistanceCap) / kDistanceCap; },
            [](double dv) { return -std::abs(dv); }, res.timed_out ? 1 : 0);
        return res;
    }

private:
    double activation_radius_;
};

/// Point-mass agent crossing a 10x10 arena from the origin to a goal,
/// driven by a potential field around three disc obstacles.
/// Parameters: three (x, y, radius) obstacles, then the goal (x, y).
class CorridorNav final : public Environment {
public:
    explicit CorridorNav(EnvScoringConfig scoring = default_scoring()) : Environment(scoring) {}

    static EnvScoringConfig default_scoring()
    {
        EnvScoringConfig c;
        c.horizon = constants::corridor::kHorizon;
        return c;
    }

    std::string_view name() const override { return "corridor_nav"; }
    std::vector<Interval> bounds() const override
    {
        std::vector<Interval> b;
        for (int i = 0; i < 3; ++i) {
            b.push_back({0.0, 10.0});
            b.push_back({0.0, 10.0});
            b.push_back({0.2, 1.0});
        }
        b.push_back({0.0, 10.0});
        b.push_back({0.0, 10.0});
        return b;
    }
    std::size_t state_dim() const override { return 4; }

    EpisodeResult run(const Scenario& s) const override
    {
        using namespace constants::corridor;
        check_scenario(s);
        const double gx = s[9], gy = s[10];
        double px = 0.0, py = 0.0, vx = 0.0, vy = 0.0;
        const double d0 = std::hypot(gx, gy);

        auto inside = [&](double x, double y) {
            for (int j = 0; j < 3; ++j)
                if (std::hypot(x - s[3 * j], y - s[3 * j + 1]) < s[3 * j + 2])
                    return true;
            return false;
        };

        EpisodeResult res;
        bool done = false;
        for (int t = 0; t <= scoring_.horizon; ++t) {
            StepObservation obs;
            obs.state = {px, py, vx, vy};
            obs.distance = std::hypot(gx - px, gy - py);
            obs.speed_error = t == 0 ? 0.0 : std::hypot(vx, vy) - kSpeed;
            obs.violation = inside(px, py);
            const bool at_goal = obs.distance <= kGoalRadius;
            res.steps.push_back(std::move(obs));
            if (res.steps.back().violation)
                break;
            if (at_goal) {
                done = true;
                break;
            }
            if (t == scoring_.horizon)
                break;

            double fx = 0.0, fy = 0.0;
            const double dg = std::hypot(gx - px, gy - py);
            fx += kAttraction * (gx - px) / dg;
            fy += kAttraction * (gy - py) / dg;
            for (int j = 0; j < 3; ++j) {
                const double ox = px - s[3 * j], oy = py - s[3 * j + 1];
                const double dc = std::hypot(ox, oy);
                const double surf = dc - s[3 * j + 2];
                if (surf < kInfluence && dc > 0.0) {
                    const double sd = std::max(surf, 1e-3);
                    const double mag = kRepulsion * (1.0 / sd - 1.0 / kInfluence) / (sd * sd);
                    fx += mag * ox / dc;
                    fy += mag * oy / dc;
                }
            }
            const double fn = std::hypot(fx, fy);
            const double sp = std::min(fn, kSpeed);
            vx = fn > 0.0 ? fx / fn * sp : 0.0;
            vy = fn > 0.0 ? fy / fn * sp : 0.0;
            px += vx * kDt;
            py += vy * kDt;
        }
        const bool violated = res.any_violation();
        res.timed_out = !done && !violated;
        res.critical = violated || res.timed_out;
        res.task_score = task_score(
            std::span<const StepObservation>(res.steps), scoring_,
            [d0](double d) { return d0 > 0.0 ? 1.0 - std::min(d, d0) / d0 : 1.0; },
            [](double dv) { return -std::abs(dv); }, res.timed_out ? 1 : 0);
        return res;
    }
};

/// Scripted hopper crossing eight unit-width terrain segments with a fixed
/// gait: ballistic hops of height kApex, constant horizontal speed in
/// flight, a short stance after each landing. Reaching a step face with the
/// hip (foot + kLegReach) below its top is a fall; with only the foot below
/// it, the hopper scrambles up. Parameters: the eight segment heights.
///
/// Heights are treated as non-metric terrain codes for distance metrics.
class Walker1d final : public Environment {
public:
    explicit Walker1d(EnvScoringConfig scoring = default_scoring()) : Environment(scoring) {}

    static EnvScoringConfig default_scoring()
    {
        EnvScoringConfig c;
        c.horizon = constants::walker::kHorizon;
        return c;
    }

    std::string_view name() const override { return "walker1d"; }
    std::vector<Interval> bounds() const override
    {
        return std::vector<Interval>(constants::walker::kSegments, Interval{-1.0, 1.0});
    }
    std::vector<bool> metric() const override { return std::vector<bool>(constants::walker::kSegments, false); }
    std::size_t state_dim() const override { return 3; }

    EpisodeResult run(const Scenario& s) const override
    {
        using namespace constants::walker;
        check_scenario(s);
        const double v0 = launch_velocity();
        const double end_x = kSegments;

        // Continuous state, advanced in kDt slices with exact events inside.
        bool flying = true;
        double launch_x = 0.0, launch_y = s[0], launch_t = 0.0; // flight origin
        double stance_until = 0.0;
        double x = 0.0, y = s[0], vy = v0;
        int seg = 0;
        bool fell = false, done = false;

        EpisodeResult res;
        auto observe = [&](double speed) {
            StepObservation o;
            o.state = {x, y, vy};
            o.distance = std::max(end_x - x, 0.0);
            o.speed_error = speed - kSpeed;
            res.steps.push_back(std::move(o));
        };
        observe(kSpeed);

        for (int step = 1; step <= scoring_.horizon && !fell && !done; ++step) {
            const double t_end = step * kDt;
            double t = (step - 1) * kDt;
            const double x_start = x;
            while (t < t_end && !fell && !done) {
                if (!flying) {
                    if (stance_until > t_end) {
                        t = t_end;
                        break;
                    }
                    t = stance_until;
                    flying = true;
                    launch_x = x;
                    launch_y = y;
                    launch_t = t;
                    continue;
                }
                // Flight from (launch_x, launch_y) at launch_t.
                const double h = s[seg];
                const double disc = v0 * v0 + 2.0 * kGravity * (launch_y - h);
                const double tau_land = (v0 + std::sqrt(std::max(disc, 0.0))) / kGravity;
                const double tau_cross = (seg + 1 - launch_x) / kSpeed;
                const double tau_end = t_end - launch_t;
                if (tau_cross <= tau_land && tau_cross <= tau_end) {
                    const double yc = launch_y + v0 * tau_cross - 0.5 * kGravity * tau_cross * tau_cross;
                    t = launch_t + tau_cross;
                    x = seg + 1;
                    y = yc;
                    vy = v0 - kGravity * tau_cross;
                    if (seg + 1 == kSegments) {
                        done = true;
                    } else if (yc + kLegReach < s[seg + 1]) {
                        fell = true;
                    } else if (yc < s[seg + 1]) {
                        // Foot below the top, hip above it: scramble onto the step.
                        ++seg;
                        y = s[seg];
                        vy = 0.0;
                        flying = false;
                        stance_until = t + kStanceTime;
                    } else {
                        ++seg;
                    }
                } else if (tau_land <= tau_end) {
                    t = launch_t + tau_land;
                    x = launch_x + kSpeed * tau_land;
                    y = h;
                    vy = 0.0;
                    flying = false;
                    stance_until = t + kStanceTime;
                } else {
                    t = t_end;
                    x = launch_x + kSpeed * tau_end;
                    y = launch_y + v0 * tau_end - 0.5 * kGravity * tau_end * tau_end;
                    vy = v0 - kGravity * tau_end;
                }
            }
            observe((x - x_start) / kDt);
            if (fell)
                res.steps.back().violation = true;
        }
        res.timed_out = !done && !fell;
        res.critical = fell || res.timed_out;
        const double d0 = end_x;
        res.task_score = task_score(
            std::span<const StepObservation>(res.steps), scoring_,
            [d0](double d) { return 1.0 - std::min(d, d0) / d0; }, [](double dv) { return -std::abs(dv); },
            res.timed_out ? 1 : 0);
        return res;
    }
};

inline std::vector<std::string> environment_names() { return {"intercept2d", "corridor_nav", "walker1d"}; }

inline std::unique_ptr<Environment> make_environment(std::string_view name, const EnvScoringConfig* scoring = nullptr)
{
    if (name == "intercept2d")
        return std::make_unique<Intercept2d>(scoring ? *scoring : Intercept2d::default_scoring());
    if (name == "corridor_nav")
        return std::make_unique<CorridorNav>(scoring ? *scoring : CorridorNav::default_scoring());
    if (name == "walker1d")
        return std::make_unique<Walker1d>(scoring ? *scoring : Walker1d::default_scoring());
    throw InputError("unknown environment '" + std::string(name) + "'");
}

} // namespace dualfuzz
