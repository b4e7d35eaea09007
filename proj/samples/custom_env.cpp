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

// Drives the generator by hand against a user-defined environment: a
// braking car that fails when the obstacle is closer than its stopping
// distance.

#include <cmath>
#include <cstdio>

#include "dualfuzz/database.hpp"
#include "dualfuzz/generator.hpp"
#include "dualfuzz/novelty.hpp"

using namespace dualfuzz;

class BrakingCar final : public Environment {
public:
    BrakingCar() : Environment(scoring()) {}

    static EnvScoringConfig scoring()
    {
        EnvScoringConfig c;
        c.horizon = 100;
        return c;
    }

    std::string_view name() const override { return "braking_car"; }
    // Initial speed, obstacle distance, braking deceleration.
    std::vector<Interval> bounds() const override { return {{5.0, 30.0}, {10.0, 80.0}, {3.0, 9.0}}; }
    std::size_t state_dim() const override { return 2; }

    EpisodeResult run(const Scenario& s) const override
    {
        check_scenario(s);
        double v = s[0], gap = s[1];
        const double dt = 0.1;
        EpisodeResult res;
        for (int t = 0; t <= scoring_.horizon; ++t) {
            StepObservation o;
            o.state = {v, gap};
            o.distance = std::max(gap, 0.0);
            o.violation = gap <= 0.0;
            res.steps.push_back(o);
            if (o.violation || v == 0.0)
                break;
            gap -= v * dt;
            v = std::max(0.0, v - s[2] * dt);
        }
        res.critical = res.any_violation();
        res.task_score = task_score(
            std::span<const StepObservation>(res.steps), scoring_, [](double d) { return std::min(d, 10.0) / 10.0; },
            [](double) { return 0.0; });
        return res;
    }
};

int main()
{
    const BrakingCar env;
    const auto spec = env.make_spec({8, 8, 4});
    SubspaceGrid grid(spec);
    GmmNoveltyModel model;
    GeneratorConfig gen;
    WindowMonitor monitor(50, 0.2);
    RandomStream rng(3);

    auto db = init_database(env, spec, 40, rng, std::nullopt, [&](const Scenario& s, const EpisodeResult& r) {
        grid.record_test(s, r.critical);
        model.fit_online(r.trajectory());
    });

    for (int it = 0; it < 1500; ++it) {
        const Mode mode = choose_mode(monitor);
        Scenario s;
        const ScenarioRecord* base = nullptr;
        if (mode == Mode::LocalPerturbation) {
            base = &select_base_local(db, rng);
            s = perturb_local(base->scenario, spec, gen, rng);
        } else {
            s = explore_global(grid, gen, rng).scenario;
        }
        const auto res = env.run(s);
        ScenarioRecord rec;
        rec.scenario = s;
        rec.task_score = res.task_score;
        rec.critical = res.critical;
        rec.log_prob = model.log_probability(res.trajectory());
        const double reference = base ? base->task_score : db.mean_task_score();
        if (base) {
            const auto id = base->id;
            const double sigma = sensitivity(base->task_score, res.task_score, base->scenario, s);
            db.observe_sensitivity(id, sigma);
        }
        maybe_admit(db, rec, reference, std::nullopt);
        model.fit_online(res.trajectory());
        grid.record_test(s, res.critical);
        monitor.push(res.critical);
    }

    std::printf("critical scenarios: %zu\n", db.critical_set().size());
    std::printf("cells tested: %llu of %llu\n", static_cast<unsigned long long>(grid.covered_count()),
                static_cast<unsigned long long>(spec.total_cells()));
    for (const auto& cell : grid.top_k_critical(3)) {
        const auto st = grid.stats(cell);
        std::printf("cell %llu: %llu/%llu critical\n", static_cast<unsigned long long>(cell.label),
                    static_cast<unsigned long long>(st.critical), static_cast<unsigned long long>(st.density));
    }
    return 0;
}
