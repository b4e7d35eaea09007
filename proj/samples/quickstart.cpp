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

// Runs the three strategies on intercept2d and prints a comparison table.

#include <cstdio>
#include <iostream>

#include "dualfuzz/harness.hpp"

int main()
{
    using namespace dualfuzz;

    CampaignConfig cfg;
    cfg.env = "intercept2d";
    cfg.n_scenarios = 200;
    cfg.n_tests = 2000;
    cfg.window = 100;
    cfg.theta = 0.15;
    cfg.seed = 11;

    std::vector<CampaignReport> reports;
    for (auto s : {Strategy::DualSpace, Strategy::Random, Strategy::SensitivityOnly}) {
        cfg.strategy = s;
        reports.push_back(run_campaign(cfg));
        const auto& r = reports.back();
        std::printf("%-16s critical %4llu  cells %3llu  local %4llu  global %4llu\n", to_string(s),
                    static_cast<unsigned long long>(r.critical_count),
                    static_cast<unsigned long long>(r.diversity.coverage),
                    static_cast<unsigned long long>(r.local_iterations),
                    static_cast<unsigned long long>(r.global_iterations));
    }
    std::printf("\n");
    write_metrics_csv(std::cout, compare_campaigns(reports));
    return 0;
}
