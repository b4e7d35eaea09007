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

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualfuzz {

// Raised for inputs that violate an operation's preconditions.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Decimal text with 17 significant digits: round-trips every double.
inline std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// A concrete point of the scenario parameter space.
struct Scenario {
    std::vector<double> params;

    std::size_t size() const { return params.size(); }
    double operator[](std::size_t i) const { return params[i]; }
    double& operator[](std::size_t i) { return params[i]; }

    friend bool operator==(const Scenario&, const Scenario&) = default;
    friend auto operator<=>(const Scenario&, const Scenario&) = default;
};

} // namespace dualfuzz
