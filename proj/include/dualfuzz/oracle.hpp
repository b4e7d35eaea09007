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

// Brute-force measurements of where the built-in environments fail.

#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "envs.hpp"
#include "rng.hpp"

namespace dualfuzz {

inline constexpr std::size_t kSliceResolution = 200;
inline constexpr double kSliceHeading = std::numbers::pi;
inline constexpr double kSliceIntruderSpeed = 0.55;
inline constexpr double kSliceEgoSpeed = 0.55;

/// Criticality of intercept2d on the (x0, y0) plane, sampled at cell
/// centers, with heading and both speeds held at the slice constants.
struct SliceMap {
    std::size_t resolution = 0;
    std::vector<std::uint8_t> critical; // row-major, x fastest

    bool at(std::size_t ix, std::size_t iy) const { return critical[iy * resolution + ix] != 0; }

    double critical_fraction() const
    {
        std::size_t n = 0;
        for (auto c : critical)
            n += c;
        return critical.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(critical.size());
    }

    friend bool operator==(const SliceMap&, const SliceMap&) = default;
};

inline double slice_coordinate(std::size_t i, std::size_t resolution)
{
    return -10.0 + (static_cast<double>(i) + 0.5) * 20.0 / static_cast<double>(resolution);
}

inline SliceMap intercept_slice_map(std::size_t resolution = kSliceResolution)
{
    if (resolution < 1)
        throw InputError("slice resolution must be at least 1");
    const Intercept2d env;
    SliceMap m;
    m.resolution = resolution;
    m.critical.resize(resolution * resolution);
    for (std::size_t iy = 0; iy < resolution; ++iy)
        for (std::size_t ix = 0; ix < resolution; ++ix) {
            const Scenario s{{slice_coordinate(ix, resolution), slice_coordinate(iy, resolution), kSliceHeading,
                              kSliceIntruderSpeed, kSliceEgoSpeed}};
            m.critical[iy * resolution + ix] = env.run(s).critical ? 1 : 0;
        }
    return m;
}

/// Text form: a header naming the constants version, then one row of
/// '0'/'1' characters per y cell (y ascending).
inline void write_slice_map(std::ostream& os, const SliceMap& m)
{
    os << "# dualfuzz oracle intercept2d slice constants_version " << kConstantsVersion << '\n';
    os << "resolution " << m.resolution << " heading " << format_number(kSliceHeading) << " intruder_speed "
       << format_number(kSliceIntruderSpeed) << " ego_speed " << format_number(kSliceEgoSpeed) << '\n';
    for (std::size_t iy = 0; iy < m.resolution; ++iy) {
        std::string row(m.resolution, '0');
        for (std::size_t ix = 0; ix < m.resolution; ++ix)
            row[ix] = m.at(ix, iy) ? '1' : '0';
        os << row << '\n';
    }
}

struct SliceFile {
    int constants_version = 0;
    SliceMap map;
};

inline SliceFile read_slice_map(std::istream& is)
{
    SliceFile f;
    std::string tag;
    std::string word;
    if (!(is >> tag >> word >> word >> word >> word >> word >> f.constants_version) || tag != "#" ||
        word != "constants_version")
        throw InputError("slice map: bad header");
    std::string key;
    double ignored = 0.0;
    if (!(is >> key >> f.map.resolution) || key != "resolution")
        throw InputError("slice map: missing resolution");
    for (int i = 0; i < 3; ++i)
        is >> key >> ignored;
    f.map.critical.assign(f.map.resolution * f.map.resolution, 0);
    for (std::size_t iy = 0; iy < f.map.resolution; ++iy) {
        std::string row;
        if (!(is >> row) || row.size() != f.map.resolution)
            throw InputError("slice map: bad row " + std::to_string(iy));
        for (std::size_t ix = 0; ix < f.map.resolution; ++ix)
            f.map.critical[iy * f.map.resolution + ix] = row[ix] == '1' ? 1 : 0;
    }
    return f;
}

struct CriticalMeasure {
    std::size_t samples = 0;
    std::size_t critical = 0;
    double fraction() const { return samples ? static_cast<double>(critical) / static_cast<double>(samples) : 0.0; }
};

/// Fraction of uniformly drawn scenarios that are critical.
inline CriticalMeasure monte_carlo_critical_measure(const Environment& env, std::size_t samples, std::uint64_t seed)
{
    const auto spec = env.make_spec(std::vector<std::uint32_t>(env.bounds().size(), 1));
    auto rng = substream(seed, "oracle");
    CriticalMeasure m;
    m.samples = samples;
    for (std::size_t i = 0; i < samples; ++i)
        m.critical += env.run(spec.sample_uniform(rng)).critical ? 1 : 0;
    return m;
}

} // namespace dualfuzz
