// SPDX-License-Identifier: Apache-2.0
//
// nrpos: carrier-phase positioning toolkit for 5G NR reference signals
// Copyright (C) 2026 The nrpos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Hand-rolled generators shared by the property tests.

#include "nrpos/common.hpp"
#include "nrpos/scenario.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace nrpos::test
{

inline double uniform(Rng &rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_point(Rng &rng, double lo, double hi)
{
    return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Eigen::Quaterniond random_quaternion(Rng &rng)
{
    std::normal_distribution<double> nd;
    Eigen::Quaterniond q(nd(rng), nd(rng), nd(rng), nd(rng));
    return q.normalized();
}

inline Box random_box(Rng &rng, const Region &r, double max_side, double max_height)
{
    const double x = uniform(rng, r.xmin, r.xmax);
    const double y = uniform(rng, r.ymin, r.ymax);
    const double w = uniform(rng, 1.0, max_side);
    const double d = uniform(rng, 1.0, max_side);
    return {Vec3(x, y, 0.0), Vec3(x + w, y + d, uniform(rng, 2.0, max_height))};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name)
{
    auto dir = std::filesystem::temp_directory_path() / ("nrpos_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace nrpos::test
