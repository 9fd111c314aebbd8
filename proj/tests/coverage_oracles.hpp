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

// Analytic shadow of a single tall wall for three TRPs west of it.

#include "nrpos/scenario.hpp"

#include <algorithm>
#include <vector>

namespace nrpos::test
{

inline Region wall_region()
{
    return {0.0, 0.0, 100.0, 100.0};
}

/// TRPs at x = 0; wall x in [40, 42] for y up to 50, tall enough that nothing passes over it.
inline std::vector<TrpSite> wall_trps()
{
    return {{"a", Vec3(0, 10, 10)}, {"b", Vec3(0, 25, 10)}, {"c", Vec3(0, 40, 10)}};
}

inline ObstacleMap wall_map()
{
    return ObstacleMap{{{Vec3(40, -100, 0), Vec3(42, 50, 1000)}}};
}

/// Share of cells of `g` seeing all three TRPs. A ray from (0, y0) to a cell
/// beyond x = 40 clears the wall iff it stays at y >= 50 across the wall slab.
inline double wall_covered_fraction(const CoverageGrid &g)
{
    const auto trps = wall_trps();
    double covered = 0.0;
    for (std::size_t iy = 0; iy < g.ny; ++iy)
        for (std::size_t ix = 0; ix < g.nx; ++ix)
        {
            const Vec3 c = g.cell_center(ix, iy);
            int n = 0;
            for (const auto &t : trps)
            {
                const double y0 = t.position.y();
                bool hidden = false;
                if (c.x() > 40.0)
                {
                    const double xe = c.x() > 42.0 ? 42.0 : c.x();
                    const double y_at_wall = y0 + (c.y() - y0) * (40.0 / c.x());
                    const double y_at_exit = y0 + (c.y() - y0) * (xe / c.x());
                    hidden = std::min(y_at_wall, y_at_exit) < 50.0;
                }
                n += hidden ? 0 : 1;
            }
            covered += n >= 3 ? 1.0 : 0.0;
        }
    return covered / static_cast<double>(g.counts.size());
}

} // namespace nrpos::test
