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

// Deployments, UE trajectories and the box-obstacle LOS coverage planner.

#include "nrpos/common.hpp"
#include "nrpos/noise_config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nrpos
{

struct TrpSite
{
    std::string id;
    Vec3 position = Vec3::Zero();
};

struct ScenarioConfig
{
    double carrier_frequency = 3.8e9;  // Hz
    double bandwidth = 100e6;          // Hz
    double subcarrier_spacing = 30e3;  // Hz
    std::size_t num_subcarriers = 3276; // K
    int comb_size = 6;                 // n
    int comb_offset = 0;
    int symbols_per_frame = 8;
    std::vector<TrpSite> trp_list;
    Vec3 ue_init{120.0, 110.0, 1.5};
    double ue_speed = 3.0 / 3.6; // m/s
    NoiseConfig noise;
    std::uint64_t rng_seed = 1;

    /// Throws Error when any invariant is violated.
    void validate() const;
};

/// Three-TRP urban microcell deployment with 100 MHz / 30 kHz numerology.
ScenarioConfig umi_reference_scenario();

struct Region
{
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
};

struct Box
{
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
};

struct ObstacleMap
{
    std::vector<Box> boxes;
    void validate() const;
};

struct TrackSample
{
    double t = 0.0;
    Vec3 position = Vec3::Zero();
};

struct WaypointTrack
{
    std::vector<TrackSample> samples;
    double speed = 0.0;

    double path_length() const;
};

/// Random-waypoint mobility at constant speed inside `area`. Waypoints are
/// snapped to whole sampling steps so every sample pair is exactly one step
/// of travel apart, including at turns. Height is taken from config.ue_init.
WaypointTrack generate_random_waypoint_track(const ScenarioConfig &config, const Region &area,
                                             double duration, double dt);

/// True iff the open segment tx-rx passes through no box interior.
bool los_visible(const Vec3 &tx, const Vec3 &rx, const ObstacleMap &map);

struct CoverageGrid
{
    Region region;
    double cell = 5.0;
    double ue_height = 1.5;
    std::size_t nx = 0, ny = 0;
    std::vector<int> counts; // row-major, index iy * nx + ix

    int count(std::size_t ix, std::size_t iy) const { return counts[iy * nx + ix]; }
    Vec3 cell_center(std::size_t ix, std::size_t iy) const;
    double fraction_at_least(int min_count) const;
    /// Cell containing (x, y), or -1 when outside the grid.
    long cell_index(double x, double y) const;
};

/// LOS-count per grid cell evaluated at the cell centre at UE height.
CoverageGrid coverage_grid(const ObstacleMap &map, std::span<const TrpSite> trps, double cell,
                           const Region &region, double ue_height = 1.5, unsigned jobs = 1);

// --- file formats ------------------------------------------------------

/// One box per line: `xmin ymin zmin xmax ymax zmax`; '#' starts a comment.
ObstacleMap read_obstacle_map(std::istream &in);
ObstacleMap load_obstacle_map(const std::filesystem::path &path);
void write_obstacle_map(std::ostream &out, const ObstacleMap &map);

/// JSON scenario file (nested key-value); missing keys keep the values of
/// umi_reference_scenario().
ScenarioConfig parse_scenario_config(const std::string &text);
ScenarioConfig load_scenario_config(const std::filesystem::path &path);
std::string scenario_config_to_json(const ScenarioConfig &config);

void write_coverage_csv(std::ostream &out, const CoverageGrid &grid);

} // namespace nrpos
