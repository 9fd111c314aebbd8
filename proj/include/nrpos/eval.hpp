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

// Trajectory metrics and plot-ready exports.

#include "nrpos/trajectory.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nrpos
{

struct AssociatedPair
{
    std::size_t est = 0;
    std::size_t gt = 0;
};

/// Each estimate is paired with the nearest ground-truth timestamp within `tolerance` seconds.
std::vector<AssociatedPair> associate(const TrajectoryRecord &est, const TrajectoryRecord &gt,
                                      double tolerance = 0.01);

/// sqrt(mean |p_est - p_gt|^2) over associated pairs.
double ate(const TrajectoryRecord &est, const TrajectoryRecord &gt);

struct RpeResult
{
    double trans_m = 0.0;
    double rot_deg = 0.0;
    std::size_t count = 0;
};

/// Relative pose error over `delta` associated samples using SE(3) relative
/// poses: mean translation-difference norm and mean geodesic angle.
RpeResult rpe(const TrajectoryRecord &est, const TrajectoryRecord &gt, std::size_t delta = 1);

/// Rows `error,fraction`, sorted ascending, fraction = k/N.
void export_cdf(std::ostream &out, std::span<const double> errors);
void export_cdf(const std::filesystem::path &path, std::span<const double> errors);

using MetricsReport = std::vector<std::pair<std::string, double>>;

/// One `key value` pair per line.
void write_metrics_kv(std::ostream &out, const MetricsReport &report);

/// `key,value` with a header row.
void write_metrics_csv(std::ostream &out, const MetricsReport &report);

} // namespace nrpos
