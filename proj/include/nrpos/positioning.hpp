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

// Range-based position fixes with LOS/NLOS link exclusion.

#include "nrpos/channel.hpp"
#include "nrpos/classifier.hpp"
#include "nrpos/common.hpp"
#include "nrpos/ranging.hpp"
#include "nrpos/scenario.hpp"
#include "nrpos/signal.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nrpos
{

enum class FixMode
{
    d2, // height held at the prior
    d3, // height free inside [z_min, z_max]
};

const char *to_string(FixMode m);

struct TrilaterationConfig
{
    FixMode mode = FixMode::d2;
    double residual_gate = 1.0; // metres, rms
    double max_offset = 100.0;  // metres from the initial point
    double z_min = 0.0;
    double z_max = 8.0;
    int max_iterations = 50;
    double step_tolerance = 1e-6;
};

struct PositionFix
{
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    double rms_residual = 0.0;
    std::vector<std::string> trps_used;
    std::vector<std::string> excluded_ids;
    FixMode mode = FixMode::d2;
    bool valid = false;
    std::string reason; // empty when valid
    int iterations = 0;
};

/// Gauss-Newton on sum (|x - a_i| - d_i)^2. Ranges are matched to sites by
/// trp_id. Throws "insufficient LOS links" for fewer than three ranges and
/// "degenerate geometry" for collinear sites or a singular normal matrix.
PositionFix trilaterate(std::span<const RangeEstimate> ranges, std::span<const TrpSite> trps, const Vec3 &init,
                        const TrilaterationConfig &config = {});

/// Centroid of the sites with the given height.
Vec3 centroid_init(std::span<const TrpSite> trps, double height);

struct LinkObservation
{
    std::string trp_id;
    std::vector<SubcarrierFrame> symbols; // offset-corrected, one per symbol repetition
    LinkState true_state = LinkState::los;
};

struct LinkFilter
{
    enum class Kind
    {
        keep_all,
        oracle,     // ground-truth state
        classifier, // p_nlos >= threshold is excluded
    };
    Kind kind = Kind::keep_all;
    const ModelParams *model = nullptr;
    double threshold = 0.5;
};

struct LocalizeConfig
{
    std::vector<int> k_schedule;
    double max_distance = 1000.0;
    double prior_height = 1.5;
    TrilaterationConfig trilateration;
};

/// Classifier input for one link: time-domain magnitude of the first symbol.
std::vector<double> link_features(const LinkObservation &link);

/// Filters links, ranges the survivors (median over symbols) and trilaterates.
/// Never throws for too few links or bad geometry; the fix is returned
/// invalid with the reason instead.
PositionFix localize_epoch(std::span<const LinkObservation> links, std::span<const TrpSite> trps,
                           const LinkFilter &filter, const LocalizeConfig &config);

/// Median of a non-empty sample; the mean of the two middle values for even sizes.
double median(std::vector<double> values);

/// Linear interpolation at rank p/100 * (n - 1) of the sorted sample.
double percentile(std::vector<double> values, double p);

struct ErrorStatistics
{
    static constexpr std::array<double, 3> kLevels{70.0, 80.0, 90.0};
    std::array<double, 3> p2d{};
    std::array<double, 3> p3d{};
    std::vector<double> errors_2d; // per valid fix
    std::vector<double> errors_3d;
    std::size_t total = 0;
    std::size_t valid = 0;
};

/// Statistics over the valid fixes. Throws on empty input, mismatched
/// lengths, or no valid fix at all.
ErrorStatistics error_statistics(std::span<const PositionFix> fixes, std::span<const Vec3> truth);

/// Sorted (error, k/N) pairs.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> errors);

/// CSV `t,valid,x,y,z,residual,n_trps,excluded_ids`; excluded ids joined by ';'.
void write_fix_log_csv(std::ostream &out, std::span<const PositionFix> fixes);

} // namespace nrpos
