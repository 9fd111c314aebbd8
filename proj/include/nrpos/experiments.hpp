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

// Scripted end-to-end studies. Every study is a pure function of its
// configuration and seed; Monte-Carlo draws use per-iteration substreams so
// results do not depend on the thread count.

#include "nrpos/channel.hpp"
#include "nrpos/classifier.hpp"
#include "nrpos/eval.hpp"
#include "nrpos/fusion.hpp"
#include "nrpos/positioning.hpp"
#include "nrpos/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nrpos
{

// --- shared link simulation ---------------------------------------------

struct SimulatedLink
{
    LinkObservation observation;
    ChannelRealization channel;
    LinkLabel label;       // delay-difference rule on the first symbol
    double true_distance = 0.0;
};

/// Reference frame, one channel draw, `symbols` noisy repetitions, offset correction.
SimulatedLink simulate_link(const ScenarioConfig &config, const TrpSite &trp, const Vec3 &ue,
                            std::optional<LinkState> force_state, int symbols, Rng &rng);

/// Hex FNV-1a of the canonical JSON form.
std::string config_fingerprint(const ScenarioConfig &config);

struct StudyManifest
{
    std::string study;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> parameters;
    std::vector<std::string> outputs;
};

/// `key value` lines; outputs listed as repeated `output <path>` lines.
void write_manifest(std::ostream &out, const StudyManifest &manifest);

// --- UMi ranging ----------------------------------------------------------

struct RangingSample
{
    std::size_t iteration = 0;
    std::string trp_id;
    double true_distance = 0.0;
    double estimate = 0.0;
    bool los = true;
    double error() const { return estimate - true_distance; }
};

struct TrpRangeSummary
{
    std::string trp_id;
    double true_distance = 0.0;
    double peak = 0.0; // mean of the samples in the modal histogram bin
    double bin_width = 0.1;
    std::vector<std::pair<double, long>> histogram; // (bin centre, count), non-empty bins only
};

struct UmiRangingReport
{
    std::size_t iterations = 0;
    std::vector<RangingSample> samples;
    std::vector<TrpRangeSummary> trps;
    double high_accuracy_fraction = 0.0; // |error| <= high_accuracy_threshold
    double los_fraction = 0.0;
    double high_accuracy_threshold = 0.1;
};

/// UE fixed at config.ue_init; each iteration draws one channel per TRP and
/// ranges it with the default spacing cascade, median over the frame's symbols.
UmiRangingReport run_umi_ranging(const ScenarioConfig &config, std::size_t iterations, unsigned jobs = 1,
                                 double bin_width = 0.1);

void write_ranging_csv(std::ostream &out, const UmiRangingReport &report);
void write_histogram_csv(std::ostream &out, const UmiRangingReport &report);

// --- NLOS exclusion -------------------------------------------------------

/// Six-site deployment around the reference UMi area.
std::vector<TrpSite> exclusion_deployment();

struct ExclusionConfig
{
    std::size_t epochs = 1000;
    Region ue_region{90.0, 80.0, 170.0, 160.0};
    int symbols = 1;
    const ModelParams *model = nullptr; // DL block skipped when null
    double classifier_threshold = 0.5;
};

struct ExclusionBlock
{
    std::string name;
    std::vector<PositionFix> fixes;
    std::optional<ErrorStatistics> stats; // absent when no fix is valid
};

struct ExclusionReport
{
    ExclusionBlock los_only;
    ExclusionBlock mixed;
    ExclusionBlock oracle;
    std::optional<ExclusionBlock> dl;
    std::vector<Vec3> truth;
};

/// Per epoch one UE position and one channel draw per site. The LOS-only
/// block trilaterates the ground-truth LOS subset; "mixed" keeps every link
/// with no validity gate; "oracle" and "dl" filter with the usual gate.
ExclusionReport run_exclusion_study(const ScenarioConfig &config, const ExclusionConfig &study, unsigned jobs = 1);

void write_exclusion_table(std::ostream &out, const ExclusionReport &report);

// --- classifier -----------------------------------------------------------

/// 120 kHz spacing, 816 subcarriers, comb 6: same ~98 MHz span as the
/// reference numerology at a quarter of the sequence length.
ScenarioConfig classifier_numerology(ScenarioConfig base);

struct DatasetConfig
{
    std::size_t samples = 10000;
    double nlos_fraction = 0.5; // share of channel draws forced NLOS
    Region ue_region{90.0, 80.0, 170.0, 160.0};
};

/// Rows labelled by the delay-difference rule; features are the classifier input.
std::vector<DatasetRow> generate_dataset(const ScenarioConfig &config, const DatasetConfig &dataset, unsigned jobs = 1);

struct ClassifierStudy
{
    TrainResult training;
    ClassifierMetrics test_metrics;
    DatasetSplit split;
    double train_seconds = 0.0;
};

ClassifierStudy run_classifier_study(const std::vector<DatasetRow> &rows, const ModelShape &shape,
                                     const TrainConfig &train_config, const SplitFractions &fractions = {});

// --- fusion ---------------------------------------------------------------

struct FusionStudyConfig
{
    double duration = 120.0;    // s
    double imu_rate = 100.0;    // Hz
    double vo_rate = 10.0;      // Hz
    double cpp_rate = 1.0;      // Hz
    double speed = 5.0;         // m/s
    Region region{60.0, 50.0, 200.0, 180.0};
    ImuNoise imu_noise{0.02, 0.002};
    double vo_drift_per_m = 0.03;
    double vo_noise = 0.05;       // actual white noise of the VO track
    double vo_reported_std = 10.0; // std given to the filter
    Vec3 vo_drift_direction{1.0, 0.5, 0.0};
    double cpp_reported_std = 0.1;
    double target_cpp_availability = 0.4;
    bool use_obstacles = true;
    std::size_t max_obstacles = 400;
};

struct FusionStudyReport
{
    TrajectoryRecord truth;
    TrajectoryRecord vo_only;
    TrajectoryRecord imu_vo;
    TrajectoryRecord cpp_imu_vo;
    std::vector<ImuSample> imu;
    std::vector<PositionMeasurement> vo;
    std::vector<PositionMeasurement> cpp;
    ObstacleMap obstacles;
    std::size_t cpp_epochs = 0;
    double cpp_availability = 0.0; // valid fixes / CPP epochs
    MetricsReport metrics;
};

/// Synthetic drive with IMU samples consistent with the discrete motion
/// model. CPP fixes come from the full ranging pipeline and are available
/// where the obstacle map leaves at least three sites in LOS.
FusionStudyReport run_fusion_study(const ScenarioConfig &config, const FusionStudyConfig &study);

/// Ground-truth drive and the matching noise-free IMU stream.
struct SyntheticDrive
{
    TrajectoryRecord truth;
    std::vector<NavState> states;
    std::vector<ImuSample> imu;
};

SyntheticDrive synthetic_drive(const FusionStudyConfig &study, const Vec3 &start, std::uint64_t seed,
                               const Vec3 &gravity = Vec3(0.0, 0.0, -9.81));

} // namespace nrpos
