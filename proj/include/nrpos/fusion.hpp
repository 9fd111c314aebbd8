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

// Error-state EKF over (dp, dv, dtheta) with IMU propagation and absolute
// position updates from carrier-phase fixes or visual odometry.

#include "nrpos/common.hpp"
#include "nrpos/trajectory.hpp"

#include <Eigen/Geometry>

#include <iosfwd>
#include <span>
#include <vector>

namespace nrpos
{

using Mat3 = Eigen::Matrix3d;
using Mat9 = Eigen::Matrix<double, 9, 9>;

struct NavState
{
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Eigen::Quaterniond q = Eigen::Quaterniond::Identity(); // world <- body
};

struct ErrorBelief
{
    Mat9 P = Mat9::Zero();
};

struct ImuSample
{
    double t = 0.0;
    Vec3 f = Vec3::Zero();     // specific force, body frame
    Vec3 omega = Vec3::Zero(); // body rate
};

enum class MeasurementSource
{
    cpp,
    vo,
};

const char *to_string(MeasurementSource s);

struct PositionMeasurement
{
    double t = 0.0;
    Vec3 y = Vec3::Zero();
    Mat3 R = Mat3::Identity();
    MeasurementSource source = MeasurementSource::vo;
};

struct ImuNoise
{
    double sigma_acc = 0.05; // m/s^2
    double sigma_gyr = 0.005; // rad/s
};

struct FilterConfig
{
    ImuNoise noise;
    Vec3 gravity{0.0, 0.0, -9.81};
    bool record_covariance = false;
};

Mat3 skew(const Vec3 &v);

/// Rotation-vector exponential.
Eigen::Quaterniond quat_from_rotvec(const Vec3 &theta);

/// Nominal propagation and P <- F P F' + L Q L' with Q = dt^2 diag(s_a^2 I, s_g^2 I).
void predict(NavState &state, ErrorBelief &belief, const ImuSample &imu, double dt, const ImuNoise &noise,
             const Vec3 &gravity = Vec3(0.0, 0.0, -9.81));

/// Kalman gain of the last update, exposed for inspection.
using Gain = Eigen::Matrix<double, 9, 3>;

/// Position update with H = [I 0 0] and the Joseph-form covariance.
Gain update(NavState &state, ErrorBelief &belief, const PositionMeasurement &meas);

struct FilterOutput
{
    TrajectoryRecord trajectory;        // one pose per IMU timestamp
    std::vector<NavState> states;
    std::vector<Mat9> covariances;      // filled when requested
    std::size_t updates = 0;
};

/// Event loop: IMU sample k drives the step from t_k to t_{k+1}. A
/// measurement is applied at the first IMU timestamp at or after its own
/// time, after that step's prediction. Measurements later than the last IMU
/// sample are dropped.
FilterOutput run_filter(std::span<const ImuSample> imu, std::span<const PositionMeasurement> measurements,
                        const NavState &init, const Mat9 &init_P, const FilterConfig &config = {});

/// Truth plus drift of `drift_per_m` metres per metre travelled along
/// `direction`, plus white noise of std `noise` per axis; R = noise^2 I.
std::vector<PositionMeasurement> synth_vo_stream(const TrajectoryRecord &truth, double drift_per_m, double noise,
                                                 const Vec3 &direction, Rng &rng);

void write_imu_csv(std::ostream &out, std::span<const ImuSample> imu);
std::vector<ImuSample> read_imu_csv(std::istream &in);

/// CSV `t,x,y,z,r11,r22,r33,source`; off-diagonal covariance is not stored.
void write_measurements_csv(std::ostream &out, std::span<const PositionMeasurement> meas);
std::vector<PositionMeasurement> read_measurements_csv(std::istream &in);

} // namespace nrpos
