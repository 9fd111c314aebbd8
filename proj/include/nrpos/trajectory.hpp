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

#include "nrpos/common.hpp"

#include <Eigen/Geometry>

#include <iosfwd>
#include <vector>

namespace nrpos
{

struct Pose
{
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity(); // world <- body
};

struct TrajectoryRecord
{
    std::vector<Pose> samples; // strictly increasing t

    void validate() const;
    double path_length() const;
};

/// CSV `t,px,py,pz,qw,qx,qy,qz` with a header row.
void write_trajectory_csv(std::ostream &out, const TrajectoryRecord &traj);
TrajectoryRecord read_trajectory_csv(std::istream &in);

} // namespace nrpos
