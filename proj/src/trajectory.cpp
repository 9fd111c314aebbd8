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

#include "nrpos/trajectory.hpp"

#include "csv.hpp"

#include <ostream>

namespace nrpos
{

void TrajectoryRecord::validate() const
{
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (!(samples[i].t > samples[i - 1].t))
            throw Error("trajectory timestamps must be strictly increasing");
}

double TrajectoryRecord::path_length() const
{
    double s = 0.0;
    for (std::size_t i = 1; i < samples.size(); ++i)
        s += (samples[i].position - samples[i - 1].position).norm();
    return s;
}

void write_trajectory_csv(std::ostream &out, const TrajectoryRecord &traj)
{
    out << "t,px,py,pz,qw,qx,qy,qz\n";
    for (const auto &s : traj.samples)
        out << format_double(s.t) << ',' << format_double(s.position.x()) << ',' << format_double(s.position.y())
            << ',' << format_double(s.position.z()) << ',' << format_double(s.attitude.w()) << ','
            << format_double(s.attitude.x()) << ',' << format_double(s.attitude.y()) << ','
            << format_double(s.attitude.z()) << '\n';
}

TrajectoryRecord read_trajectory_csv(std::istream &in)
{
    TrajectoryRecord traj;
    for (const auto &f : detail::read_csv_rows(in, 8, "trajectory csv"))
    {
        Pose p;
        p.t = detail::parse_number(f[0], "trajectory csv");
        p.position = {detail::parse_number(f[1], "trajectory csv"), detail::parse_number(f[2], "trajectory csv"),
                      detail::parse_number(f[3], "trajectory csv")};
        p.attitude = Eigen::Quaterniond(detail::parse_number(f[4], "trajectory csv"),
                                        detail::parse_number(f[5], "trajectory csv"),
                                        detail::parse_number(f[6], "trajectory csv"),
                                        detail::parse_number(f[7], "trajectory csv"));
        if (!(p.attitude.norm() > 0.0))
            throw Error("trajectory csv: zero quaternion");
        p.attitude.normalize();
        traj.samples.push_back(p);
    }
    traj.validate();
    return traj;
}

} // namespace nrpos
