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

#include "nrpos/fusion.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace nrpos
{

const char *to_string(MeasurementSource s)
{
    return s == MeasurementSource::cpp ? "CPP" : "VO";
}

Mat3 skew(const Vec3 &v)
{
    Mat3 m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

Eigen::Quaterniond quat_from_rotvec(const Vec3 &theta)
{
    const double angle = theta.norm();
    if (angle < 1e-12)
        return Eigen::Quaterniond(1.0, 0.5 * theta.x(), 0.5 * theta.y(), 0.5 * theta.z()).normalized();
    return Eigen::Quaterniond(Eigen::AngleAxisd(angle, theta / angle));
}

namespace
{

bool finite(const Vec3 &v)
{
    return v.allFinite();
}

void symmetrize(Mat9 &P)
{
    P = 0.5 * (P + P.transpose()).eval();
}

} // namespace

void predict(NavState &s, ErrorBelief &belief, const ImuSample &imu, double dt, const ImuNoise &noise,
             const Vec3 &gravity)
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw Error("predict: dt must be positive");
    if (!finite(imu.f) || !finite(imu.omega))
        throw Error("predict: non-finite IMU sample");

    const Mat3 R = s.q.toRotationMatrix();
    const Vec3 acc = R * imu.f + gravity;
    s.p += dt * s.v + 0.5 * dt * dt * acc;
    s.v += dt * acc;
    s.q = (s.q * quat_from_rotvec(imu.omega * dt)).normalized();

    Mat9 F = Mat9::Identity();
    F.block<3, 3>(0, 3) = dt * Mat3::Identity();
    F.block<3, 3>(3, 6) = -skew(R * imu.f) * dt;
    Mat9 P = F * belief.P * F.transpose();
    const double dt2 = dt * dt;
    P.block<3, 3>(3, 3) += dt2 * noise.sigma_acc * noise.sigma_acc * Mat3::Identity();
    P.block<3, 3>(6, 6) += dt2 * noise.sigma_gyr * noise.sigma_gyr * Mat3::Identity();
    symmetrize(P);
    belief.P = P;
}

Gain update(NavState &s, ErrorBelief &belief, const PositionMeasurement &meas)
{
    if (!finite(meas.y) || !meas.R.allFinite())
        throw Error("update: non-finite measurement");
    const Mat3 S = belief.P.block<3, 3>(0, 0) + meas.R;
    const Eigen::FullPivLU<Mat3> lu(S);
    const double scale = std::max(S.cwiseAbs().maxCoeff(), 1e-300);
    if (!lu.isInvertible() || std::abs(lu.determinant()) <= 1e-30 * scale * scale * scale)
        throw Error("update: singular innovation covariance");

    const Gain K = belief.P.block<9, 3>(0, 0) * lu.inverse();
    const Eigen::Matrix<double, 9, 1> dx = K * (meas.y - s.p);
    s.p += dx.segment<3>(0);
    s.v += dx.segment<3>(3);
    s.q = (s.q * quat_from_rotvec(dx.segment<3>(6))).normalized();

    Eigen::Matrix<double, 9, 9> IKH = Mat9::Identity();
    IKH.block<9, 3>(0, 0) -= K;
    Mat9 P = IKH * belief.P * IKH.transpose() + K * meas.R * K.transpose();
    symmetrize(P);
    belief.P = P;
    return K;
}

FilterOutput run_filter(std::span<const ImuSample> imu, std::span<const PositionMeasurement> measurements,
                        const NavState &init, const Mat9 &init_P, const FilterConfig &config)
{
    if (imu.empty())
        throw Error("run_filter: empty IMU stream");
    for (std::size_t i = 1; i < imu.size(); ++i)
        if (!(imu[i].t > imu[i - 1].t))
            throw Error("run_filter: IMU timestamps out of order");
    for (std::size_t i = 1; i < measurements.size(); ++i)
        if (measurements[i].t < measurements[i - 1].t)
            throw Error("run_filter: measurement timestamps out of order");

    FilterOutput out;
    NavState state = init;
    ErrorBelief belief{init_P};
    std::size_t next = 0;
    auto consume = [&](double t) {
        while (next < measurements.size() && measurements[next].t <= t)
        {
            update(state, belief, measurements[next]);
            ++next;
            ++out.updates;
        }
    };
    auto emit = [&](double t) {
        out.trajectory.samples.push_back({t, state.p, state.q});
        out.states.push_back(state);
        if (config.record_covariance)
            out.covariances.push_back(belief.P);
    };

    consume(imu.front().t);
    emit(imu.front().t);
    for (std::size_t k = 1; k < imu.size(); ++k)
    {
        predict(state, belief, imu[k - 1], imu[k].t - imu[k - 1].t, config.noise, config.gravity);
        consume(imu[k].t);
        emit(imu[k].t);
    }
    return out;
}

std::vector<PositionMeasurement> synth_vo_stream(const TrajectoryRecord &truth, double drift_per_m, double noise,
                                                 const Vec3 &direction, Rng &rng)
{
    if (truth.samples.empty())
        throw Error("synth_vo_stream: empty truth trajectory");
    if (!(noise >= 0.0))
        throw Error("synth_vo_stream: noise must be non-negative");
    const Vec3 dir = direction.norm() > 0.0 ? Vec3(direction.normalized()) : Vec3::UnitX();
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<PositionMeasurement> out;
    out.reserve(truth.samples.size());
    double travelled = 0.0;
    for (std::size_t i = 0; i < truth.samples.size(); ++i)
    {
        if (i > 0)
            travelled += (truth.samples[i].position - truth.samples[i - 1].position).norm();
        PositionMeasurement m;
        m.t = truth.samples[i].t;
        m.y = truth.samples[i].position + drift_per_m * travelled * dir;
        if (noise > 0.0)
        {
            const double a = nd(rng), b = nd(rng), c = nd(rng);
            m.y += noise * Vec3(a, b, c);
        }
        m.R = noise * noise * Mat3::Identity();
        m.source = MeasurementSource::vo;
        out.push_back(m);
    }
    return out;
}

void write_imu_csv(std::ostream &out, std::span<const ImuSample> imu)
{
    out << "t,fx,fy,fz,wx,wy,wz\n";
    for (const auto &s : imu)
        out << format_double(s.t) << ',' << format_double(s.f.x()) << ',' << format_double(s.f.y()) << ','
            << format_double(s.f.z()) << ',' << format_double(s.omega.x()) << ',' << format_double(s.omega.y())
            << ',' << format_double(s.omega.z()) << '\n';
}

std::vector<ImuSample> read_imu_csv(std::istream &in)
{
    std::vector<ImuSample> out;
    for (const auto &f : detail::read_csv_rows(in, 7, "imu csv"))
    {
        double v[7];
        for (int i = 0; i < 7; ++i)
            v[i] = detail::parse_number(f[static_cast<std::size_t>(i)], "imu csv");
        out.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
    }
    return out;
}

void write_measurements_csv(std::ostream &out, std::span<const PositionMeasurement> meas)
{
    out << "t,x,y,z,r11,r22,r33,source\n";
    for (const auto &m : meas)
        out << format_double(m.t) << ',' << format_double(m.y.x()) << ',' << format_double(m.y.y()) << ','
            << format_double(m.y.z()) << ',' << format_double(m.R(0, 0)) << ',' << format_double(m.R(1, 1)) << ','
            << format_double(m.R(2, 2)) << ',' << to_string(m.source) << '\n';
}

std::vector<PositionMeasurement> read_measurements_csv(std::istream &in)
{
    std::vector<PositionMeasurement> out;
    for (const auto &f : detail::read_csv_rows(in, 8, "measurement csv"))
    {
        PositionMeasurement m;
        double v[7];
        for (int i = 0; i < 7; ++i)
            v[i] = detail::parse_number(f[static_cast<std::size_t>(i)], "measurement csv");
        m.t = v[0];
        m.y = {v[1], v[2], v[3]};
        m.R = Vec3(v[4], v[5], v[6]).asDiagonal();
        if (f[7] == "CPP" || f[7] == "cpp")
            m.source = MeasurementSource::cpp;
        else if (f[7] == "VO" || f[7] == "vo")
            m.source = MeasurementSource::vo;
        else
            throw Error("measurement csv: unknown source '" + f[7] + "'");
        if (v[4] < 0.0 || v[5] < 0.0 || v[6] < 0.0)
            throw Error("measurement csv: negative variance");
        out.push_back(m);
    }
    return out;
}

} // namespace nrpos
