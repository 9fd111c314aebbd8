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

#include "nrpos/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace nrpos
{

std::vector<AssociatedPair> associate(const TrajectoryRecord &est, const TrajectoryRecord &gt, double tolerance)
{
    est.validate();
    gt.validate();
    std::vector<AssociatedPair> out;
    const auto &g = gt.samples;
    for (std::size_t i = 0; i < est.samples.size(); ++i)
    {
        const double t = est.samples[i].t;
        const auto it = std::lower_bound(g.begin(), g.end(), t, [](const Pose &p, double v) { return p.t < v; });
        std::size_t best = g.size();
        double best_dt = tolerance;
        for (auto cand : {it, it == g.begin() ? g.end() : std::prev(it)})
        {
            if (cand == g.end())
                continue;
            const double dt = std::abs(cand->t - t);
            if (dt <= best_dt)
            {
                best_dt = dt;
                best = static_cast<std::size_t>(cand - g.begin());
            }
        }
        if (best < g.size())
            out.push_back({i, best});
    }
    return out;
}

double ate(const TrajectoryRecord &est, const TrajectoryRecord &gt)
{
    const auto pairs = associate(est, gt);
    if (pairs.empty())
        throw Error("ate: no associated pose pairs");
    double acc = 0.0;
    for (const auto &p : pairs)
        acc += (est.samples[p.est].position - gt.samples[p.gt].position).squaredNorm();
    return std::sqrt(acc / static_cast<double>(pairs.size()));
}

RpeResult rpe(const TrajectoryRecord &est, const TrajectoryRecord &gt, std::size_t delta)
{
    const auto pairs = associate(est, gt);
    if (delta == 0 || delta >= pairs.size())
        throw Error("rpe: interval must satisfy 0 < delta < associated pose count");
    RpeResult r;
    for (std::size_t i = 0; i + delta < pairs.size(); ++i)
    {
        const Pose &e0 = est.samples[pairs[i].est];
        const Pose &e1 = est.samples[pairs[i + delta].est];
        const Pose &g0 = gt.samples[pairs[i].gt];
        const Pose &g1 = gt.samples[pairs[i + delta].gt];
        const Eigen::Quaterniond qe0 = e0.attitude.normalized(), qg0 = g0.attitude.normalized();
        const Vec3 te = qe0.conjugate() * (e1.position - e0.position);
        const Vec3 tg = qg0.conjugate() * (g1.position - g0.position);
        const Eigen::Quaterniond re = qe0.conjugate() * e1.attitude.normalized();
        const Eigen::Quaterniond rg = qg0.conjugate() * g1.attitude.normalized();
        r.trans_m += (te - tg).norm();
        r.rot_deg += re.angularDistance(rg) * 180.0 / kPi;
        ++r.count;
    }
    r.trans_m /= static_cast<double>(r.count);
    r.rot_deg /= static_cast<double>(r.count);
    return r;
}

void export_cdf(std::ostream &out, std::span<const double> errors)
{
    if (errors.empty())
        throw Error("export_cdf: empty error list");
    std::vector<double> v(errors.begin(), errors.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    for (std::size_t k = 0; k < v.size(); ++k)
        out << format_double(v[k]) << ',' << format_double(static_cast<double>(k + 1) / n) << '\n';
}

void export_cdf(const std::filesystem::path &path, std::span<const double> errors)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    export_cdf(out, errors);
}

void write_metrics_kv(std::ostream &out, const MetricsReport &report)
{
    for (const auto &[k, v] : report)
        out << k << ' ' << format_double(v) << '\n';
}

void write_metrics_csv(std::ostream &out, const MetricsReport &report)
{
    out << "key,value\n";
    for (const auto &[k, v] : report)
        out << k << ',' << format_double(v) << '\n';
}

} // namespace nrpos
