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

#include "nrpos/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace nrpos
{

const char *to_string(FixMode m)
{
    return m == FixMode::d2 ? "2D" : "3D";
}

namespace
{

bool collinear_xy(const std::vector<Vec3> &anchors)
{
    Eigen::MatrixXd xy(static_cast<Eigen::Index>(anchors.size()), 2);
    for (std::size_t i = 0; i < anchors.size(); ++i)
        xy.row(static_cast<Eigen::Index>(i)) = anchors[i].head<2>().transpose();
    xy.rowwise() -= xy.colwise().mean();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(xy);
    const auto s = svd.singularValues();
    return s.size() < 2 || s(1) <= 1e-9 * std::max(s(0), 1.0);
}

double rms(const Eigen::VectorXd &r)
{
    return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

} // namespace

PositionFix trilaterate(std::span<const RangeEstimate> ranges, std::span<const TrpSite> trps, const Vec3 &init,
                        const TrilaterationConfig &config)
{
    if (ranges.size() < 3)
        throw Error("insufficient LOS links");

    std::vector<Vec3> anchors;
    std::vector<double> dist;
    PositionFix fix;
    fix.mode = config.mode;
    for (std::size_t i = 0; i < ranges.size(); ++i)
    {
        const auto &r = ranges[i];
        const TrpSite *site = nullptr;
        if (r.trp_id.empty() && ranges.size() == trps.size())
            site = &trps[i];
        else
            for (const auto &s : trps)
                if (s.id == r.trp_id)
                    site = &s;
        if (!site)
            throw Error("trilaterate: unknown TRP id '" + r.trp_id + "'");
        if (!std::isfinite(r.distance))
            throw Error("trilaterate: non-finite range");
        anchors.push_back(site->position);
        dist.push_back(r.distance);
        fix.trps_used.push_back(site->id);
    }
    if (collinear_xy(anchors))
        throw Error("degenerate geometry");

    const bool d3 = config.mode == FixMode::d3;
    const Eigen::Index nu = d3 ? 3 : 2;
    const auto n = static_cast<Eigen::Index>(anchors.size());
    double plane_z = anchors.front().z();
    bool flat = true;
    for (const auto &a : anchors)
        flat = flat && std::abs(a.z() - plane_z) < 1e-9;

    auto residuals = [&](const Vec3 &x, Eigen::VectorXd &r, Eigen::MatrixXd *J) {
        r.resize(n);
        if (J)
            J->resize(n, nu);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const Vec3 diff = x - anchors[static_cast<std::size_t>(i)];
            const double norm = diff.norm();
            r(i) = norm - dist[static_cast<std::size_t>(i)];
            if (J)
            {
                const Vec3 u = norm > 0.0 ? Vec3(diff / norm) : Vec3::Zero();
                J->row(i) = u.head(nu).transpose();
            }
        }
    };
    auto constrain = [&](Vec3 &x) {
        if (!d3)
        {
            x.z() = init.z();
            return;
        }
        if (flat && x.z() > plane_z)
            x.z() = 2.0 * plane_z - x.z();
        x.z() = std::clamp(x.z(), config.z_min, config.z_max);
    };

    Vec3 x = init;
    constrain(x);
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    residuals(x, r, &J);
    double cost = r.squaredNorm();
    for (int it = 0; it < config.max_iterations; ++it)
    {
        fix.iterations = it + 1;
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto s = svd.singularValues();
        if (!(s(nu - 1) > 1e-12 * std::max(s(0), 1e-300)))
            throw Error("degenerate geometry");
        const Eigen::VectorXd step = svd.solve(-J.transpose() * r);

        // Backtrack when the full step increases the cost.
        double scale = 1.0;
        Vec3 candidate;
        Eigen::VectorXd rc;
        for (int h = 0; h < 30; ++h)
        {
            candidate = x;
            candidate.head(nu) += scale * step;
            constrain(candidate);
            residuals(candidate, rc, nullptr);
            if (rc.squaredNorm() <= cost)
                break;
            scale *= 0.5;
        }
        const double moved = (candidate - x).norm();
        x = candidate;
        residuals(x, r, &J);
        cost = r.squaredNorm();
        if (moved < config.step_tolerance)
            break;
    }

    fix.position = x;
    fix.rms_residual = rms(r);
    fix.valid = true;
    if (!std::isfinite(fix.rms_residual) || fix.rms_residual > config.residual_gate)
    {
        fix.valid = false;
        fix.reason = "residual gate";
    }
    else if ((x - init).norm() > config.max_offset)
    {
        fix.valid = false;
        fix.reason = "offset bound";
    }
    return fix;
}

Vec3 centroid_init(std::span<const TrpSite> trps, double height)
{
    if (trps.empty())
        throw Error("centroid of an empty site list");
    Vec3 c = Vec3::Zero();
    for (const auto &s : trps)
        c += s.position;
    c /= static_cast<double>(trps.size());
    c.z() = height;
    return c;
}

std::vector<double> link_features(const LinkObservation &link)
{
    if (link.symbols.empty())
        throw Error("link " + link.trp_id + " has no symbols");
    return time_domain_magnitude(link.symbols.front());
}

PositionFix localize_epoch(std::span<const LinkObservation> links, std::span<const TrpSite> trps,
                           const LinkFilter &filter, const LocalizeConfig &config)
{
    PositionFix fix;
    fix.mode = config.trilateration.mode;
    std::vector<RangeEstimate> ranges;
    std::vector<TrpSite> used_sites;
    for (const auto &link : links)
    {
        bool keep = true;
        switch (filter.kind)
        {
        case LinkFilter::Kind::keep_all:
            break;
        case LinkFilter::Kind::oracle:
            keep = link.true_state == LinkState::los;
            break;
        case LinkFilter::Kind::classifier: {
            if (!filter.model)
                throw Error("classifier link filter without a model");
            const auto p = forward(*filter.model, link_features(link), Mode::infer);
            keep = p[1] < filter.threshold;
            break;
        }
        }
        if (!keep || link.symbols.empty())
        {
            fix.excluded_ids.push_back(link.trp_id);
            continue;
        }

        std::vector<double> d;
        d.reserve(link.symbols.size());
        RangeEstimate last;
        try
        {
            for (const auto &sym : link.symbols)
            {
                last = range_cascade(sym, config.k_schedule, config.max_distance).estimate;
                d.push_back(last.distance);
            }
        }
        catch (const Error &)
        {
            fix.excluded_ids.push_back(link.trp_id);
            continue;
        }
        last.distance = median(d);
        last.trp_id = link.trp_id;
        ranges.push_back(last);
        for (const auto &s : trps)
            if (s.id == link.trp_id)
                used_sites.push_back(s);
    }

    if (ranges.size() < 3)
    {
        for (const auto &r : ranges)
            fix.trps_used.push_back(r.trp_id);
        fix.reason = "insufficient LOS links";
        return fix;
    }
    try
    {
        const auto excluded = fix.excluded_ids;
        fix = trilaterate(ranges, trps, centroid_init(used_sites, config.prior_height), config.trilateration);
        fix.excluded_ids = excluded;
    }
    catch (const Error &e)
    {
        fix.valid = false;
        fix.reason = e.what();
    }
    return fix;
}

double median(std::vector<double> v)
{
    if (v.empty())
        throw Error("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile(std::vector<double> v, double p)
{
    if (v.empty())
        throw Error("percentile of an empty sample");
    if (!(p >= 0.0 && p <= 100.0))
        throw Error("percentile level outside [0, 100]");
    std::sort(v.begin(), v.end());
    const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ErrorStatistics error_statistics(std::span<const PositionFix> fixes, std::span<const Vec3> truth)
{
    if (fixes.empty())
        throw Error("error statistics of an empty fix list");
    if (fixes.size() != truth.size())
        throw Error("error statistics: fix and truth counts differ");
    ErrorStatistics s;
    s.total = fixes.size();
    for (std::size_t i = 0; i < fixes.size(); ++i)
    {
        if (!fixes[i].valid)
            continue;
        const Vec3 e = fixes[i].position - truth[i];
        s.errors_2d.push_back(e.head<2>().norm());
        s.errors_3d.push_back(e.norm());
    }
    s.valid = s.errors_2d.size();
    if (s.valid == 0)
        throw Error("error statistics: no valid fix");
    for (std::size_t l = 0; l < ErrorStatistics::kLevels.size(); ++l)
    {
        s.p2d[l] = percentile(s.errors_2d, ErrorStatistics::kLevels[l]);
        s.p3d[l] = percentile(s.errors_3d, ErrorStatistics::kLevels[l]);
    }
    return s;
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> errors)
{
    std::sort(errors.begin(), errors.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(errors.size());
    const double n = static_cast<double>(errors.size());
    for (std::size_t k = 0; k < errors.size(); ++k)
        out.emplace_back(errors[k], static_cast<double>(k + 1) / n);
    return out;
}

void write_fix_log_csv(std::ostream &out, std::span<const PositionFix> fixes)
{
    out << "t,valid,x,y,z,residual,n_trps,excluded_ids\n";
    for (const auto &f : fixes)
    {
        out << format_double(f.t) << ',' << (f.valid ? 1 : 0) << ',' << format_double(f.position.x()) << ','
            << format_double(f.position.y()) << ',' << format_double(f.position.z()) << ','
            << format_double(f.rms_residual) << ',' << f.trps_used.size() << ',';
        for (std::size_t i = 0; i < f.excluded_ids.size(); ++i)
            out << (i ? ";" : "") << f.excluded_ids[i];
        out << '\n';
    }
}

} // namespace nrpos
