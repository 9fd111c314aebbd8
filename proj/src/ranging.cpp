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

#include "nrpos/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace nrpos
{

double virtual_wavelength(double delta_f)
{
    if (!(delta_f > 0.0))
        throw Error("degenerate pair");
    return kSpeedOfLight / delta_f;
}

double distance_from_phase(double avg_phase_diff, long cycle_count, double lambda)
{
    return (avg_phase_diff / kTwoPi + static_cast<double>(cycle_count)) * lambda;
}

namespace
{

// Lags closer to zero than this are rounding residue of identical phases.
constexpr double kZeroLag = 1e-12;

void check_spacing(const SubcarrierFrame &frame, int k)
{
    if (k <= 0 || static_cast<std::size_t>(2 * k) > frame.size())
        throw Error("spacing k=" + std::to_string(k) + " outside (0, K/2]");
}

} // namespace

double avg_phase_diff_vector(const SubcarrierFrame &frame, int k)
{
    check_spacing(frame, k);
    const std::size_t K = frame.size();
    const auto uk = static_cast<std::size_t>(k);
    cplx sum(0.0, 0.0);
    double scale = 0.0;
    for (std::size_t i = 0; i + uk < K; ++i)
    {
        sum += frame.values[i + uk] - frame.values[i];
        scale += std::abs(frame.values[i + uk]) + std::abs(frame.values[i]);
    }
    if (!(std::abs(sum) > 1e-12 * scale))
        throw Error("degenerate spectrum");
    return wrap_phase(std::arg(sum));
}

double avg_phase_diff_robust(const SubcarrierFrame &frame, int k)
{
    check_spacing(frame, k);
    if (frame.comb_size <= 0 || k % frame.comb_size != 0)
        throw Error("comb misalignment");
    const std::size_t K = frame.size();
    const auto uk = static_cast<std::size_t>(k);
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i + uk < K; ++i)
    {
        if (!frame.is_allocated(i) || !frame.is_allocated(i + uk))
            continue;
        double lag = std::arg(frame.values[i] * std::conj(frame.values[i + uk]));
        if (std::abs(lag) < kZeroLag)
            lag = 0.0;
        acc += wrap_progressive(lag);
        ++pairs;
    }
    if (pairs == 0)
        throw Error("no allocated subcarrier pairs at spacing k=" + std::to_string(k));
    return acc / static_cast<double>(pairs);
}

RangeEstimate range_single_k(const SubcarrierFrame &frame, int k, long assume_cycles)
{
    RangeEstimate r;
    r.spacing = k;
    r.avg_phase_diff = avg_phase_diff_robust(frame, k);
    r.virtual_wavelength = virtual_wavelength(k * frame.subcarrier_spacing);
    r.cycle_count = assume_cycles;
    r.distance = distance_from_phase(r.avg_phase_diff, r.cycle_count, r.virtual_wavelength);
    return r;
}

CascadeRange range_cascade(const SubcarrierFrame &frame, std::span<const int> k_schedule, double max_distance)
{
    if (k_schedule.empty())
        throw Error("range_cascade: empty spacing schedule");
    for (std::size_t i = 1; i < k_schedule.size(); ++i)
        if (k_schedule[i] <= k_schedule[i - 1])
            throw Error("range_cascade: spacing schedule must be strictly ascending");
    const double coarse_lambda = virtual_wavelength(k_schedule.front() * frame.subcarrier_spacing);
    if (coarse_lambda < max_distance)
        throw Error("ambiguity not excluded");

    CascadeRange out;
    out.levels.reserve(k_schedule.size());
    out.levels.push_back(range_single_k(frame, k_schedule.front(), 0));
    for (std::size_t i = 1; i < k_schedule.size(); ++i)
    {
        const int k = k_schedule[i];
        RangeEstimate r;
        r.spacing = k;
        r.avg_phase_diff = avg_phase_diff_robust(frame, k);
        r.virtual_wavelength = virtual_wavelength(k * frame.subcarrier_spacing);
        const double x = out.levels.back().distance / r.virtual_wavelength - r.avg_phase_diff / kTwoPi;
        r.cycle_count = static_cast<long>(std::ceil(x - 0.5));
        r.distance = distance_from_phase(r.avg_phase_diff, r.cycle_count, r.virtual_wavelength);
        out.levels.push_back(r);
    }
    out.estimate = out.levels.back();
    return out;
}

std::vector<int> default_k_schedule(std::size_t num_subcarriers, int comb_size)
{
    if (comb_size <= 0 || num_subcarriers < 2 * static_cast<std::size_t>(comb_size))
        throw Error("default_k_schedule: comb does not fit the grid");
    const int n = comb_size;
    const int finest = static_cast<int>(num_subcarriers / 2) / n * n;
    const int mid = n * static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_subcarriers) / (2.0 * n))));
    std::vector<int> s{n, std::min(mid, finest), finest};
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

void write_range_diagnostics(std::ostream &out, const CascadeRange &range, bool header)
{
    if (header)
        out << "trp_id,k,lambda_v_m,dphi_rad,N,d_m\n";
    for (const auto &r : range.levels)
        out << r.trp_id << ',' << r.spacing << ',' << format_double(r.virtual_wavelength) << ','
            << format_double(r.avg_phase_diff) << ',' << r.cycle_count << ',' << format_double(r.distance) << '\n';
}

} // namespace nrpos
