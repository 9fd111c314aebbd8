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

// Carrier-phase ranging from differential subcarrier phases.
//
// Sign convention: the channel applies exp(-j 2 pi f tau), so the phase of a
// higher subcarrier trails the lower one by 2 pi k SCS tau. The robust
// estimator reports that progression as a positive angle in (0, 2 pi].

#include "nrpos/common.hpp"
#include "nrpos/signal.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nrpos
{

struct RangeEstimate
{
    double distance = 0.0;           // d
    int spacing = 0;                 // k
    double virtual_wavelength = 0.0; // c / (k SCS)
    double avg_phase_diff = 0.0;     // radians
    long cycle_count = 0;            // N
    std::string trp_id;
};

struct CascadeRange
{
    RangeEstimate estimate;             // finest level
    std::vector<RangeEstimate> levels;  // coarse to fine, estimate == levels.back()
};

/// c / delta_f; throws "degenerate pair" for delta_f <= 0.
double virtual_wavelength(double delta_f);

/// d = (dphi / 2pi + N) * lambda_v
double distance_from_phase(double avg_phase_diff, long cycle_count, double virtual_wavelength);

/// Baseline estimator: arg of sum_i (X[i+k] - X[i]) over all K-k index
/// pairs, unallocated bins included. Requires 0 < k <= K/2.
double avg_phase_diff_vector(const SubcarrierFrame &frame, int k);

/// Comb-aware estimator on an offset-corrected frame: per-pair phase lag
/// between allocated bins i and i+k, each wrapped into (0, 2pi], then the
/// arithmetic mean. k must be a multiple of the comb size.
double avg_phase_diff_robust(const SubcarrierFrame &frame, int k);

RangeEstimate range_single_k(const SubcarrierFrame &frame, int k, long assume_cycles = 0);

/// Coarse-to-fine spacing cascade. The first spacing must give a virtual
/// wavelength longer than `max_distance` so that N = 0 there; each finer
/// level takes N = round(d_prev / lambda - dphi / 2pi), exact halves rounding
/// to the smaller N.
CascadeRange range_cascade(const SubcarrierFrame &frame, std::span<const int> k_schedule, double max_distance);

/// Three-level schedule n, n*ceil(sqrt(K/(2n))), largest multiple of n <= K/2.
std::vector<int> default_k_schedule(std::size_t num_subcarriers, int comb_size);

/// CSV `trp_id,k,lambda_v_m,dphi_rad,N,d_m`; header written when requested.
void write_range_diagnostics(std::ostream &out, const CascadeRange &range, bool header);

} // namespace nrpos
