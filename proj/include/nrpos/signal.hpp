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

// Comb-allocated reference-signal frames in the subcarrier domain.

#include "nrpos/common.hpp"
#include "nrpos/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace nrpos
{

struct SubcarrierFrame
{
    std::vector<cplx> values;
    std::vector<std::uint8_t> allocated; // comb mask, 1 where the reference signal is mapped
    std::vector<double> reference_phases; // per-bin code phase in (-pi, pi]; 0 on unallocated bins
    double subcarrier_spacing = 30e3;
    double carrier_frequency = 3.8e9;
    int comb_size = 1;
    int comb_offset = 0;

    std::size_t size() const { return values.size(); }
    bool is_allocated(std::size_t i) const { return allocated[i] != 0; }

    /// Absolute RF frequency of bin i; the grid is centred on the carrier.
    double subcarrier_frequency(std::size_t i) const;

    std::vector<std::size_t> allocated_indices() const;
};

/// Seeded unit-modulus sequence on the comb; unallocated bins are exactly zero.
SubcarrierFrame generate_reference_frame(const ScenarioConfig &config, std::uint64_t sequence_seed);

/// Removes the reference code phase from each allocated bin of `rx`.
SubcarrierFrame correct_phase_offsets(const SubcarrierFrame &rx, const SubcarrierFrame &reference);

/// Inverse of correct_phase_offsets: re-applies the reference code phase.
SubcarrierFrame apply_phase_offsets(const SubcarrierFrame &frame, const SubcarrierFrame &reference);

/// CSV `index,re,im,allocated`, one bin per line, with a header row.
void write_frame_csv(std::ostream &out, const SubcarrierFrame &frame);

/// Reads values and mask back; numerology fields are taken from `like`.
SubcarrierFrame read_frame_csv(std::istream &in, const SubcarrierFrame &like);

} // namespace nrpos
