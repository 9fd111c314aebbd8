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

namespace nrpos
{

/// Distance -> LOS probability curve used when a link state is drawn.
struct LosProbabilityModel
{
    enum class Kind
    {
        umi,      // min(d1/d, 1) * (1 - exp(-d/d2)) + exp(-d/d2)
        constant, // fixed probability regardless of distance
    };
    Kind kind = Kind::umi;
    double breakpoint_m = 18.0; // d1
    double decay_m = 36.0;      // d2
    double probability = 1.0;   // used by Kind::constant
};

struct NoiseConfig
{
    double snr_db = 30.0;                   // referenced to the transmitted allocated-bin power
    double phase_noise_std = 0.0;           // radians, i.i.d. per allocated bin
    double nlos_excess_delay_scale = 100e-9; // seconds, mean of the exponential excess delay
    int nlos_tap_count = 8;
    LosProbabilityModel los_probability;

    // LOS scattering around the dominant tap
    double los_k_factor_db = 25.0;
    int los_scatter_taps = 4;
    double los_scatter_delay_scale = 30e-9;

    double carrier_frequency = 3.8e9; // Hz, only used for the recorded path loss

    void validate() const;
};

} // namespace nrpos
