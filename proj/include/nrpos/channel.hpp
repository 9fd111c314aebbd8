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

// Tapped-delay-line multipath channel with ground-truth LOS state, power
// delay profiles and the delay-difference labelling rule.

#include "nrpos/common.hpp"
#include "nrpos/noise_config.hpp"
#include "nrpos/signal.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace nrpos
{

enum class LinkState
{
    los,
    nlos,
};

const char *to_string(LinkState s);

struct Tap
{
    double delay = 0.0; // seconds
    cplx gain{0.0, 0.0};
};

struct ChannelRealization
{
    std::vector<Tap> taps; // ascending delay, total power normalised to 1
    bool is_los = true;
    Vec3 tx_pos = Vec3::Zero();
    Vec3 rx_pos = Vec3::Zero();
    double path_loss_db = 0.0; // recorded, not applied: SNR is set relative to the transmit level

    double geometric_delay() const { return (tx_pos - rx_pos).norm() / kSpeedOfLight; }
};

struct PowerDelayProfile
{
    std::vector<double> delays; // seconds, ascending
    std::vector<double> powers; // linear
    double delay_spacing = 0.0;

    std::size_t argmax() const;
    double total_power() const;
};

struct LinkLabel
{
    LinkState state = LinkState::los;
    double tau_est = 0.0;
    double tau_true = 0.0;
    double tau_diff = 0.0;
};

/// LOS probability at horizontal distance d (metres).
double los_probability(const LosProbabilityModel &model, double distance_2d);

ChannelRealization draw_channel(const Vec3 &tx, const Vec3 &rx, const NoiseConfig &noise,
                                std::optional<LinkState> force_state, Rng &rng);

/// Multiplies every allocated bin by the channel frequency response, applies
/// per-bin phase noise, then adds complex Gaussian noise to all K bins.
SubcarrierFrame apply_channel(const SubcarrierFrame &frame, const ChannelRealization &ch, const NoiseConfig &noise,
                              Rng &rng);

/// Unitary inverse DFT over the allocated comb. With n | K the delay axis
/// spacing is 1/(K * SCS); total PDP power equals the allocated-bin power.
PowerDelayProfile compute_pdp(const SubcarrierFrame &frame);

/// NLOS iff |argmax-delay(PDP) - geometric delay| > threshold.
LinkLabel label_link(const ChannelRealization &ch, const PowerDelayProfile &pdp, double threshold = 10e-9);

/// Magnitude of the K-point unitary inverse DFT of the whole frame,
/// unallocated noise bins included. This is the classifier input.
std::vector<double> time_domain_magnitude(const SubcarrierFrame &frame);

// --- labelled dataset ---------------------------------------------------

struct DatasetRow
{
    LinkState label = LinkState::los;
    double tau_diff_ns = 0.0;
    std::vector<double> magnitudes;
};

/// One row per frame: `label,tau_diff_ns,K,m_0,...,m_{K-1}`.
void write_dataset_csv(std::ostream &out, const std::vector<DatasetRow> &rows);
std::vector<DatasetRow> read_dataset_csv(std::istream &in);

} // namespace nrpos
