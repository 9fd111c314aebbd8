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

#include "nrpos/channel.hpp"

#include "csv.hpp"
#include "dft.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace nrpos
{

void NoiseConfig::validate() const
{
    if (std::isnan(snr_db))
        throw Error("noise: snr_db is NaN");
    if (!(phase_noise_std >= 0.0))
        throw Error("noise: phase_noise_std must be non-negative");
    if (nlos_tap_count < 1)
        throw Error("noise: nlos_tap_count must be at least 1");
    if (!(nlos_excess_delay_scale > 0.0))
        throw Error("noise: nlos_excess_delay_scale must be positive");
    if (los_scatter_taps < 0)
        throw Error("noise: los_scatter_taps must be non-negative");
    if (los_scatter_taps > 0 && !(los_scatter_delay_scale > 0.0))
        throw Error("noise: los_scatter_delay_scale must be positive");
    const auto &m = los_probability;
    if (m.kind == LosProbabilityModel::Kind::constant && !(m.probability >= 0.0 && m.probability <= 1.0))
        throw Error("noise: constant LOS probability outside [0, 1]");
    if (m.kind == LosProbabilityModel::Kind::umi && !(m.breakpoint_m > 0.0 && m.decay_m > 0.0))
        throw Error("noise: LOS probability curve parameters must be positive");
}

const char *to_string(LinkState s)
{
    return s == LinkState::los ? "LOS" : "NLOS";
}

std::size_t PowerDelayProfile::argmax() const
{
    if (powers.empty())
        throw Error("empty power delay profile");
    return static_cast<std::size_t>(std::max_element(powers.begin(), powers.end()) - powers.begin());
}

double PowerDelayProfile::total_power() const
{
    double s = 0.0;
    for (double p : powers)
        s += p;
    return s;
}

double los_probability(const LosProbabilityModel &model, double distance_2d)
{
    if (model.kind == LosProbabilityModel::Kind::constant)
        return model.probability;
    if (distance_2d <= model.breakpoint_m)
        return 1.0;
    const double e = std::exp(-distance_2d / model.decay_m);
    return model.breakpoint_m / distance_2d * (1.0 - e) + e;
}

namespace
{

double positive_exponential(Rng &rng, double mean)
{
    std::exponential_distribution<double> ex(1.0 / mean);
    double v = 0.0;
    while (v <= 0.0)
        v = ex(rng);
    return v;
}

cplx complex_gaussian(Rng &rng, double variance)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

} // namespace

ChannelRealization draw_channel(const Vec3 &tx, const Vec3 &rx, const NoiseConfig &noise,
                                std::optional<LinkState> force_state, Rng &rng)
{
    if (tx == rx)
        throw Error("draw_channel: tx and rx coincide");
    noise.validate();

    ChannelRealization ch;
    ch.tx_pos = tx;
    ch.rx_pos = rx;
    const double d3 = (tx - rx).norm();
    const double d2 = std::hypot(tx.x() - rx.x(), tx.y() - rx.y());
    const double tau0 = d3 / kSpeedOfLight;

    LinkState state;
    if (force_state)
        state = *force_state;
    else
    {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        state = u(rng) < los_probability(noise.los_probability, d2) ? LinkState::los : LinkState::nlos;
    }
    ch.is_los = state == LinkState::los;

    const double fc_ghz = noise.carrier_frequency / 1e9;
    const double pl_los = 32.4 + 21.0 * std::log10(d3) + 20.0 * std::log10(fc_ghz);

    if (ch.is_los)
    {
        ch.path_loss_db = pl_los;
        ch.taps.push_back({tau0, cplx(1.0, 0.0)});
        if (noise.los_scatter_taps > 0)
        {
            const double scatter_power = std::pow(10.0, -noise.los_k_factor_db / 10.0);
            std::vector<double> excess(static_cast<std::size_t>(noise.los_scatter_taps));
            for (auto &e : excess)
                e = positive_exponential(rng, noise.los_scatter_delay_scale);
            double weight_sum = 0.0;
            for (double e : excess)
                weight_sum += std::exp(-e / noise.los_scatter_delay_scale);
            for (double e : excess)
            {
                const double p = scatter_power * std::exp(-e / noise.los_scatter_delay_scale) / weight_sum;
                ch.taps.push_back({tau0 + e, complex_gaussian(rng, p)});
            }
        }
    }
    else
    {
        ch.path_loss_db = std::max(pl_los, 22.4 + 35.3 * std::log10(d3) + 21.3 * std::log10(fc_ghz));
        const double scale = noise.nlos_excess_delay_scale;
        double excess = positive_exponential(rng, scale);
        const double first = excess;
        for (int i = 0; i < noise.nlos_tap_count; ++i)
        {
            if (i > 0)
                excess += positive_exponential(rng, scale / 2.0);
            const double mean_power = std::exp(-(excess - first) / scale);
            ch.taps.push_back({tau0 + excess, complex_gaussian(rng, mean_power)});
        }
    }

    std::sort(ch.taps.begin(), ch.taps.end(), [](const Tap &a, const Tap &b) { return a.delay < b.delay; });
    double total = 0.0;
    for (const auto &t : ch.taps)
        total += std::norm(t.gain);
    if (total > 0.0)
    {
        const double s = 1.0 / std::sqrt(total);
        for (auto &t : ch.taps)
            t.gain *= s;
    }
    return ch;
}

SubcarrierFrame apply_channel(const SubcarrierFrame &frame, const ChannelRealization &ch, const NoiseConfig &noise,
                              Rng &rng)
{
    if (frame.allocated.size() != frame.size())
        throw Error("apply_channel: malformed frame");
    SubcarrierFrame out = frame;

    double tx_power = 0.0;
    std::size_t n_alloc = 0;
    std::normal_distribution<double> phase_noise(0.0, noise.phase_noise_std > 0.0 ? noise.phase_noise_std : 1.0);
    for (std::size_t i = 0; i < frame.size(); ++i)
    {
        if (!frame.is_allocated(i))
            continue;
        tx_power += std::norm(frame.values[i]);
        ++n_alloc;
        const double f = frame.subcarrier_frequency(i);
        cplx h(0.0, 0.0);
        for (const auto &tap : ch.taps)
            h += tap.gain * std::polar(1.0, -kTwoPi * std::fmod(f * tap.delay, 1.0));
        out.values[i] = frame.values[i] * h;
        if (noise.phase_noise_std > 0.0)
            out.values[i] *= std::polar(1.0, phase_noise(rng));
    }

    if (std::isfinite(noise.snr_db) && n_alloc > 0)
    {
        const double per_bin = tx_power / static_cast<double>(n_alloc);
        const double variance = per_bin / std::pow(10.0, noise.snr_db / 10.0);
        for (auto &v : out.values)
            v += complex_gaussian(rng, variance);
    }
    else if (std::isinf(noise.snr_db) && noise.snr_db < 0)
    {
        throw Error("apply_channel: SNR of -inf dB");
    }
    return out;
}

PowerDelayProfile compute_pdp(const SubcarrierFrame &frame)
{
    const auto idx = frame.allocated_indices();
    if (idx.empty())
        throw Error("compute_pdp: no allocated subcarriers");
    std::vector<cplx> comb(idx.size());
    for (std::size_t m = 0; m < idx.size(); ++m)
        comb[m] = frame.values[idx[m]];
    const auto td = detail::inverse_dft_unitary(comb);

    PowerDelayProfile pdp;
    const double M = static_cast<double>(idx.size());
    pdp.delay_spacing = 1.0 / (M * frame.comb_size * frame.subcarrier_spacing);
    pdp.delays.resize(td.size());
    pdp.powers.resize(td.size());
    for (std::size_t t = 0; t < td.size(); ++t)
    {
        pdp.delays[t] = static_cast<double>(t) * pdp.delay_spacing;
        pdp.powers[t] = std::norm(td[t]);
    }
    return pdp;
}

LinkLabel label_link(const ChannelRealization &ch, const PowerDelayProfile &pdp, double threshold)
{
    if (pdp.powers.empty())
        throw Error("label_link: empty power delay profile");
    LinkLabel l;
    l.tau_est = pdp.delays[pdp.argmax()];
    l.tau_true = ch.geometric_delay();
    l.tau_diff = std::abs(l.tau_est - l.tau_true);
    l.state = l.tau_diff > threshold ? LinkState::nlos : LinkState::los;
    return l;
}

std::vector<double> time_domain_magnitude(const SubcarrierFrame &frame)
{
    const auto td = detail::inverse_dft_unitary(frame.values);
    std::vector<double> mag(td.size());
    for (std::size_t i = 0; i < td.size(); ++i)
        mag[i] = std::abs(td[i]);
    return mag;
}

void write_dataset_csv(std::ostream &out, const std::vector<DatasetRow> &rows)
{
    for (const auto &r : rows)
    {
        out << to_string(r.label) << ',' << format_double(r.tau_diff_ns) << ',' << r.magnitudes.size();
        for (double m : r.magnitudes)
            out << ',' << format_double(m);
        out << '\n';
    }
}

std::vector<DatasetRow> read_dataset_csv(std::istream &in)
{
    std::vector<DatasetRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string field;
        DatasetRow row;
        std::getline(ss, field, ',');
        if (field == "LOS" || field == "0")
            row.label = LinkState::los;
        else if (field == "NLOS" || field == "1")
            row.label = LinkState::nlos;
        else
            throw Error("dataset csv: bad label on line " + std::to_string(lineno));
        std::getline(ss, field, ',');
        row.tau_diff_ns = detail::parse_number(field, "dataset csv");
        std::getline(ss, field, ',');
        const double declared = detail::parse_number(field, "dataset csv");
        if (!(declared >= 0.0) || declared != std::floor(declared))
            throw Error("dataset csv: bad length on line " + std::to_string(lineno));
        const auto K = static_cast<std::size_t>(declared);
        row.magnitudes.reserve(K);
        while (std::getline(ss, field, ','))
            row.magnitudes.push_back(detail::parse_number(field, "dataset csv"));
        if (row.magnitudes.size() != K)
            throw Error("dataset csv: line " + std::to_string(lineno) + " declares " + std::to_string(K) +
                        " values but has " + std::to_string(row.magnitudes.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace nrpos
