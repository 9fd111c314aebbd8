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

#include "nrpos/signal.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace nrpos
{

double SubcarrierFrame::subcarrier_frequency(std::size_t i) const
{
    const double centre = static_cast<double>(values.size() / 2);
    return carrier_frequency + (static_cast<double>(i) - centre) * subcarrier_spacing;
}

std::vector<std::size_t> SubcarrierFrame::allocated_indices() const
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < allocated.size(); ++i)
        if (allocated[i])
            idx.push_back(i);
    return idx;
}

SubcarrierFrame generate_reference_frame(const ScenarioConfig &config, std::uint64_t sequence_seed)
{
    config.validate();
    const std::size_t K = config.num_subcarriers;
    SubcarrierFrame f;
    f.values.assign(K, cplx(0.0, 0.0));
    f.allocated.assign(K, 0);
    f.reference_phases.assign(K, 0.0);
    f.subcarrier_spacing = config.subcarrier_spacing;
    f.carrier_frequency = config.carrier_frequency;
    f.comb_size = config.comb_size;
    f.comb_offset = config.comb_offset;

    Rng rng(derive_seed(sequence_seed, 0x5253ULL));
    std::uniform_real_distribution<double> phase(-kPi, kPi);
    const auto n = static_cast<std::size_t>(config.comb_size);
    for (std::size_t i = static_cast<std::size_t>(config.comb_offset); i < K; i += n)
    {
        const double ph = wrap_phase(phase(rng));
        f.allocated[i] = 1;
        f.reference_phases[i] = ph;
        f.values[i] = std::polar(1.0, ph);
    }
    return f;
}

namespace
{

void require_same_layout(const SubcarrierFrame &a, const SubcarrierFrame &b)
{
    if (a.size() != b.size())
        throw Error("frame size mismatch");
    if (a.allocated != b.allocated)
        throw Error("allocation mask mismatch");
}

} // namespace

SubcarrierFrame correct_phase_offsets(const SubcarrierFrame &rx, const SubcarrierFrame &reference)
{
    require_same_layout(rx, reference);
    SubcarrierFrame out = rx;
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        if (!out.is_allocated(i))
            continue;
        out.values[i] *= std::polar(1.0, -reference.reference_phases[i]);
        out.reference_phases[i] = 0.0;
    }
    return out;
}

SubcarrierFrame apply_phase_offsets(const SubcarrierFrame &frame, const SubcarrierFrame &reference)
{
    require_same_layout(frame, reference);
    SubcarrierFrame out = frame;
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        if (!out.is_allocated(i))
            continue;
        out.values[i] *= std::polar(1.0, reference.reference_phases[i]);
        out.reference_phases[i] = reference.reference_phases[i];
    }
    return out;
}

void write_frame_csv(std::ostream &out, const SubcarrierFrame &frame)
{
    out << "index,re,im,allocated\n";
    for (std::size_t i = 0; i < frame.size(); ++i)
        out << i << ',' << format_double(frame.values[i].real()) << ',' << format_double(frame.values[i].imag())
            << ',' << int(frame.allocated[i]) << '\n';
}

SubcarrierFrame read_frame_csv(std::istream &in, const SubcarrierFrame &like)
{
    SubcarrierFrame f = like;
    f.values.clear();
    f.allocated.clear();
    f.reference_phases.clear();
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string field;
        std::size_t index;
        double re, im;
        int alloc;
        char c1, c2, c3;
        if (!(ss >> index >> c1 >> re >> c2 >> im >> c3 >> alloc) || c1 != ',' || c2 != ',' || c3 != ',')
            throw Error("frame csv: malformed line \"" + line + "\"");
        if (index != f.values.size())
            throw Error("frame csv: indices must be consecutive from 0");
        f.values.emplace_back(re, im);
        f.allocated.push_back(alloc ? 1 : 0);
        f.reference_phases.push_back(0.0);
    }
    return f;
}

} // namespace nrpos
