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

#include "dft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace nrpos::detail
{

namespace
{

struct PlanCache
{
    std::mutex mutex;
    std::map<std::size_t, fftw_plan> backward;

    ~PlanCache()
    {
        for (auto &[n, plan] : backward)
            fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n)
    {
        std::lock_guard lock(mutex);
        auto it = backward.find(n);
        if (it != backward.end())
            return it->second;
        fftw_complex *in = fftw_alloc_complex(n);
        fftw_complex *out = fftw_alloc_complex(n);
        fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_BACKWARD,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        backward.emplace(n, plan);
        return plan;
    }
};

PlanCache &cache()
{
    static PlanCache c;
    return c;
}

} // namespace

std::vector<cplx> inverse_dft_unitary(std::span<const cplx> spectrum)
{
    const std::size_t n = spectrum.size();
    std::vector<cplx> in(spectrum.begin(), spectrum.end());
    std::vector<cplx> out(n);
    if (n == 0)
        return out;
    fftw_plan plan = cache().get(n);
    // std::complex<double> is layout-compatible with fftw_complex
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex *>(in.data()), reinterpret_cast<fftw_complex *>(out.data()));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto &v : out)
        v *= scale;
    return out;
}

} // namespace nrpos::detail
