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

// Internal FFTW wrapper. Plans are cached per size behind a mutex; execution
// uses the new-array interface, which FFTW documents as thread-safe.

#include "nrpos/common.hpp"

#include <span>
#include <vector>

namespace nrpos::detail
{

/// x[t] = (1/sqrt(M)) * sum_m X[m] exp(+j 2 pi m t / M)
std::vector<cplx> inverse_dft_unitary(std::span<const cplx> spectrum);

} // namespace nrpos::detail
