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

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nrpos
{

using Vec3 = Eigen::Vector3d;
using cplx = std::complex<double>;
using Rng = std::mt19937_64;

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Raised for every precondition or runtime failure inside the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Canonical phase wrap into (-pi, pi]. Every module uses this one helper.
double wrap_phase(double rad);

/// Phase-progression wrap into (0, 2pi]. A zero difference maps to 2pi.
double wrap_progressive(double rad);

/// Independent, reproducible seed for substream `stream` of a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Shortest round-trip decimal form; integral values keep a trailing ".0".
std::string format_double(double value);

/// 64-bit FNV-1a, used for config fingerprints in study headers.
std::uint64_t fnv1a64(std::string_view text);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is visited
/// exactly once; callers write results by index so the outcome does not
/// depend on the thread count.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)> &fn);

} // namespace nrpos
