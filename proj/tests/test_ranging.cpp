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

#include "catch2/catch_amalgamated.hpp"

#include "nrpos/channel.hpp"
#include "nrpos/ranging.hpp"
#include "ranging_oracles.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace nrpos;
using namespace nrpos::test;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("ranging - virtual wavelength")
{
    CHECK(virtual_wavelength(200e6) == Catch::Approx(1.499).margin(5e-4));
    CHECK(virtual_wavelength(120e3) == Catch::Approx(2498.3).margin(0.05));
    CHECK(virtual_wavelength(kSpeedOfLight) == 1.0);
    CHECK_THROWS_WITH(virtual_wavelength(0.0), ContainsSubstring("degenerate pair"));
    CHECK_THROWS_WITH(virtual_wavelength(-5.0), ContainsSubstring("degenerate pair"));
}

TEST_CASE("ranging - distance from phase")
{
    const double lambda = virtual_wavelength(6 * 120e3);
    CHECK(distance_from_phase(kPi, 0, lambda) == Catch::Approx(208.2).margin(0.05));
    CHECK(distance_from_phase(kTwoPi, 0, lambda) == Catch::Approx(lambda));
    CHECK(distance_from_phase(kPi, 3, 2.0) == Catch::Approx(7.0));
}

TEST_CASE("ranging - vector estimator matches brute force complex sum")
{
    Rng rng(1);
    auto cfg = umi_reference_scenario();
    cfg.num_subcarriers = 256;
    cfg.comb_size = 1;
    auto frame = generate_reference_frame(cfg, 1);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial)
    {
        for (auto &v : frame.values)
            v = cplx(nd(rng), nd(rng));
        const int k = 1 + static_cast<int>(rng() % 128);
        cplx sum(0.0, 0.0);
        for (std::size_t i = 0; i + k < frame.size(); ++i)
            sum += frame.values[i + k] - frame.values[i];
        REQUIRE(avg_phase_diff_vector(frame, k) == Catch::Approx(std::arg(sum)).margin(1e-12));
    }
}

TEST_CASE("ranging - vector estimator edge cases")
{
    auto cfg = umi_reference_scenario();
    cfg.num_subcarriers = 2;
    cfg.comb_size = 1;
    auto frame = generate_reference_frame(cfg, 1);
    frame.values = {cplx(1.0, 0.0), cplx(0.0, 2.0)};
    CHECK(avg_phase_diff_vector(frame, 1) == Catch::Approx(std::arg(cplx(-1.0, 2.0))));
    CHECK_THROWS_AS(avg_phase_diff_vector(frame, 2), Error);
    CHECK_THROWS_AS(avg_phase_diff_vector(frame, 0), Error);
    frame.values = {cplx(1.0, 1.0), cplx(1.0, 1.0)};
    CHECK_THROWS_WITH(avg_phase_diff_vector(frame, 1), ContainsSubstring("degenerate spectrum"));
}

TEST_CASE("ranging - robust estimator on a noiseless link")
{
    const auto cfg = umi_reference_scenario();
    Rng rng(2);
    for (double d : {5.0, 23.92, 45.52, 120.0})
    {
        const auto rx = received(cfg, d, quiet(), rng);
        for (int k : {6, 204, 1638})
        {
            const double expect = wrap_progressive(kTwoPi * k * cfg.subcarrier_spacing * d / kSpeedOfLight);
            REQUIRE(avg_phase_diff_robust(rx, k) == Catch::Approx(expect).margin(1e-9));
        }
    }
}

TEST_CASE("ranging - robust estimator boundary and alignment")
{
    const auto cfg = umi_reference_scenario();
    const auto ref = generate_reference_frame(cfg, 3);
    const auto flat = correct_phase_offsets(ref, ref);
    CHECK(avg_phase_diff_robust(flat, 6) == Catch::Approx(kTwoPi));
    CHECK_THROWS_WITH(avg_phase_diff_robust(flat, 7), ContainsSubstring("comb misalignment"));
    CHECK_THROWS_AS(avg_phase_diff_robust(flat, 0), Error);
    CHECK_THROWS_AS(avg_phase_diff_robust(flat, 1644), Error);
}

TEST_CASE("ranging - robust estimator ignores unallocated bins")
{
    const auto cfg = umi_reference_scenario();
    Rng rng(4);
    auto clean = received(cfg, 37.04, quiet(), rng);
    auto dirty = clean;
    std::normal_distribution<double> nd(3.0, 50.0);
    for (std::size_t i = 0; i < dirty.size(); ++i)
        if (!dirty.is_allocated(i))
            dirty.values[i] = cplx(nd(rng), nd(rng));
    for (int k : {6, 204, 1638})
    {
        CHECK(avg_phase_diff_robust(dirty, k) == Catch::Approx(avg_phase_diff_robust(clean, k)).margin(1e-9));
        CHECK(std::abs(wrap_phase(avg_phase_diff_vector(dirty, k) - avg_phase_diff_vector(clean, k))) > 1e-3);
    }
}

TEST_CASE("ranging - estimators are invariant to magnitude scaling")
{
    const auto cfg = umi_reference_scenario();
    Rng rng(5);
    NoiseConfig noise;
    noise.snr_db = 15.0;
    auto rx = received(cfg, 45.52, noise, rng);
    auto scaled = rx;
    for (auto &v : scaled.values)
        v *= 17.5;
    CHECK(avg_phase_diff_robust(scaled, 204) == Catch::Approx(avg_phase_diff_robust(rx, 204)).margin(1e-12));
    CHECK(avg_phase_diff_vector(scaled, 204) == Catch::Approx(avg_phase_diff_vector(rx, 204)).margin(1e-12));
}

TEST_CASE("ranging - single k self consistency")
{
    const auto cfg = umi_reference_scenario();
    Rng rng(6);
    NoiseConfig noise;
    noise.snr_db = 10.0;
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto rx = received(cfg, test::uniform(rng, 1.0, 200.0), noise, rng, rng());
        for (long N : {0L, 3L})
        {
            const auto r = range_single_k(rx, 204, N);
            REQUIRE(r.avg_phase_diff > 0.0);
            REQUIRE(r.avg_phase_diff <= kTwoPi);
            REQUIRE(r.virtual_wavelength == Catch::Approx(kSpeedOfLight / (204 * cfg.subcarrier_spacing)));
            REQUIRE(std::abs(r.distance - (r.avg_phase_diff / kTwoPi + N) * r.virtual_wavelength) < 1e-9);
        }
    }
    const auto rx = received(cfg, 23.92, quiet(), rng);
    CHECK(range_single_k(rx, 6, 0).distance == Catch::Approx(23.92).margin(1e-3));
}

TEST_CASE("ranging - default schedule")
{
    CHECK(default_k_schedule(3276, 6) == std::vector<int>{6, 102, 1638});
    CHECK(default_k_schedule(816, 6) == std::vector<int>{6, 54, 408});
    CHECK(default_k_schedule(12, 6) == std::vector<int>{6});
    CHECK_THROWS_AS(default_k_schedule(6, 6), Error);
    for (std::size_t K : {120u, 600u, 3276u})
        for (int n : {1, 2, 4, 6, 12})
        {
            const auto s = default_k_schedule(K, n);
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                REQUIRE(s[i] % n == 0);
                REQUIRE(static_cast<std::size_t>(2 * s[i]) <= K);
                if (i > 0)
                    REQUIRE(s[i] > s[i - 1]);
            }
        }
}

TEST_CASE("ranging - noiseless cascade recovers the reference distances")
{
    const auto cfg = umi_reference_scenario();
    const std::vector<int> schedule{6, 204, 1638};
    Rng rng(7);
    for (const auto &trp : cfg.trp_list)
    {
        const double d = (trp.position - cfg.ue_init).norm();
        const auto r = range_cascade(received(cfg, d, quiet(), rng), schedule, 300.0);
        REQUIRE(r.levels.size() == 3);
        CHECK(r.levels.front().cycle_count == 0);
        CHECK(std::abs(r.estimate.distance - d) < 1e-3);
        CHECK(r.estimate.spacing == 1638);
    }
}

TEST_CASE("ranging - noiseless cascade refines monotonically")
{
    const auto cfg = umi_reference_scenario();
    const auto schedule = default_k_schedule(cfg.num_subcarriers, cfg.comb_size);
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial)
    {
        const double d = test::uniform(rng, 0.5, 300.0);
        const auto r = range_cascade(received(cfg, d, quiet(), rng, rng()), schedule, 300.0);
        for (std::size_t i = 1; i < r.levels.size(); ++i)
            REQUIRE(std::abs(r.levels[i].distance - d) <= std::abs(r.levels[i - 1].distance - d) + 1e-9);
        REQUIRE(std::abs(r.estimate.distance - d) < 1e-6);
    }
}

TEST_CASE("ranging - cascade preconditions")
{
    const auto cfg = umi_reference_scenario();
    Rng rng(9);
    const auto rx = received(cfg, 10.0, quiet(), rng);
    const std::vector<int> coarse_too_fine{204, 1638};
    CHECK_THROWS_WITH(range_cascade(rx, coarse_too_fine, 300.0), ContainsSubstring("ambiguity not excluded"));
    const std::vector<int> descending{204, 6};
    CHECK_THROWS_AS(range_cascade(rx, descending, 1.0), Error);
    CHECK_THROWS_AS(range_cascade(rx, std::vector<int>{}, 300.0), Error);
}

TEST_CASE("ranging - cascade cycle count is the nearest integer")
{
    const auto cfg = umi_reference_scenario();
    const auto schedule = default_k_schedule(cfg.num_subcarriers, cfg.comb_size);
    NoiseConfig noise;
    noise.snr_db = 0.0;
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial)
    {
        const auto r = range_cascade(received(cfg, test::uniform(rng, 1.0, 250.0), noise, rng, rng()), schedule, 300.0);
        for (std::size_t i = 1; i < r.levels.size(); ++i)
        {
            const auto &fine = r.levels[i];
            const double x = r.levels[i - 1].distance / fine.virtual_wavelength - fine.avg_phase_diff / kTwoPi;
            REQUIRE(std::abs(x - static_cast<double>(fine.cycle_count)) <= 0.5);
            if (std::abs(std::abs(x - std::floor(x)) - 0.5) > 1e-9)
                REQUIRE(fine.cycle_count == std::lround(x));
        }
    }
}

TEST_CASE("ranging - phase noise error follows the propagation oracle")
{
    auto cfg = umi_reference_scenario();
    NoiseConfig noise = quiet();
    noise.phase_noise_std = 1.4 * kPi / 180.0;
    const std::vector<int> schedule{6, 204, 1638};
    const double d = 37.0439;
    Rng rng(10);
    const int trials = 300;
    double sum = 0.0, sumsq = 0.0;
    SubcarrierFrame last;
    for (int t = 0; t < trials; ++t)
    {
        last = received(cfg, d, noise, rng);
        const double e = range_cascade(last, schedule, 300.0).estimate.distance - d;
        sum += e;
        sumsq += e * e;
    }
    const double mean = sum / trials;
    const double sd = std::sqrt(sumsq / trials - mean * mean);
    const double lambda = kSpeedOfLight / (1638 * cfg.subcarrier_spacing);
    const double oracle = lambda / kTwoPi * noise.phase_noise_std * std::sqrt(pair_mean_variance_factor(last, 1638));
    CHECK(sd == Catch::Approx(oracle).epsilon(0.2));
}

TEST_CASE("ranging - diagnostics csv")
{
    const auto cfg = umi_reference_scenario();
    Rng rng(11);
    const std::vector<int> schedule{6, 204, 1638};
    auto r = range_cascade(received(cfg, 23.92, quiet(), rng), schedule, 300.0);
    for (auto &l : r.levels)
        l.trp_id = "TRP-1";
    std::ostringstream out;
    write_range_diagnostics(out, r, true);
    const auto text = out.str();
    CHECK(text.rfind("trp_id,k,lambda_v_m,dphi_rad,N,d_m\nTRP-1,6,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
