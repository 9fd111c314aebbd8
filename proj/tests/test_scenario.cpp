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

#include "nrpos/scenario.hpp"
#include "coverage_oracles.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace nrpos;
using Catch::Matchers::ContainsSubstring;

namespace
{

// Dense sampling of the segment at 1 cm steps; a sample strictly inside a box blocks it.
bool sampled_visible(const Vec3 &a, const Vec3 &b, const ObstacleMap &map)
{
    const double len = (b - a).norm();
    const auto n = static_cast<long>(std::ceil(len / 0.01));
    for (long i = 1; i < n; ++i)
    {
        const Vec3 p = a + (b - a) * (static_cast<double>(i) / static_cast<double>(n));
        for (const auto &box : map.boxes)
            if ((p.array() > box.min.array()).all() && (p.array() < box.max.array()).all())
                return false;
    }
    return true;
}

// Shortest distance from p to the box, 0 inside.
double box_distance(const Vec3 &p, const Box &b)
{
    const Vec3 q = p.cwiseMax(b.min).cwiseMin(b.max);
    return (p - q).norm();
}

} // namespace

TEST_CASE("scenario - reference deployment validates")
{
    const auto cfg = umi_reference_scenario();
    REQUIRE_NOTHROW(cfg.validate());
    REQUIRE(cfg.trp_list.size() == 3);
    CHECK(cfg.num_subcarriers == 3276);
    CHECK(cfg.comb_size == 6);
    CHECK(static_cast<double>(cfg.num_subcarriers) * cfg.subcarrier_spacing <= cfg.bandwidth);
}

TEST_CASE("scenario - reference geometry distances")
{
    const auto cfg = umi_reference_scenario();
    const double expect[] = {std::sqrt(400.0 + 100.0 + 8.5 * 8.5), std::sqrt(900.0 + 400.0 + 8.5 * 8.5),
                             std::sqrt(400.0 + 1600.0 + 8.5 * 8.5)};
    for (int i = 0; i < 3; ++i)
        CHECK((cfg.trp_list[i].position - cfg.ue_init).norm() == Catch::Approx(expect[i]).epsilon(1e-12));
    CHECK(expect[0] == Catch::Approx(23.92).margin(0.01));
    CHECK(expect[1] == Catch::Approx(37.04).margin(0.01));
    CHECK(expect[2] == Catch::Approx(45.52).margin(0.01));
}

TEST_CASE("scenario - config invariants are enforced")
{
    auto cfg = umi_reference_scenario();
    SECTION("bandwidth")
    {
        cfg.num_subcarriers = 4000;
        CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("bandwidth"));
    }
    SECTION("comb size")
    {
        cfg.comb_size = 5;
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
    SECTION("comb offset")
    {
        cfg.comb_offset = 6;
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
    SECTION("no TRPs")
    {
        cfg.trp_list.clear();
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
    SECTION("TRP below ground")
    {
        cfg.trp_list[0].position.z() = -1.0;
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
    SECTION("non-finite TRP")
    {
        cfg.trp_list[1].position.x() = NAN;
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
}

TEST_CASE("scenario - JSON config round trip")
{
    auto cfg = umi_reference_scenario();
    cfg.rng_seed = 99;
    cfg.noise.snr_db = std::numeric_limits<double>::infinity();
    cfg.noise.phase_noise_std = 0.02;
    cfg.noise.los_probability.kind = LosProbabilityModel::Kind::constant;
    cfg.noise.los_probability.probability = 0.3;
    const auto back = parse_scenario_config(scenario_config_to_json(cfg));
    CHECK(back.rng_seed == 99);
    CHECK(std::isinf(back.noise.snr_db));
    CHECK(back.noise.phase_noise_std == 0.02);
    CHECK(back.noise.los_probability.kind == LosProbabilityModel::Kind::constant);
    CHECK(back.noise.los_probability.probability == 0.3);
    REQUIRE(back.trp_list.size() == 3);
    CHECK(back.trp_list[2].id == "TRP-3");
    CHECK(back.trp_list[2].position == cfg.trp_list[2].position);
    CHECK(scenario_config_to_json(back) == scenario_config_to_json(cfg));
}

TEST_CASE("scenario - partial JSON keeps defaults")
{
    const auto cfg = parse_scenario_config(R"({"rng_seed": 7, "noise": {"phase_noise_std_deg": 1.4}})");
    CHECK(cfg.rng_seed == 7);
    CHECK(cfg.num_subcarriers == 3276);
    CHECK(cfg.noise.phase_noise_std == Catch::Approx(1.4 * kPi / 180.0));
    CHECK_THROWS_AS(parse_scenario_config("{not json"), Error);
    CHECK_THROWS_AS(parse_scenario_config(R"({"comb_size": 3})"), Error);
}

TEST_CASE("scenario - unknown config keys are rejected")
{
    CHECK_THROWS_WITH(parse_scenario_config(R"({"trp_list": []})"),
                      Catch::Matchers::ContainsSubstring("unknown key \"trp_list\""));
    CHECK_THROWS_AS(parse_scenario_config(R"({"noise": {"snr": 10}})"), Error);
    CHECK_THROWS_AS(parse_scenario_config(R"({"noise": {"los_probability": {"p": 1}}})"), Error);
    CHECK_THROWS_AS(parse_scenario_config("[1, 2]"), Error);
}

TEST_CASE("scenario - waypoint track at constant speed inside the area")
{
    auto cfg = umi_reference_scenario();
    const Region area{90.0, 80.0, 170.0, 160.0};
    const auto track = generate_random_waypoint_track(cfg, area, 60.0, 0.1);
    REQUIRE(track.samples.size() == 601);
    CHECK(track.path_length() == Catch::Approx(50.0).epsilon(1e-6));
    for (std::size_t i = 1; i < track.samples.size(); ++i)
    {
        const auto &a = track.samples[i - 1];
        const auto &b = track.samples[i];
        REQUIRE(b.t > a.t);
        const double v = (b.position - a.position).norm() / (b.t - a.t);
        REQUIRE(std::abs(v - cfg.ue_speed) <= 0.01 * cfg.ue_speed);
        REQUIRE(b.position.x() >= area.xmin);
        REQUIRE(b.position.x() <= area.xmax);
        REQUIRE(b.position.y() >= area.ymin);
        REQUIRE(b.position.y() <= area.ymax);
        REQUIRE(b.position.z() == cfg.ue_init.z());
    }
}

TEST_CASE("scenario - waypoint track is reproducible and validates input")
{
    auto cfg = umi_reference_scenario();
    const Region area{0.0, 0.0, 200.0, 200.0};
    cfg.ue_speed = 5.0;
    const auto a = generate_random_waypoint_track(cfg, area, 30.0, 0.5);
    const auto b = generate_random_waypoint_track(cfg, area, 30.0, 0.5);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
    {
        REQUIRE(a.samples[i].t == b.samples[i].t);
        REQUIRE(a.samples[i].position == b.samples[i].position);
    }
    cfg.rng_seed = 2;
    const auto c = generate_random_waypoint_track(cfg, area, 30.0, 0.5);
    CHECK(c.samples.back().position != a.samples.back().position);

    CHECK_THROWS_AS(generate_random_waypoint_track(cfg, area, 30.0, 0.0), Error);
    CHECK_THROWS_AS(generate_random_waypoint_track(cfg, area, 0.1, 0.5), Error);
    CHECK_THROWS_WITH(generate_random_waypoint_track(cfg, Region{0, 0, 0, 10}, 30.0, 0.5),
                      ContainsSubstring("degenerate area"));
}

TEST_CASE("scenario - los_visible basic cases")
{
    const Vec3 tx(0, 0, 10), rx(100, 0, 1.5);
    CHECK(los_visible(tx, rx, {}));
    ObstacleMap wall{{{Vec3(40, -10, 0), Vec3(50, 10, 50)}}};
    CHECK_FALSE(los_visible(tx, rx, wall));
    CHECK_FALSE(los_visible(rx, tx, wall));
    ObstacleMap beside{{{Vec3(40, 5, 0), Vec3(50, 10, 50)}}};
    CHECK(los_visible(tx, rx, beside));
    ObstacleMap low{{{Vec3(5, -10, 0), Vec3(10, 10, 1.0)}}};
    CHECK(los_visible(tx, rx, low));
    CHECK_THROWS_AS(los_visible(tx, tx, {}), Error);
}

TEST_CASE("scenario - los_visible matches dense sampling")
{
    Rng rng(11);
    const Region r{0.0, 0.0, 60.0, 60.0};
    int blocked = 0, checked = 0;
    while (checked < 100)
    {
        ObstacleMap map;
        for (int i = 0; i < 4; ++i)
            map.boxes.push_back(test::random_box(rng, r, 15.0, 25.0));
        const Vec3 a(test::uniform(rng, 0, 70), test::uniform(rng, 0, 70), test::uniform(rng, 0.5, 30));
        const Vec3 b(test::uniform(rng, 0, 70), test::uniform(rng, 0, 70), test::uniform(rng, 0.5, 30));
        // Grazing pairs are ambiguous at 1 cm resolution; skip them.
        bool grazing = false;
        for (const auto &box : map.boxes)
        {
            const double len = (b - a).norm();
            double best = 1e9;
            for (int s = 0; s <= 2000; ++s)
                best = std::min(best, box_distance(a + (b - a) * (s / 2000.0), box));
            const bool endpoint_inside = box_distance(a, box) == 0.0 || box_distance(b, box) == 0.0;
            if ((best < 0.05 && best > 0.0) || endpoint_inside || len < 1.0)
                grazing = true;
        }
        if (grazing)
            continue;
        const bool v = los_visible(a, b, map);
        REQUIRE(v == sampled_visible(a, b, map));
        REQUIRE(v == los_visible(b, a, map));
        blocked += v ? 0 : 1;
        ++checked;
    }
    CHECK(blocked > 10);
    CHECK(blocked < 90);
}

TEST_CASE("scenario - coverage on an open field and with one TRP")
{
    const Region r{0.0, 0.0, 100.0, 100.0};
    std::vector<TrpSite> four = {{"a", Vec3(0, 0, 10)}, {"b", Vec3(100, 0, 10)}, {"c", Vec3(0, 100, 10)},
                                 {"d", Vec3(100, 100, 10)}};
    const auto open = coverage_grid({}, four, 5.0, r);
    CHECK(open.nx == 20);
    CHECK(open.ny == 20);
    CHECK(open.fraction_at_least(3) == 1.0);
    const auto one = coverage_grid({}, std::span(four).first(1), 5.0, r);
    CHECK(one.fraction_at_least(3) == 0.0);
    CHECK(one.fraction_at_least(1) == 1.0);
    CHECK_THROWS_AS(coverage_grid({}, four, 0.0, r), Error);
    CHECK_THROWS_AS(coverage_grid({}, four, 5.0, Region{0, 0, 3, 3}), Error);
}

TEST_CASE("scenario - coverage single wall shadow")
{
    const auto g = coverage_grid(test::wall_map(), test::wall_trps(), 5.0, test::wall_region());
    const double analytic = test::wall_covered_fraction(g);
    CHECK(std::abs(g.fraction_at_least(3) - analytic) <= 1.0 / static_cast<double>(g.ny));
    CHECK(g.fraction_at_least(3) < 1.0);
    CHECK(g.fraction_at_least(3) > 0.3);
}

TEST_CASE("scenario - coverage monotone under TRP addition")
{
    Rng rng(21);
    const Region r{0.0, 0.0, 80.0, 80.0};
    for (int trial = 0; trial < 20; ++trial)
    {
        ObstacleMap map;
        for (int i = 0; i < 6; ++i)
            map.boxes.push_back(test::random_box(rng, r, 15.0, 30.0));
        std::vector<TrpSite> trps;
        double prev = -1.0;
        for (int k = 0; k < 5; ++k)
        {
            trps.push_back({"t" + std::to_string(k), Vec3(test::uniform(rng, 0, 80), test::uniform(rng, 0, 80), 35.0)});
            const double f = coverage_grid(map, trps, 8.0, r).fraction_at_least(3);
            REQUIRE(f >= prev);
            prev = f;
        }
    }
}

TEST_CASE("scenario - coverage independent of thread count")
{
    Rng rng(8);
    const Region r{0.0, 0.0, 100.0, 100.0};
    ObstacleMap map;
    for (int i = 0; i < 10; ++i)
        map.boxes.push_back(test::random_box(rng, r, 20.0, 30.0));
    const auto trps = umi_reference_scenario().trp_list;
    const auto a = coverage_grid(map, trps, 5.0, r, 1.5, 1);
    const auto b = coverage_grid(map, trps, 5.0, r, 1.5, 4);
    CHECK(a.counts == b.counts);
}

TEST_CASE("scenario - obstacle map text format")
{
    std::istringstream in("# city\n0 0 0 10 10 20\n\n5 5 0 6 6 3 # kiosk\n");
    const auto map = read_obstacle_map(in);
    REQUIRE(map.boxes.size() == 2);
    CHECK(map.boxes[1].max == Vec3(6, 6, 3));
    std::ostringstream out;
    write_obstacle_map(out, map);
    std::istringstream again(out.str());
    const auto back = read_obstacle_map(again);
    REQUIRE(back.boxes.size() == 2);
    CHECK(back.boxes[0].max == map.boxes[0].max);

    std::istringstream bad("1 2 3\n");
    CHECK_THROWS_AS(read_obstacle_map(bad), Error);
    std::istringstream inverted("10 0 0 0 10 10\n");
    CHECK_THROWS_AS(read_obstacle_map(inverted), Error);
}

TEST_CASE("scenario - coverage csv and cell lookup")
{
    const auto g = coverage_grid({}, umi_reference_scenario().trp_list, 10.0, Region{0, 0, 30, 20});
    CHECK(g.cell_index(0.0, 0.0) == 0);
    CHECK(g.cell_index(25.0, 15.0) == 5);
    CHECK(g.cell_index(-1.0, 5.0) == -1);
    CHECK(g.cell_index(31.0, 5.0) == -1);
    std::ostringstream out;
    write_coverage_csv(out, g);
    CHECK(out.str().rfind("ix,iy,x,y,los_count\n0,0,5.0,5.0,3\n", 0) == 0);
}
