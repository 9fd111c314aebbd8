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

#include "nrpos/scenario.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nrpos
{

namespace
{

bool finite3(const Vec3 &v)
{
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

bool inside(const Region &r, double x, double y)
{
    return x >= r.xmin && x <= r.xmax && y >= r.ymin && y <= r.ymax;
}

} // namespace

void ScenarioConfig::validate() const
{
    if (!(subcarrier_spacing > 0.0) || !(bandwidth > 0.0) || !(carrier_frequency > 0.0))
        throw Error("scenario: frequencies must be positive");
    if (num_subcarriers < 2)
        throw Error("scenario: need at least two subcarriers");
    if (static_cast<double>(num_subcarriers) * subcarrier_spacing > bandwidth * (1.0 + 1e-12))
        throw Error("scenario: num_subcarriers x subcarrier_spacing exceeds bandwidth");
    static constexpr int kCombs[] = {1, 2, 4, 6, 8, 12};
    if (std::find(std::begin(kCombs), std::end(kCombs), comb_size) == std::end(kCombs))
        throw Error("scenario: comb_size must be one of 1, 2, 4, 6, 8, 12");
    if (comb_offset < 0 || comb_offset >= comb_size)
        throw Error("scenario: comb_offset must lie in [0, comb_size)");
    if (symbols_per_frame < 1)
        throw Error("scenario: symbols_per_frame must be positive");
    if (trp_list.empty())
        throw Error("scenario: at least one TRP is required");
    for (const auto &trp : trp_list)
    {
        if (!finite3(trp.position))
            throw Error("scenario: TRP " + trp.id + " has a non-finite position");
        if (trp.position.z() < 0.0)
            throw Error("scenario: TRP " + trp.id + " lies below ground");
    }
    if (!finite3(ue_init))
        throw Error("scenario: non-finite UE position");
    if (!(ue_speed >= 0.0))
        throw Error("scenario: negative UE speed");
    noise.validate();
}

ScenarioConfig umi_reference_scenario()
{
    ScenarioConfig cfg;
    cfg.trp_list = {
        {"TRP-1", Vec3(100.0, 100.0, 10.0)},
        {"TRP-2", Vec3(150.0, 90.0, 10.0)},
        {"TRP-3", Vec3(140.0, 150.0, 10.0)},
    };
    return cfg;
}

void ObstacleMap::validate() const
{
    for (const auto &b : boxes)
    {
        if (!finite3(b.min) || !finite3(b.max))
            throw Error("obstacle map: non-finite box corner");
        if ((b.min.array() > b.max.array()).any())
            throw Error("obstacle map: box min corner exceeds max corner");
    }
}

double WaypointTrack::path_length() const
{
    double len = 0.0;
    for (std::size_t i = 1; i < samples.size(); ++i)
        len += (samples[i].position - samples[i - 1].position).norm();
    return len;
}

WaypointTrack generate_random_waypoint_track(const ScenarioConfig &config, const Region &area,
                                             double duration, double dt)
{
    if (!(area.width() > 0.0) || !(area.height() > 0.0))
        throw Error("degenerate area");
    if (!(dt > 0.0))
        throw Error("waypoint track: dt must be positive");
    if (!(duration >= dt))
        throw Error("waypoint track: duration shorter than one step");
    if (!(config.ue_speed > 0.0))
        throw Error("waypoint track: UE speed must be positive");

    Rng rng(derive_seed(config.rng_seed, 0x7472616bULL));
    std::uniform_real_distribution<double> ux(area.xmin, area.xmax);
    std::uniform_real_distribution<double> uy(area.ymin, area.ymax);

    const double step = config.ue_speed * dt;
    const auto n_steps = static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
    const double z = config.ue_init.z();

    Vec3 pos = config.ue_init;
    if (!inside(area, pos.x(), pos.y()))
        pos = Vec3(ux(rng), uy(rng), z);

    WaypointTrack track;
    track.speed = config.ue_speed;
    track.samples.reserve(n_steps + 1);
    track.samples.push_back({0.0, pos});

    int misses = 0;
    while (track.samples.size() <= n_steps)
    {
        const Vec3 waypoint(ux(rng), uy(rng), z);
        const double dist = (waypoint - pos).norm();
        const auto legs = static_cast<std::size_t>(std::floor(dist / step));
        if (legs == 0)
        {
            if (++misses > 10000)
                throw Error("waypoint track: area too small for the step length");
            continue;
        }
        misses = 0;
        const Vec3 dir = (waypoint - pos) / dist;
        const Vec3 origin = pos;
        for (std::size_t j = 1; j <= legs && track.samples.size() <= n_steps; ++j)
        {
            pos = origin + dir * (step * static_cast<double>(j));
            const double t = dt * static_cast<double>(track.samples.size());
            track.samples.push_back({t, pos});
        }
    }
    return track;
}

bool los_visible(const Vec3 &tx, const Vec3 &rx, const ObstacleMap &map)
{
    if (tx == rx)
        throw Error("los_visible: tx and rx coincide");
    const Vec3 d = rx - tx;
    for (const auto &box : map.boxes)
    {
        // Parameter interval of the segment inside the open box; the segment
        // is blocked when that interval has positive length within (0, 1).
        double t0 = 0.0, t1 = 1.0;
        bool miss = false;
        for (int a = 0; a < 3 && !miss; ++a)
        {
            if (d[a] == 0.0)
            {
                if (!(tx[a] > box.min[a] && tx[a] < box.max[a]))
                    miss = true;
                continue;
            }
            double ta = (box.min[a] - tx[a]) / d[a];
            double tb = (box.max[a] - tx[a]) / d[a];
            if (ta > tb)
                std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 >= t1)
                miss = true;
        }
        if (!miss)
            return false;
    }
    return true;
}

Vec3 CoverageGrid::cell_center(std::size_t ix, std::size_t iy) const
{
    return {region.xmin + (static_cast<double>(ix) + 0.5) * cell,
            region.ymin + (static_cast<double>(iy) + 0.5) * cell, ue_height};
}

double CoverageGrid::fraction_at_least(int min_count) const
{
    if (counts.empty())
        return 0.0;
    const auto hits = std::count_if(counts.begin(), counts.end(), [&](int c) { return c >= min_count; });
    return static_cast<double>(hits) / static_cast<double>(counts.size());
}

long CoverageGrid::cell_index(double x, double y) const
{
    const double fx = std::floor((x - region.xmin) / cell);
    const double fy = std::floor((y - region.ymin) / cell);
    if (fx < 0 || fy < 0 || fx >= static_cast<double>(nx) || fy >= static_cast<double>(ny))
        return -1;
    return static_cast<long>(fy) * static_cast<long>(nx) + static_cast<long>(fx);
}

CoverageGrid coverage_grid(const ObstacleMap &map, std::span<const TrpSite> trps, double cell,
                           const Region &region, double ue_height, unsigned jobs)
{
    if (!(cell > 0.0))
        throw Error("coverage grid: cell size must be positive");
    map.validate();
    CoverageGrid grid;
    grid.region = region;
    grid.cell = cell;
    grid.ue_height = ue_height;
    const double fx = region.width() / cell;
    const double fy = region.height() / cell;
    if (!(fx >= 1.0 - 1e-9) || !(fy >= 1.0 - 1e-9))
        throw Error("coverage grid: region smaller than one cell");
    grid.nx = static_cast<std::size_t>(std::floor(fx + 1e-9));
    grid.ny = static_cast<std::size_t>(std::floor(fy + 1e-9));
    grid.counts.assign(grid.nx * grid.ny, 0);

    parallel_for(grid.ny, jobs, [&](std::size_t iy) {
        for (std::size_t ix = 0; ix < grid.nx; ++ix)
        {
            const Vec3 c = grid.cell_center(ix, iy);
            int n = 0;
            for (const auto &trp : trps)
                if (trp.position != c && los_visible(trp.position, c, map))
                    ++n;
            grid.counts[iy * grid.nx + ix] = n;
        }
    });
    return grid;
}

ObstacleMap read_obstacle_map(std::istream &in)
{
    ObstacleMap map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ss(line);
        double v[6];
        int got = 0;
        while (got < 6 && ss >> v[got])
            ++got;
        if (got == 0 && ss.eof())
            continue;
        std::string rest;
        if (got != 6 || (ss >> rest))
            throw Error("obstacle map: malformed line " + std::to_string(lineno));
        map.boxes.push_back({Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])});
    }
    map.validate();
    return map;
}

ObstacleMap load_obstacle_map(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open obstacle map " + path.string());
    return read_obstacle_map(in);
}

void write_obstacle_map(std::ostream &out, const ObstacleMap &map)
{
    for (const auto &b : map.boxes)
    {
        out << format_double(b.min.x()) << ' ' << format_double(b.min.y()) << ' ' << format_double(b.min.z())
            << ' ' << format_double(b.max.x()) << ' ' << format_double(b.max.y()) << ' '
            << format_double(b.max.z()) << '\n';
    }
}

namespace
{

using nlohmann::json;

Vec3 vec3_from(const json &j)
{
    if (!j.is_array() || j.size() != 3)
        throw Error("scenario: expected a 3-element coordinate array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

double number_or_inf(const json &j)
{
    if (j.is_string())
    {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        throw Error("scenario: expected a number, got \"" + s + "\"");
    }
    return j.get<double>();
}

template <typename T>
void read_key(const json &j, const char *key, T &out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

void reject_unknown_keys(const json &j, std::initializer_list<const char *> known, const std::string &where)
{
    if (!j.is_object())
        throw Error("scenario: " + where + " must be an object");
    for (const auto &item : j.items())
        if (std::none_of(known.begin(), known.end(), [&](const char *k) { return item.key() == k; }))
            throw Error("scenario: unknown key \"" + item.key() + "\" in " + where);
}

} // namespace

ScenarioConfig parse_scenario_config(const std::string &text)
{
    ScenarioConfig cfg = umi_reference_scenario();
    json j;
    try
    {
        j = json::parse(text, nullptr, true, true);
        reject_unknown_keys(j,
                            {"carrier_frequency", "bandwidth", "subcarrier_spacing", "num_subcarriers", "comb_size",
                             "comb_offset", "symbols_per_frame", "ue_speed", "rng_seed", "ue_init", "trps", "noise"},
                            "config");
        read_key(j, "carrier_frequency", cfg.carrier_frequency);
        read_key(j, "bandwidth", cfg.bandwidth);
        read_key(j, "subcarrier_spacing", cfg.subcarrier_spacing);
        read_key(j, "num_subcarriers", cfg.num_subcarriers);
        read_key(j, "comb_size", cfg.comb_size);
        read_key(j, "comb_offset", cfg.comb_offset);
        read_key(j, "symbols_per_frame", cfg.symbols_per_frame);
        read_key(j, "ue_speed", cfg.ue_speed);
        read_key(j, "rng_seed", cfg.rng_seed);
        if (j.contains("ue_init"))
            cfg.ue_init = vec3_from(j["ue_init"]);
        if (j.contains("trps"))
        {
            cfg.trp_list.clear();
            for (const auto &t : j["trps"])
                cfg.trp_list.push_back({t.at("id").get<std::string>(), vec3_from(t.at("position"))});
        }
        cfg.noise.carrier_frequency = cfg.carrier_frequency;
        if (j.contains("noise"))
        {
            const auto &n = j["noise"];
            reject_unknown_keys(n,
                                {"snr_db", "phase_noise_std", "phase_noise_std_deg", "nlos_excess_delay_scale",
                                 "nlos_tap_count", "los_k_factor_db", "los_scatter_taps", "los_scatter_delay_scale",
                                 "los_probability"},
                                "noise");
            if (n.contains("snr_db"))
                cfg.noise.snr_db = number_or_inf(n["snr_db"]);
            read_key(n, "phase_noise_std", cfg.noise.phase_noise_std);
            if (n.contains("phase_noise_std_deg"))
                cfg.noise.phase_noise_std = n["phase_noise_std_deg"].get<double>() * kPi / 180.0;
            read_key(n, "nlos_excess_delay_scale", cfg.noise.nlos_excess_delay_scale);
            read_key(n, "nlos_tap_count", cfg.noise.nlos_tap_count);
            read_key(n, "los_k_factor_db", cfg.noise.los_k_factor_db);
            read_key(n, "los_scatter_taps", cfg.noise.los_scatter_taps);
            read_key(n, "los_scatter_delay_scale", cfg.noise.los_scatter_delay_scale);
            if (n.contains("los_probability"))
            {
                const auto &lp = n["los_probability"];
                reject_unknown_keys(lp, {"kind", "breakpoint_m", "decay_m", "probability"}, "los_probability");
                auto &m = cfg.noise.los_probability;
                if (lp.contains("kind"))
                {
                    const auto kind = lp["kind"].get<std::string>();
                    if (kind == "umi")
                        m.kind = LosProbabilityModel::Kind::umi;
                    else if (kind == "constant")
                        m.kind = LosProbabilityModel::Kind::constant;
                    else
                        throw Error("scenario: unknown los_probability kind \"" + kind + "\"");
                }
                read_key(lp, "breakpoint_m", m.breakpoint_m);
                read_key(lp, "decay_m", m.decay_m);
                read_key(lp, "probability", m.probability);
            }
        }
    }
    catch (const json::exception &e)
    {
        throw Error(std::string("scenario: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open scenario config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_config(ss.str());
}

std::string scenario_config_to_json(const ScenarioConfig &c)
{
    json j;
    j["carrier_frequency"] = c.carrier_frequency;
    j["bandwidth"] = c.bandwidth;
    j["subcarrier_spacing"] = c.subcarrier_spacing;
    j["num_subcarriers"] = c.num_subcarriers;
    j["comb_size"] = c.comb_size;
    j["comb_offset"] = c.comb_offset;
    j["symbols_per_frame"] = c.symbols_per_frame;
    j["ue_speed"] = c.ue_speed;
    j["rng_seed"] = c.rng_seed;
    j["ue_init"] = {c.ue_init.x(), c.ue_init.y(), c.ue_init.z()};
    j["trps"] = json::array();
    for (const auto &t : c.trp_list)
        j["trps"].push_back({{"id", t.id}, {"position", {t.position.x(), t.position.y(), t.position.z()}}});
    json n;
    if (std::isinf(c.noise.snr_db))
        n["snr_db"] = c.noise.snr_db > 0 ? "inf" : "-inf";
    else
        n["snr_db"] = c.noise.snr_db;
    n["phase_noise_std"] = c.noise.phase_noise_std;
    n["nlos_excess_delay_scale"] = c.noise.nlos_excess_delay_scale;
    n["nlos_tap_count"] = c.noise.nlos_tap_count;
    n["los_k_factor_db"] = c.noise.los_k_factor_db;
    n["los_scatter_taps"] = c.noise.los_scatter_taps;
    n["los_scatter_delay_scale"] = c.noise.los_scatter_delay_scale;
    const auto &m = c.noise.los_probability;
    n["los_probability"] = {{"kind", m.kind == LosProbabilityModel::Kind::umi ? "umi" : "constant"},
                            {"breakpoint_m", m.breakpoint_m},
                            {"decay_m", m.decay_m},
                            {"probability", m.probability}};
    j["noise"] = n;
    return j.dump(2);
}

void write_coverage_csv(std::ostream &out, const CoverageGrid &grid)
{
    out << "ix,iy,x,y,los_count\n";
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix)
        {
            const Vec3 c = grid.cell_center(ix, iy);
            out << ix << ',' << iy << ',' << format_double(c.x()) << ',' << format_double(c.y()) << ','
                << grid.count(ix, iy) << '\n';
        }
}

} // namespace nrpos
