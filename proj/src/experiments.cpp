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

#include "nrpos/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace nrpos
{

namespace
{

// Upper bound on any link length in the studies; the coarse cascade level
// must stay unambiguous over it.
constexpr double kMaxLinkDistance = 300.0;

Vec3 uniform_in(const Region &r, double z, Rng &rng)
{
    std::uniform_real_distribution<double> ux(r.xmin, r.xmax), uy(r.ymin, r.ymax);
    const double x = ux(rng);
    const double y = uy(rng);
    return {x, y, z};
}

LocalizeConfig localize_config(const ScenarioConfig &config, double prior_height)
{
    LocalizeConfig lc;
    lc.k_schedule = default_k_schedule(config.num_subcarriers, config.comb_size);
    lc.max_distance = kMaxLinkDistance;
    lc.prior_height = prior_height;
    return lc;
}

} // namespace

SimulatedLink simulate_link(const ScenarioConfig &config, const TrpSite &trp, const Vec3 &ue,
                            std::optional<LinkState> force_state, int symbols, Rng &rng)
{
    if (symbols < 1)
        throw Error("simulate_link: need at least one symbol");
    SimulatedLink link;
    const auto reference = generate_reference_frame(config, rng());
    link.channel = draw_channel(trp.position, ue, config.noise, force_state, rng);
    link.true_distance = (trp.position - ue).norm();
    link.observation.trp_id = trp.id;
    link.observation.true_state = link.channel.is_los ? LinkState::los : LinkState::nlos;
    link.observation.symbols.reserve(static_cast<std::size_t>(symbols));
    for (int s = 0; s < symbols; ++s)
        link.observation.symbols.push_back(
            correct_phase_offsets(apply_channel(reference, link.channel, config.noise, rng), reference));
    link.label = label_link(link.channel, compute_pdp(link.observation.symbols.front()));
    return link;
}

std::string config_fingerprint(const ScenarioConfig &config)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(scenario_config_to_json(config))));
    return buf;
}

void write_manifest(std::ostream &out, const StudyManifest &m)
{
    out << "study " << m.study << '\n';
    out << "seed " << m.seed << '\n';
    out << "config_hash " << m.config_hash << '\n';
#ifdef NRPOS_BUILD_ID
    out << "version " << NRPOS_BUILD_ID << '\n';
#endif
    for (const auto &[k, v] : m.parameters)
        out << k << ' ' << v << '\n';
    for (const auto &o : m.outputs)
        out << "output " << o << '\n';
}

// --- UMi ranging ----------------------------------------------------------

UmiRangingReport run_umi_ranging(const ScenarioConfig &config, std::size_t iterations, unsigned jobs,
                                 double bin_width)
{
    config.validate();
    if (!(bin_width > 0.0))
        throw Error("histogram bin width must be positive");
    const auto schedule = default_k_schedule(config.num_subcarriers, config.comb_size);
    const std::size_t n_trp = config.trp_list.size();

    UmiRangingReport report;
    report.iterations = iterations;
    report.samples.resize(iterations * n_trp);
    parallel_for(iterations, jobs, [&](std::size_t it) {
        Rng rng(derive_seed(config.rng_seed, it));
        for (std::size_t j = 0; j < n_trp; ++j)
        {
            const auto &trp = config.trp_list[j];
            const auto link = simulate_link(config, trp, config.ue_init, std::nullopt, config.symbols_per_frame, rng);
            std::vector<double> d;
            for (const auto &sym : link.observation.symbols)
                d.push_back(range_cascade(sym, schedule, kMaxLinkDistance).estimate.distance);
            auto &s = report.samples[it * n_trp + j];
            s.iteration = it;
            s.trp_id = trp.id;
            s.true_distance = link.true_distance;
            s.estimate = median(d);
            s.los = link.channel.is_los;
        }
    });

    std::size_t accurate = 0, los = 0;
    for (const auto &s : report.samples)
    {
        accurate += std::abs(s.error()) <= report.high_accuracy_threshold;
        los += s.los;
    }
    if (!report.samples.empty())
    {
        report.high_accuracy_fraction = static_cast<double>(accurate) / static_cast<double>(report.samples.size());
        report.los_fraction = static_cast<double>(los) / static_cast<double>(report.samples.size());
    }

    for (std::size_t j = 0; j < n_trp; ++j)
    {
        TrpRangeSummary t;
        t.trp_id = config.trp_list[j].id;
        t.true_distance = (config.trp_list[j].position - config.ue_init).norm();
        t.bin_width = bin_width;
        std::map<long, std::vector<double>> bins;
        for (std::size_t it = 0; it < iterations; ++it)
        {
            const double d = report.samples[it * n_trp + j].estimate;
            bins[static_cast<long>(std::floor(d / bin_width))].push_back(d);
        }
        std::size_t best = 0;
        for (const auto &[b, v] : bins)
        {
            t.histogram.emplace_back((static_cast<double>(b) + 0.5) * bin_width, static_cast<long>(v.size()));
            if (v.size() > best)
            {
                best = v.size();
                double sum = 0.0;
                for (double d : v)
                    sum += d;
                t.peak = sum / static_cast<double>(v.size());
            }
        }
        report.trps.push_back(std::move(t));
    }
    return report;
}

void write_ranging_csv(std::ostream &out, const UmiRangingReport &report)
{
    out << "iteration,trp_id,los,true_m,estimate_m,error_m\n";
    for (const auto &s : report.samples)
        out << s.iteration << ',' << s.trp_id << ',' << (s.los ? 1 : 0) << ',' << format_double(s.true_distance) << ','
            << format_double(s.estimate) << ',' << format_double(s.error()) << '\n';
}

void write_histogram_csv(std::ostream &out, const UmiRangingReport &report)
{
    out << "trp_id,bin_center_m,count\n";
    for (const auto &t : report.trps)
        for (const auto &[c, n] : t.histogram)
            out << t.trp_id << ',' << format_double(c) << ',' << n << '\n';
}

// --- NLOS exclusion -------------------------------------------------------

std::vector<TrpSite> exclusion_deployment()
{
    return {
        {"TRP-1", Vec3(100.0, 100.0, 10.0)}, {"TRP-2", Vec3(150.0, 90.0, 10.0)},
        {"TRP-3", Vec3(140.0, 150.0, 10.0)}, {"TRP-4", Vec3(85.0, 160.0, 10.0)},
        {"TRP-5", Vec3(185.0, 130.0, 10.0)}, {"TRP-6", Vec3(115.0, 60.0, 10.0)},
    };
}

ExclusionReport run_exclusion_study(const ScenarioConfig &config, const ExclusionConfig &study, unsigned jobs)
{
    config.validate();
    if (study.model && study.model->shape.input_length != config.num_subcarriers)
        throw Error("exclusion study: classifier input length does not match the numerology");
    const double z = config.ue_init.z();
    const LocalizeConfig gated = localize_config(config, z);
    LocalizeConfig ungated = gated;
    ungated.trilateration.residual_gate = std::numeric_limits<double>::infinity();
    ungated.trilateration.max_offset = std::numeric_limits<double>::infinity();

    ExclusionReport report;
    report.los_only.name = "los_only";
    report.mixed.name = "mixed";
    report.oracle.name = "oracle";
    if (study.model)
        report.dl = ExclusionBlock{"dl", {}, std::nullopt};
    const std::size_t n = study.epochs;
    report.truth.resize(n);
    report.los_only.fixes.resize(n);
    report.mixed.fixes.resize(n);
    report.oracle.fixes.resize(n);
    if (report.dl)
        report.dl->fixes.resize(n);

    parallel_for(n, jobs, [&](std::size_t e) {
        Rng rng(derive_seed(config.rng_seed, e));
        const Vec3 ue = uniform_in(study.ue_region, z, rng);
        report.truth[e] = ue;
        std::vector<LinkObservation> links, los_links;
        for (const auto &trp : config.trp_list)
        {
            auto link = simulate_link(config, trp, ue, std::nullopt, study.symbols, rng);
            if (link.observation.true_state == LinkState::los)
                los_links.push_back(link.observation);
            links.push_back(std::move(link.observation));
        }
        const double t = static_cast<double>(e);
        auto run = [&](std::span<const LinkObservation> l, const LinkFilter &f, const LocalizeConfig &c) {
            auto fix = localize_epoch(l, config.trp_list, f, c);
            fix.t = t;
            return fix;
        };
        report.los_only.fixes[e] = run(los_links, {}, gated);
        report.mixed.fixes[e] = run(links, {}, ungated);
        report.oracle.fixes[e] = run(links, {LinkFilter::Kind::oracle, nullptr, 0.5}, gated);
        if (report.dl)
            report.dl->fixes[e] =
                run(links, {LinkFilter::Kind::classifier, study.model, study.classifier_threshold}, gated);
    });

    auto finish = [&](ExclusionBlock &b) {
        const bool any = std::any_of(b.fixes.begin(), b.fixes.end(), [](const PositionFix &f) { return f.valid; });
        if (any)
            b.stats = error_statistics(b.fixes, report.truth);
    };
    finish(report.los_only);
    finish(report.mixed);
    finish(report.oracle);
    if (report.dl)
        finish(*report.dl);
    return report;
}

void write_exclusion_table(std::ostream &out, const ExclusionReport &report)
{
    out << "block,valid,total,p70_2d_m,p80_2d_m,p90_2d_m,p70_3d_m,p80_3d_m,p90_3d_m\n";
    auto row = [&](const ExclusionBlock &b) {
        std::size_t valid = 0;
        for (const auto &f : b.fixes)
            valid += f.valid;
        out << b.name << ',' << valid << ',' << b.fixes.size();
        for (int d = 0; d < 2; ++d)
            for (std::size_t l = 0; l < 3; ++l)
                out << ',' << (b.stats ? format_double(d == 0 ? b.stats->p2d[l] : b.stats->p3d[l]) : "nan");
        out << '\n';
    };
    row(report.los_only);
    row(report.mixed);
    row(report.oracle);
    if (report.dl)
        row(*report.dl);
}

// --- classifier -----------------------------------------------------------

ScenarioConfig classifier_numerology(ScenarioConfig base)
{
    base.subcarrier_spacing = 120e3;
    base.num_subcarriers = 816;
    base.comb_size = 6;
    base.comb_offset = 0;
    base.bandwidth = 100e6;
    return base;
}

std::vector<DatasetRow> generate_dataset(const ScenarioConfig &config, const DatasetConfig &dataset, unsigned jobs)
{
    config.validate();
    if (!(dataset.nlos_fraction >= 0.0 && dataset.nlos_fraction <= 1.0))
        throw Error("dataset: NLOS fraction outside [0, 1]");
    std::vector<DatasetRow> rows(dataset.samples);
    parallel_for(dataset.samples, jobs, [&](std::size_t i) {
        Rng rng(derive_seed(config.rng_seed, 0x64617461ULL + i));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, config.trp_list.size() - 1);
        const Vec3 ue = uniform_in(dataset.ue_region, config.ue_init.z(), rng);
        const auto &trp = config.trp_list[pick(rng)];
        const LinkState force = u(rng) < dataset.nlos_fraction ? LinkState::nlos : LinkState::los;
        const auto link = simulate_link(config, trp, ue, force, 1, rng);
        rows[i].label = link.label.state;
        rows[i].tau_diff_ns = link.label.tau_diff * 1e9;
        rows[i].magnitudes = link_features(link.observation);
    });
    return rows;
}

ClassifierStudy run_classifier_study(const std::vector<DatasetRow> &rows, const ModelShape &shape,
                                     const TrainConfig &train_config, const SplitFractions &fractions)
{
    const auto samples = to_samples(rows);
    ClassifierStudy study;
    study.split = split_dataset(samples.size(), fractions, derive_seed(train_config.seed, 2));
    ModelShape s = shape;
    if (!samples.empty())
        s.input_length = samples.front().sequence.size();
    const auto t0 = std::chrono::steady_clock::now();
    study.training = train(samples, study.split, s, train_config);
    study.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<const LabeledSample *> test;
    for (std::size_t i : study.split.test)
        test.push_back(&samples[i]);
    if (!test.empty())
        study.test_metrics = evaluate(study.training.params, test);
    return study;
}

// --- fusion ---------------------------------------------------------------

SyntheticDrive synthetic_drive(const FusionStudyConfig &study, const Vec3 &start, std::uint64_t seed,
                               const Vec3 &gravity)
{
    if (!(study.imu_rate > 0.0) || !(study.duration > 0.0) || !(study.speed > 0.0))
        throw Error("synthetic drive: rate, duration and speed must be positive");
    Rng rng(seed);
    const double dt = 1.0 / study.imu_rate;
    const auto n = static_cast<std::size_t>(std::llround(study.duration * study.imu_rate));
    std::uniform_real_distribution<double> uh(-kPi, kPi);
    auto waypoint = [&]() { return uniform_in(study.region, start.z(), rng); };

    double yaw = uh(rng);
    NavState s;
    s.p = start;
    s.v = study.speed * Vec3(std::cos(yaw), std::sin(yaw), 0.0);
    s.q = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
    Vec3 target = waypoint();

    SyntheticDrive drive;
    drive.truth.samples.reserve(n + 1);
    drive.imu.reserve(n + 1);
    ErrorBelief scratch;
    for (std::size_t k = 0; k <= n; ++k)
    {
        const double t = static_cast<double>(k) * dt;
        drive.truth.samples.push_back({t, s.p, s.q});
        drive.states.push_back(s);
        if ((target - s.p).head<2>().norm() < 10.0)
            target = waypoint();
        const double bearing = std::atan2(target.y() - s.p.y(), target.x() - s.p.x());
        const double rate = std::clamp(1.5 * wrap_phase(bearing - yaw), -0.6, 0.6);
        const double next_yaw = yaw + rate * dt;
        const Vec3 v_next = study.speed * Vec3(std::cos(next_yaw), std::sin(next_yaw), 0.0);
        ImuSample imu;
        imu.t = t;
        imu.f = s.q.toRotationMatrix().transpose() * ((v_next - s.v) / dt - gravity);
        imu.omega = Vec3(0.0, 0.0, rate);
        drive.imu.push_back(imu);
        if (k < n)
        {
            predict(s, scratch, imu, dt, ImuNoise{0.0, 0.0}, gravity);
            yaw = next_yaw;
        }
    }
    return drive;
}

namespace
{

int los_count(const Vec3 &ue, std::span<const TrpSite> sites, const ObstacleMap &map)
{
    int c = 0;
    for (const auto &s : sites)
        c += los_visible(s.position, ue, map);
    return c;
}

bool box_contains_xy(const Box &b, const Vec3 &p, double margin)
{
    return p.x() >= b.min.x() - margin && p.x() <= b.max.x() + margin && p.y() >= b.min.y() - margin &&
           p.y() <= b.max.y() + margin;
}

/// Adds seeded random boxes that keep clear of the drive until the share of
/// CPP epochs with three or more LOS sites drops to the target.
ObstacleMap calibrate_obstacles(const FusionStudyConfig &study, const TrajectoryRecord &truth,
                                const std::vector<Vec3> &epochs, std::span<const TrpSite> sites, std::uint64_t seed)
{
    ObstacleMap map;
    Rng rng(seed);
    std::uniform_real_distribution<double> size(6.0, 18.0), height(15.0, 30.0);
    auto coverage = [&]() {
        std::size_t ok = 0;
        for (const auto &p : epochs)
            ok += los_count(p, sites, map) >= 3;
        return static_cast<double>(ok) / static_cast<double>(epochs.size());
    };
    int attempts = 0;
    while (map.boxes.size() < study.max_obstacles && attempts < 20000 && coverage() > study.target_cpp_availability)
    {
        ++attempts;
        const Vec3 c = uniform_in(study.region, 0.0, rng);
        const double wx = size(rng), wy = size(rng);
        const double h = height(rng);
        Box b{Vec3(c.x() - wx / 2, c.y() - wy / 2, 0.0), Vec3(c.x() + wx / 2, c.y() + wy / 2, h)};
        bool clear = true;
        for (const auto &s : truth.samples)
            if (box_contains_xy(b, s.position, 2.0))
            {
                clear = false;
                break;
            }
        for (const auto &s : sites)
            clear = clear && !box_contains_xy(b, s.position, 2.0);
        if (clear)
            map.boxes.push_back(b);
    }
    return map;
}

} // namespace

FusionStudyReport run_fusion_study(const ScenarioConfig &config, const FusionStudyConfig &study)
{
    config.validate();
    if (!(study.vo_rate > 0.0) || !(study.cpp_rate > 0.0) || study.vo_rate > study.imu_rate ||
        study.cpp_rate > study.imu_rate)
        throw Error("fusion study: measurement rates must be positive and no faster than the IMU");
    const std::uint64_t seed = config.rng_seed;
    FusionStudyReport report;
    const Vec3 start((study.region.xmin + study.region.xmax) / 2, (study.region.ymin + study.region.ymax) / 2,
                     config.ue_init.z());
    const FilterConfig fc{study.imu_noise, Vec3(0.0, 0.0, -9.81), false};
    auto drive = synthetic_drive(study, start, derive_seed(seed, 1), fc.gravity);
    report.truth = drive.truth;

    Rng imu_rng(derive_seed(seed, 2));
    std::normal_distribution<double> nd(0.0, 1.0);
    report.imu = drive.imu;
    for (auto &s : report.imu)
    {
        for (int a = 0; a < 3; ++a)
            s.f[a] += study.imu_noise.sigma_acc * nd(imu_rng);
        for (int a = 0; a < 3; ++a)
            s.omega[a] += study.imu_noise.sigma_gyr * nd(imu_rng);
    }

    const auto vo_step = static_cast<std::size_t>(std::llround(study.imu_rate / study.vo_rate));
    TrajectoryRecord vo_truth;
    for (std::size_t k = 0; k < drive.truth.samples.size(); k += vo_step)
        vo_truth.samples.push_back(drive.truth.samples[k]);
    Rng vo_rng(derive_seed(seed, 3));
    report.vo = synth_vo_stream(vo_truth, study.vo_drift_per_m, study.vo_noise, study.vo_drift_direction, vo_rng);
    const double vo_var = std::max(study.vo_reported_std * study.vo_reported_std, 1e-6);
    for (std::size_t i = 0; i < report.vo.size(); ++i)
    {
        report.vo[i].R = vo_var * Mat3::Identity();
        report.vo_only.samples.push_back({report.vo[i].t, report.vo[i].y, vo_truth.samples[i].attitude});
    }

    const auto sites = exclusion_deployment();
    const auto cpp_step = static_cast<std::size_t>(std::llround(study.imu_rate / study.cpp_rate));
    std::vector<std::size_t> cpp_index;
    std::vector<Vec3> cpp_points;
    for (std::size_t k = cpp_step; k < drive.truth.samples.size(); k += cpp_step)
    {
        cpp_index.push_back(k);
        cpp_points.push_back(drive.truth.samples[k].position);
    }
    if (study.use_obstacles && !cpp_points.empty())
        report.obstacles = calibrate_obstacles(study, drive.truth, cpp_points, sites, derive_seed(seed, 4));

    ScenarioConfig link_config = config;
    link_config.trp_list = sites;
    const LocalizeConfig lc = localize_config(link_config, config.ue_init.z());
    const double cpp_var = std::max(study.cpp_reported_std * study.cpp_reported_std, 1e-6);
    std::size_t valid = 0;
    for (std::size_t e = 0; e < cpp_index.size(); ++e)
    {
        Rng rng(derive_seed(seed, 0x1000 + e));
        const Vec3 &ue = cpp_points[e];
        std::vector<LinkObservation> links;
        for (const auto &s : sites)
        {
            const auto state = los_visible(s.position, ue, report.obstacles) ? LinkState::los : LinkState::nlos;
            links.push_back(simulate_link(link_config, s, ue, state, 1, rng).observation);
        }
        const auto fix = localize_epoch(links, sites, {LinkFilter::Kind::oracle, nullptr, 0.5}, lc);
        if (!fix.valid)
            continue;
        ++valid;
        PositionMeasurement m;
        m.t = drive.truth.samples[cpp_index[e]].t;
        m.y = fix.position;
        m.R = cpp_var * Mat3::Identity();
        m.source = MeasurementSource::cpp;
        report.cpp.push_back(m);
    }
    report.cpp_epochs = cpp_index.size();
    report.cpp_availability =
        cpp_index.empty() ? 0.0 : static_cast<double>(valid) / static_cast<double>(cpp_index.size());

    Mat9 P0 = Mat9::Zero();
    P0.block<3, 3>(0, 0) = 0.01 * Mat3::Identity();
    P0.block<3, 3>(3, 3) = 0.01 * Mat3::Identity();
    P0.block<3, 3>(6, 6) = 1e-4 * Mat3::Identity();
    const NavState init = drive.states.front();
    report.imu_vo = run_filter(report.imu, report.vo, init, P0, fc).trajectory;
    std::vector<PositionMeasurement> merged = report.cpp;
    merged.insert(merged.end(), report.vo.begin(), report.vo.end());
    std::stable_sort(merged.begin(), merged.end(),
                     [](const PositionMeasurement &a, const PositionMeasurement &b) { return a.t < b.t; });
    report.cpp_imu_vo = run_filter(report.imu, merged, init, P0, fc).trajectory;

    auto add = [&](const std::string &name, const TrajectoryRecord &est) {
        report.metrics.emplace_back("ate_" + name + "_m", ate(est, report.truth));
        const auto r = rpe(est, report.truth, 1);
        report.metrics.emplace_back("rpe_trans_" + name + "_m", r.trans_m);
        report.metrics.emplace_back("rpe_rot_" + name + "_deg", r.rot_deg);
    };
    add("vo", report.vo_only);
    add("imu_vo", report.imu_vo);
    add("cpp_imu_vo", report.cpp_imu_vo);
    report.metrics.emplace_back("cpp_availability", report.cpp_availability);
    report.metrics.emplace_back("cpp_epochs", static_cast<double>(report.cpp_epochs));
    report.metrics.emplace_back("obstacles", static_cast<double>(report.obstacles.boxes.size()));
    return report;
}

} // namespace nrpos
