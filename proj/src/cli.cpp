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

#include "nrpos/cli.hpp"

#include "nrpos/experiments.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace nrpos
{

const char *build_id()
{
    return NRPOS_BUILD_ID;
}

namespace
{

namespace fs = std::filesystem;

struct Globals
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format = "kv";
    unsigned jobs = 1;
    bool verbose = false;
};

void add_globals(CLI::App *app, Globals &g)
{
    app->add_option("--config", g.config, "scenario JSON file")->check(CLI::ExistingFile);
    app->add_option("--seed", g.seed, "master RNG seed");
    app->add_option("--out", g.out_dir, "output directory");
    app->add_option("--format", g.format, "summary format")->check(CLI::IsMember({"csv", "kv"}));
    app->add_option("--jobs", g.jobs, "worker threads")->check(CLI::Range(1u, 1024u));
    app->add_flag("--verbose", g.verbose, "human-readable progress on stderr");
}

ScenarioConfig load_config(const Globals &g)
{
    ScenarioConfig cfg = g.config.empty() ? umi_reference_scenario() : load_scenario_config(g.config);
    if (g.seed)
        cfg.rng_seed = *g.seed;
    cfg.validate();
    return cfg;
}

/// File under --out, or standard output when --out is absent.
class Sink
{
  public:
    Sink(const Globals &g, const std::string &name, std::ostream &fallback, std::vector<std::string> *written)
    {
        if (g.out_dir.empty())
        {
            stream_ = &fallback;
            return;
        }
        fs::create_directories(g.out_dir);
        const fs::path p = fs::path(g.out_dir) / name;
        file_ = std::make_unique<std::ofstream>(p);
        if (!*file_)
            throw Error("cannot open " + p.string() + " for writing");
        stream_ = file_.get();
        if (written)
            written->push_back(p.string());
    }
    std::ostream &operator*() { return *stream_; }

  private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream *stream_ = nullptr;
};

void summary(std::ostream &out, const Globals &g, const MetricsReport &m)
{
    if (g.format == "csv")
        write_metrics_csv(out, m);
    else
        write_metrics_kv(out, m);
}

std::ifstream open_input(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open " + path);
    return in;
}

Region parse_region(const std::string &text)
{
    Region r;
    char c1, c2, c3;
    std::istringstream ss(text);
    if (!(ss >> r.xmin >> c1 >> r.ymin >> c2 >> r.xmax >> c3 >> r.ymax) || c1 != ',' || c2 != ',' || c3 != ',')
        throw Error("region must be xmin,ymin,xmax,ymax");
    return r;
}

Region default_region(const ScenarioConfig &cfg)
{
    Region r{1e300, 1e300, -1e300, -1e300};
    for (const auto &t : cfg.trp_list)
    {
        r.xmin = std::min(r.xmin, t.position.x() - 50.0);
        r.ymin = std::min(r.ymin, t.position.y() - 50.0);
        r.xmax = std::max(r.xmax, t.position.x() + 50.0);
        r.ymax = std::max(r.ymax, t.position.y() + 50.0);
    }
    return r;
}

void write_manifest_file(const Globals &g, const ScenarioConfig &cfg, const std::string &study,
                         std::vector<std::pair<std::string, std::string>> params, std::vector<std::string> outputs)
{
    if (g.out_dir.empty())
        return;
    const fs::path p = fs::path(g.out_dir) / "manifest.txt";
    std::ofstream out(p);
    if (!out)
        throw Error("cannot open " + p.string() + " for writing");
    write_manifest(out, {study, cfg.rng_seed, config_fingerprint(cfg), std::move(params), std::move(outputs)});
}

} // namespace

int dispatch(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    CLI::App app{"nrpos: carrier-phase positioning toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(NRPOS_BUILD_ID));
    Globals g;
    std::function<int()> action;

    // coverage
    auto *cov = app.add_subcommand("coverage", "LOS-count grid for an obstacle map");
    add_globals(cov, g);
    std::string map_path, region_text;
    double cell = 5.0;
    cov->add_option("--map", map_path, "obstacle map file")->check(CLI::ExistingFile);
    cov->add_option("--cell", cell, "grid cell size in metres");
    cov->add_option("--region", region_text, "xmin,ymin,xmax,ymax");
    cov->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const ObstacleMap map = map_path.empty() ? ObstacleMap{} : load_obstacle_map(map_path);
            const Region region = region_text.empty() ? default_region(cfg) : parse_region(region_text);
            const auto grid = coverage_grid(map, cfg.trp_list, cell, region, cfg.ue_init.z(), g.jobs);
            Sink s(g, "coverage.csv", out, nullptr);
            write_coverage_csv(*s, grid);
            if (!g.out_dir.empty())
                summary(out, g, {{"cells", static_cast<double>(grid.counts.size())},
                                 {"fraction_ge3", grid.fraction_at_least(3)}});
            return 0;
        };
    });

    // simulate
    auto *sim = app.add_subcommand("simulate", "labelled LOS/NLOS dataset");
    add_globals(sim, g);
    std::size_t samples = 1000;
    double nlos_fraction = 0.5;
    bool reduced = false;
    sim->add_option("--samples", samples, "number of frames");
    sim->add_option("--nlos-fraction", nlos_fraction, "share of channel draws forced NLOS");
    sim->add_flag("--reduced-numerology", reduced, "120 kHz / 816-subcarrier grid");
    sim->callback([&] {
        action = [&] {
            auto cfg = load_config(g);
            if (reduced)
                cfg = classifier_numerology(cfg);
            DatasetConfig dc;
            dc.samples = samples;
            dc.nlos_fraction = nlos_fraction;
            const auto rows = generate_dataset(cfg, dc, g.jobs);
            Sink s(g, "dataset.csv", out, nullptr);
            write_dataset_csv(*s, rows);
            return 0;
        };
    });

    // range
    auto *rng_cmd = app.add_subcommand("range", "Monte-Carlo carrier-phase ranging at the configured UE");
    add_globals(rng_cmd, g);
    std::size_t iterations = 100;
    rng_cmd->add_option("--iterations", iterations, "Monte-Carlo iterations");
    rng_cmd->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            const auto report = run_umi_ranging(cfg, iterations, g.jobs);
            {
                Sink s(g, "ranges.csv", out, nullptr);
                write_ranging_csv(*s, report);
            }
            if (!g.out_dir.empty())
            {
                Sink h(g, "histogram.csv", out, nullptr);
                write_histogram_csv(*h, report);
                MetricsReport m{{"high_accuracy_fraction", report.high_accuracy_fraction},
                                {"los_fraction", report.los_fraction}};
                for (const auto &t : report.trps)
                    m.emplace_back("peak_" + t.trp_id + "_m", t.peak);
                summary(out, g, m);
            }
            return 0;
        };
    });

    // train
    auto *tr = app.add_subcommand("train", "train the LOS/NLOS classifier");
    add_globals(tr, g);
    std::string dataset_path;
    TrainConfig tc;
    tr->add_option("--dataset", dataset_path, "dataset CSV from `simulate`")->required()->check(CLI::ExistingFile);
    tr->add_option("--epochs", tc.max_epochs, "maximum epochs");
    tr->add_option("--batch", tc.batch_size, "mini-batch size");
    tr->callback([&] {
        action = [&] {
            if (g.seed)
                tc.seed = *g.seed;
            auto in = open_input(dataset_path);
            const auto rows = read_dataset_csv(in);
            if (rows.empty())
                throw Error("empty dataset");
            const auto study = run_classifier_study(rows, ModelShape{}, tc);
            if (g.out_dir.empty())
                throw Error("train needs --out for the model checkpoint");
            fs::create_directories(g.out_dir);
            save_model(fs::path(g.out_dir) / "model.bin", study.training.params);
            Sink log(g, "training_log.csv", out, nullptr);
            write_training_log_csv(*log, study.training.log);
            summary(out, g,
                    {{"best_epoch", static_cast<double>(study.training.best_epoch)},
                     {"test_accuracy", study.test_metrics.accuracy},
                     {"test_auc", study.test_metrics.roc_auc},
                     {"los_recall", study.test_metrics.los_recall()},
                     {"nlos_recall", study.test_metrics.nlos_recall()}});
            if (g.verbose)
                err << "trained in " << study.train_seconds << " s\n";
            return 0;
        };
    });

    // classify
    auto *cl = app.add_subcommand("classify", "score a dataset with a trained model");
    add_globals(cl, g);
    std::string model_path;
    double threshold = 0.5;
    cl->add_option("--model", model_path, "model checkpoint")->required()->check(CLI::ExistingFile);
    cl->add_option("--dataset", dataset_path, "dataset CSV")->required()->check(CLI::ExistingFile);
    cl->add_option("--threshold", threshold, "NLOS decision threshold on p_nlos");
    cl->callback([&] {
        action = [&] {
            const auto model = load_model(fs::path(model_path));
            auto in = open_input(dataset_path);
            const auto samples = to_samples(read_dataset_csv(in));
            std::vector<const LabeledSample *> ptr;
            for (const auto &s : samples)
                ptr.push_back(&s);
            const auto scores = predict_nlos(model, ptr);
            {
                Sink s(g, "predictions.csv", out, nullptr);
                *s << "index,p_nlos,predicted,label\n";
                for (std::size_t i = 0; i < scores.size(); ++i)
                    *s << i << ',' << format_double(scores[i]) << ','
                       << (scores[i] >= threshold ? "NLOS" : "LOS") << ',' << to_string(samples[i].label) << '\n';
            }
            if (!g.out_dir.empty() && !samples.empty())
            {
                std::vector<LinkState> labels;
                for (const auto &s : samples)
                    labels.push_back(s.label);
                const auto m = evaluate_scores(scores, labels, threshold);
                summary(out, g, {{"accuracy", m.accuracy}, {"auc", m.roc_auc}});
            }
            return 0;
        };
    });

    // localize
    auto *loc = app.add_subcommand("localize", "simulate epochs at the configured UE and trilaterate");
    add_globals(loc, g);
    std::size_t epochs = 10;
    std::string force = "none", filter = "keep";
    loc->add_option("--epochs", epochs, "number of epochs");
    loc->add_option("--force", force, "link state for every TRP")->check(CLI::IsMember({"none", "los", "nlos"}));
    loc->add_option("--filter", filter, "link filter")->check(CLI::IsMember({"keep", "oracle", "model"}));
    loc->add_option("--model", model_path, "model checkpoint for --filter model");
    loc->add_option("--threshold", threshold, "NLOS decision threshold on p_nlos");
    loc->callback([&] {
        action = [&] {
            const auto cfg = load_config(g);
            ModelParams model;
            LinkFilter lf;
            if (filter == "oracle")
                lf.kind = LinkFilter::Kind::oracle;
            else if (filter == "model")
            {
                if (model_path.empty())
                    throw Error("--filter model needs --model");
                model = load_model(fs::path(model_path));
                lf = {LinkFilter::Kind::classifier, &model, threshold};
            }
            std::optional<LinkState> fs_state;
            if (force == "los")
                fs_state = LinkState::los;
            else if (force == "nlos")
                fs_state = LinkState::nlos;
            LocalizeConfig lc;
            lc.k_schedule = default_k_schedule(cfg.num_subcarriers, cfg.comb_size);
            lc.max_distance = 300.0;
            lc.prior_height = cfg.ue_init.z();
            std::vector<PositionFix> fixes(epochs);
            parallel_for(epochs, g.jobs, [&](std::size_t e) {
                Rng rng(derive_seed(cfg.rng_seed, e));
                std::vector<LinkObservation> links;
                for (const auto &t : cfg.trp_list)
                    links.push_back(simulate_link(cfg, t, cfg.ue_init, fs_state, cfg.symbols_per_frame, rng).observation);
                fixes[e] = localize_epoch(links, cfg.trp_list, lf, lc);
                fixes[e].t = static_cast<double>(e);
            });
            Sink s(g, "fixes.csv", out, nullptr);
            write_fix_log_csv(*s, fixes);
            if (g.verbose)
                for (const auto &f : fixes)
                    if (!f.valid)
                        err << "epoch " << f.t << ": invalid fix (" << f.reason << ")\n";
            return 0;
        };
    });

    // fuse
    auto *fu = app.add_subcommand("fuse", "run the error-state filter on IMU and position streams");
    add_globals(fu, g);
    std::string imu_path, meas_path;
    std::vector<double> init_p;
    FilterConfig fcfg;
    fu->add_option("--imu", imu_path, "IMU CSV")->required()->check(CLI::ExistingFile);
    fu->add_option("--meas", meas_path, "measurement CSV")->check(CLI::ExistingFile);
    fu->add_option("--init", init_p, "initial position x y z")->expected(3);
    fu->add_option("--sigma-acc", fcfg.noise.sigma_acc, "accelerometer noise std");
    fu->add_option("--sigma-gyr", fcfg.noise.sigma_gyr, "gyroscope noise std");
    fu->callback([&] {
        action = [&] {
            auto imu_in = open_input(imu_path);
            const auto imu = read_imu_csv(imu_in);
            std::vector<PositionMeasurement> meas;
            if (!meas_path.empty())
            {
                auto m_in = open_input(meas_path);
                meas = read_measurements_csv(m_in);
            }
            NavState init;
            if (init_p.size() == 3)
                init.p = Vec3(init_p[0], init_p[1], init_p[2]);
            else if (!meas.empty())
                init.p = meas.front().y;
            Mat9 P0 = Mat9::Identity();
            P0.block<3, 3>(6, 6) *= 1e-2;
            const auto result = run_filter(imu, meas, init, P0, fcfg);
            Sink s(g, "trajectory.csv", out, nullptr);
            write_trajectory_csv(*s, result.trajectory);
            return 0;
        };
    });

    // evaluate
    auto *ev = app.add_subcommand("evaluate", "ATE / RPE of an estimated trajectory");
    add_globals(ev, g);
    std::string est_path, gt_path;
    std::size_t delta = 1;
    ev->add_option("--est", est_path, "estimated trajectory CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--gt", gt_path, "ground-truth trajectory CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--delta", delta, "RPE interval in samples");
    ev->callback([&] {
        action = [&] {
            auto e_in = open_input(est_path);
            auto g_in = open_input(gt_path);
            const auto est = read_trajectory_csv(e_in);
            const auto gt = read_trajectory_csv(g_in);
            MetricsReport m{{"ate_m", ate(est, gt)}};
            if (associate(est, gt).size() > delta)
            {
                const auto r = rpe(est, gt, delta);
                m.emplace_back("rpe_trans_m", r.trans_m);
                m.emplace_back("rpe_rot_deg", r.rot_deg);
            }
            summary(out, g, m);
            return 0;
        };
    });

    // study
    auto *st = app.add_subcommand("study", "scripted end-to-end studies");
    add_globals(st, g);
    std::string study_name;
    std::size_t study_epochs = 1000, study_samples = 10000;
    int study_max_epochs = 30;
    st->add_option("name", study_name, "umi | exclusion | classifier | fusion")
        ->required()
        ->check(CLI::IsMember({"umi", "exclusion", "classifier", "fusion"}));
    st->add_option("--iterations", iterations, "umi: Monte-Carlo iterations");
    st->add_option("--epochs", study_epochs, "exclusion: positioning epochs");
    st->add_option("--samples", study_samples, "classifier: dataset size");
    st->add_option("--max-epochs", study_max_epochs, "classifier: training epoch budget");
    st->add_option("--model", model_path, "exclusion: classifier checkpoint for the DL block");
    st->callback([&] {
        action = [&] {
            if (g.out_dir.empty())
                g.out_dir = "study_" + study_name;
            auto cfg = load_config(g);
            std::vector<std::string> outputs;
            std::vector<std::pair<std::string, std::string>> params;
            if (study_name == "umi")
            {
                const auto r = run_umi_ranging(cfg, iterations, g.jobs);
                {
                    Sink s(g, "ranges.csv", out, &outputs);
                    write_ranging_csv(*s, r);
                }
                Sink h(g, "histogram.csv", out, &outputs);
                write_histogram_csv(*h, r);
                params.emplace_back("iterations", std::to_string(iterations));
                MetricsReport m{{"high_accuracy_fraction", r.high_accuracy_fraction}, {"los_fraction", r.los_fraction}};
                for (const auto &t : r.trps)
                    m.emplace_back("peak_" + t.trp_id + "_m", t.peak);
                summary(out, g, m);
            }
            else if (study_name == "exclusion")
            {
                if (g.config.empty())
                    cfg.trp_list = exclusion_deployment();
                ModelParams model;
                ExclusionConfig ec;
                ec.epochs = study_epochs;
                if (!model_path.empty())
                {
                    model = load_model(fs::path(model_path));
                    if (model.shape.input_length != cfg.num_subcarriers)
                        cfg = classifier_numerology(cfg);
                    ec.model = &model;
                }
                const auto r = run_exclusion_study(cfg, ec, g.jobs);
                {
                    Sink s(g, "exclusion_table.csv", out, &outputs);
                    write_exclusion_table(*s, r);
                }
                for (const ExclusionBlock *b : {&r.los_only, &r.mixed, &r.oracle, r.dl ? &*r.dl : nullptr})
                {
                    if (!b)
                        continue;
                    {
                        Sink s(g, "fixes_" + b->name + ".csv", out, &outputs);
                        write_fix_log_csv(*s, b->fixes);
                    }
                    if (b->stats)
                    {
                        Sink c(g, "cdf2d_" + b->name + ".csv", out, &outputs);
                        export_cdf(*c, b->stats->errors_2d);
                    }
                }
                params.emplace_back("epochs", std::to_string(study_epochs));
            }
            else if (study_name == "classifier")
            {
                cfg = classifier_numerology(cfg);
                if (g.config.empty())
                    cfg.trp_list = exclusion_deployment();
                DatasetConfig dc;
                dc.samples = study_samples;
                const auto rows = generate_dataset(cfg, dc, g.jobs);
                TrainConfig tcs;
                tcs.seed = cfg.rng_seed;
                tcs.max_epochs = study_max_epochs;
                const auto r = run_classifier_study(rows, ModelShape{}, tcs);
                fs::create_directories(g.out_dir);
                save_model(fs::path(g.out_dir) / "model.bin", r.training.params);
                outputs.push_back((fs::path(g.out_dir) / "model.bin").string());
                {
                    Sink s(g, "training_log.csv", out, &outputs);
                    write_training_log_csv(*s, r.training.log);
                }
                params.emplace_back("samples", std::to_string(study_samples));
                summary(out, g,
                        {{"test_accuracy", r.test_metrics.accuracy},
                         {"test_auc", r.test_metrics.roc_auc},
                         {"los_recall", r.test_metrics.los_recall()},
                         {"nlos_recall", r.test_metrics.nlos_recall()},
                         {"best_epoch", static_cast<double>(r.training.best_epoch)}});
            }
            else
            {
                const auto r = run_fusion_study(cfg, FusionStudyConfig{});
                for (const auto &[name, traj] : {std::pair{"truth", &r.truth}, std::pair{"vo", &r.vo_only},
                                                 std::pair{"imu_vo", &r.imu_vo}, std::pair{"cpp_imu_vo", &r.cpp_imu_vo}})
                {
                    Sink s(g, std::string("trajectory_") + name + ".csv", out, &outputs);
                    write_trajectory_csv(*s, *traj);
                }
                {
                    Sink s(g, "imu.csv", out, &outputs);
                    write_imu_csv(*s, r.imu);
                }
                {
                    Sink s(g, "obstacles.txt", out, &outputs);
                    write_obstacle_map(*s, r.obstacles);
                }
                summary(out, g, r.metrics);
            }
            write_manifest_file(g, cfg, study_name, params, outputs);
            return 0;
        };
    });

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        out << app.help();
        return 0;
    }
    catch (const CLI::CallForVersion &e)
    {
        out << NRPOS_BUILD_ID << '\n';
        return 0;
    }
    catch (const CLI::ParseError &e)
    {
        err << "nrpos: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try
    {
        return action ? action() : 1;
    }
    catch (const std::exception &e)
    {
        err << "nrpos: " << e.what() << '\n';
        return 2;
    }
}

} // namespace nrpos
