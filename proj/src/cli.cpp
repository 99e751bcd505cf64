#include "cdslab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "cdslab/harness.hpp"
#include "cdslab/io.hpp"
#include "cdslab/mlp.hpp"
#include "cdslab/parallel.hpp"
#include "cdslab/samplers.hpp"

namespace cdslab {

namespace {

using ojson = nlohmann::ordered_json;

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

const GaussianMixture& require_data(const RunConfig& cfg, std::string_view sub) {
    cfg.require_sections(sub, {"data"});
    return *cfg.data;
}

SceneTask require_task(const RunConfig& cfg, std::string_view sub) {
    cfg.require_sections(sub, {"schedule", "scene", "distill"});
    return make_task(*cfg.scene);
}

std::shared_ptr<const Denoiser> sample_denoiser(const RunConfig& cfg, const NoiseSchedule& sched) {
    const GaussianMixture& gmm = *cfg.data;
    if (cfg.sample.denoiser == "oracle") return std::make_shared<MixtureDenoiser>(gmm, sched);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(cfg.sample.denoiser));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse denoiser file " + cfg.sample.denoiser + ": " + e.what());
    }
    MlpDenoiser net = MlpDenoiser::from_json(j);
    if (net.dim() != gmm.dim()) throw ConfigError("sample.denoiser: network dimension differs from [data]");
    return std::make_shared<LearnedDenoiser>(std::move(net), sched);
}

void run_sample(const RunConfig& cfg, const CliOverrides& ov, OutputSink& sink) {
    const GaussianMixture& gmm = require_data(cfg, "sample");
    const NoiseSchedule sched(cfg.horizon);
    const std::string mode = ov.mode.value_or(cfg.sample.mode);
    const bool sde = mode == "sde";
    const auto denoiser = sample_denoiser(cfg, sched);
    const Guidance guidance{cfg.sample.label, cfg.sample.cfg_w};
    const int runs = cfg.sample.runs;

    std::vector<Trajectory> trajs(static_cast<std::size_t>(runs));
    parallel_for(trajs.size(), [&](std::size_t r) {
        RandomStream rng = RandomStream::derive(cfg.seed, "sample:" + std::to_string(r));
        if (sde) {
            trajs[r] = ancestral_sde_sample(*denoiser, cfg.sample.steps, sched, rng, guidance);
        } else {
            // x_T drawn from the exact noised marginal p_T.
            const Vector x0 = sample_data(gmm, rng, cfg.sample.label);
            const Vector x_T = perturb(x0, sched.horizon(), rng.normal_vector(gmm.dim()), sched);
            trajs[r] = ode_sample(*denoiser, x_T, cfg.sample.steps, sched, guidance);
        }
    });

    std::vector<std::string> header{"run"};
    for (Index k = 0; k < gmm.dim(); ++k) header.push_back("x" + std::to_string(k));
    CsvTable endpoints(header);
    for (std::size_t r = 0; r < trajs.size(); ++r) {
        std::vector<std::string> row{fmt(static_cast<int>(r))};
        const Vector& e = trajs[r].endpoint();
        for (Index k = 0; k < e.size(); ++k) row.push_back(fmt(e[k]));
        endpoints.add(std::move(row));
    }
    sink.write("endpoints.csv", endpoints.str());

    if (cfg.output.trajectories) {
        JsonlWriter jl;
        const auto n = std::min<std::size_t>(trajs.size(), static_cast<std::size_t>(cfg.sample.trajectory_runs));
        for (std::size_t r = 0; r < n; ++r) {
            const Trajectory& tr = trajs[r];
            for (std::size_t i = 0; i < tr.times.size(); ++i) {
                ojson rec = jsonl_record();
                rec["mode"] = mode;
                rec["run"] = r;
                rec["iter"] = i;
                rec["t"] = tr.times[i];
                rec["sigma"] = sched.sigma(tr.times[i]);
                rec["state"] = to_json_array(tr.states[i]);
                rec["denoised"] = to_json_array(tr.denoised[i]);
                jl.add(rec);
            }
        }
        sink.write("trajectories.jsonl", jl.str());
    }
}

void run_distill_cmd(const RunConfig& cfg, const CliOverrides& ov, OutputSink& sink) {
    const SceneTask task = require_task(cfg, "distill");
    const NoiseSchedule sched(cfg.horizon);
    DistillRunConfig run = cfg.distill;
    if (ov.loss) run.loss = *ov.loss == "sds" ? LossKind::sds : LossKind::cds;
    const auto denoisers = oracle_denoisers(task, sched);

    const auto start = std::chrono::steady_clock::now();
    RunLog log;
    try {
        log = run_distill(run, task, denoisers, sched);
    } catch (const RunDivergence& e) {
        ojson dump;
        dump["schema_version"] = kSchemaVersion;
        dump["iteration"] = e.iteration();
        dump["last_good_theta"] = to_json_array(e.last_good());
        dump["message"] = e.what();
        sink.write("divergence.json", dump.dump(2) + "\n");
        throw;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (cfg.output.run_log) {
        JsonlWriter jl;
        for (const auto& r : log.records) {
            ojson rec = jsonl_record();
            rec["iter"] = r.iter;
            rec["pose"] = r.pose;
            rec["t1"] = r.t1;
            rec["t2"] = r.t2;
            rec["loss"] = r.loss;
            rec["grad_norm"] = r.grad_norm;
            rec["mode_distance"] = r.mode_distance;
            rec["eps_hash"] = hex64(r.eps_hash);
            jl.add(rec);
        }
        sink.write("distill.jsonl", jl.str());
    }

    CsvTable final_csv({"loss", "seed", "iters", "best_mode", "aggregate_distance"});
    final_csv.add({run.loss == LossKind::sds ? "sds" : "cds", fmt(run.seed), fmt(run.schedule.total_iters),
                   fmt(static_cast<int>(log.final_distance.best_mode)), fmt(log.final_distance.aggregate)});
    sink.write("distill_final.csv", final_csv.str());

    ojson summary;
    summary["schema_version"] = kSchemaVersion;
    summary["loss"] = run.loss == LossKind::sds ? "sds" : "cds";
    summary["final_theta"] = to_json_array(log.final_theta);
    summary["best_mode"] = log.final_distance.best_mode;
    summary["per_view_distance"] = log.final_distance.per_view;
    summary["aggregate_distance"] = log.final_distance.aggregate;
    summary["wall_time_s"] = wall;
    sink.write("summary.json", summary.dump(2) + "\n");
}

void run_train(const RunConfig& cfg, OutputSink& sink) {
    cfg.require_sections("train-denoiser", {"data", "train"});
    const GaussianMixture& gmm = *cfg.data;
    const NoiseSchedule sched(cfg.horizon);
    RandomStream init = RandomStream::derive(cfg.seed, "mlp_init");
    RandomStream rng = RandomStream::derive(cfg.seed, "dsm");
    MlpDenoiser net = MlpDenoiser::random(gmm.dim(), cfg.train.hidden, init);
    TrainResult res = train(std::move(net), gmm, cfg.train.steps, cfg.train.batch, cfg.train.lr, rng, sched);

    sink.write(cfg.train.output, res.net.to_json().dump() + "\n");
    CsvTable losses({"step", "loss"});
    for (std::size_t i = 0; i < res.losses.size(); ++i) losses.add({fmt(static_cast<int>(i)), fmt(res.losses[i])});
    sink.write("train_loss.csv", losses.str());
}

void run_equivalence(const RunConfig& cfg, OutputSink& sink) {
    const GaussianMixture& gmm = require_data(cfg, "equivalence-check");
    const NoiseSchedule sched(cfg.horizon);
    const MixtureDenoiser denoiser(gmm, sched);
    const int steps = cfg.harness.equivalence_steps;
    CsvTable table({"seed", "n_steps", "max_deviation", "control_deviation"});
    for (int k = 0; k < cfg.harness.equivalence_seeds; ++k) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
        const double dev = sds_sde_equivalence(denoiser, steps, seed, sched);
        // Negative control: the SDS loop draws from a different seed.
        const double control = sds_sde_compare(denoiser, steps, seed, seed + 1, sched).max_deviation;
        table.add({fmt(seed), fmt(steps), fmt(dev), fmt(control)});
    }
    sink.write("equivalence.csv", table.str());
}

void run_scan(const RunConfig& cfg, OutputSink& sink) {
    const SceneTask task = require_task(cfg, "theorem-scan");
    const NoiseSchedule sched(cfg.horizon);
    const auto denoisers = oracle_denoisers(task, sched);
    const ScanResult res =
        theorem1_scan(cfg.distill, task, denoisers, sched, cfg.harness.scan_deltas, cfg.harness.scan_seeds);

    CsvTable runs({"delta", "seed", "final_error", "slope"});
    CsvTable summary({"delta", "median_error", "iqr", "floor", "slope", "floored_slope", "t_max"});
    for (std::size_t d = 0; d < res.deltas.size(); ++d) {
        for (std::size_t s = 0; s < res.seeds.size(); ++s) {
            runs.add({fmt(res.deltas[d]), fmt(res.seeds[s]), fmt(res.run_errors[d][s]), fmt(res.slope)});
        }
        summary.add({fmt(res.deltas[d]), fmt(res.errors[d]), fmt(res.iqrs[d]), fmt(res.floor), fmt(res.slope),
                     fmt(res.floored_slope), fmt(res.t_max)});
    }
    sink.write("theorem_scan.csv", runs.str());
    sink.write("theorem_scan_summary.csv", summary.str());
}

void run_variance(const RunConfig& cfg, OutputSink& sink) {
    const SceneTask task = require_task(cfg, "variance-compare");
    const NoiseSchedule sched(cfg.horizon);
    const auto denoisers = oracle_denoisers(task, sched);
    DistillRunConfig run = cfg.distill;
    run.loss = LossKind::cds;
    const int iter = cfg.harness.variance_iter.value_or(run.schedule.total_iters / 2);
    run.stop_after = iter;
    const SceneParams snapshot{run_distill(run, task, denoisers, sched).final_theta};
    const VarianceComparison v =
        guidance_variance_compare(snapshot, task, denoisers, run, sched, iter, cfg.harness.variance_samples);

    CsvTable table({"iteration", "samples", "sds_std", "cds_std", "ratio"});
    table.add({fmt(iter), fmt(cfg.harness.variance_samples), fmt(v.sds_std), fmt(v.cds_std), fmt(v.ratio)});
    sink.write("variance.csv", table.str());
}

void run_ablate(const RunConfig& cfg, OutputSink& sink) {
    const SceneTask task = require_task(cfg, "ablate");
    const NoiseSchedule sched(cfg.horizon);
    const auto denoisers = oracle_denoisers(task, sched);
    const AblationResult res = ablation_suite(task, denoisers, cfg.distill, sched, cfg.harness.ablation_seeds);

    CsvTable rows({"arm", "seed", "final_error"});
    for (const auto& r : res.rows) rows.add({r.arm, fmt(r.seed), fmt(r.final_error)});
    CsvTable summary({"arm", "median_error"});
    for (std::size_t a = 0; a < kAblationArms.size(); ++a) summary.add({kAblationArms[a], fmt(res.medians[a])});
    sink.write("ablation.csv", rows.str());
    sink.write("ablation_summary.csv", summary.str());
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

} // namespace

void dispatch(const std::string& subcommand, const RunConfig& config, const std::filesystem::path& config_path,
              const CliOverrides& overrides) {
    OutputSink sink(overrides.out_dir.value_or(config.out_dir));
    if (subcommand == "sample") {
        run_sample(config, overrides, sink);
    } else if (subcommand == "distill") {
        run_distill_cmd(config, overrides, sink);
    } else if (subcommand == "train-denoiser") {
        run_train(config, sink);
    } else if (subcommand == "equivalence-check") {
        run_equivalence(config, sink);
    } else if (subcommand == "theorem-scan") {
        run_scan(config, sink);
    } else if (subcommand == "variance-compare") {
        run_variance(config, sink);
    } else if (subcommand == "ablate") {
        run_ablate(config, sink);
    } else {
        throw ConfigError("unknown subcommand '" + subcommand + "'");
    }
    sink.write_manifest(subcommand, config_path, config.source_hash, config.seed);
}

std::string error_line(const Error& e) {
    return "error kind=" + std::string(to_string(e.kind())) + " exit=" + std::to_string(e.exit_code()) +
           " msg=" + one_line(e.what());
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"cdslab: diffusion distillation lab"};
    app.name("cdslab");
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    CliOverrides ov;
    std::string mode;
    std::string loss;
    for (const auto& name : kSubcommands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "run config file")->required();
        sub->add_option("-o,--out-dir", out_dir, "output directory (overrides out_dir)");
        if (name == "sample") sub->add_option("--mode", mode, "sampler")->check(CLI::IsMember({"sde", "ode"}));
        if (name == "distill") sub->add_option("--loss", loss, "distillation loss")->check(CLI::IsMember({"sds", "cds"}));
    }

    if (argc > 1 && argv[1][0] != '-' &&
        std::find(kSubcommands.begin(), kSubcommands.end(), argv[1]) == kSubcommands.end()) {
        err << app.help();
        err << error_line(ConfigError(std::string("unknown subcommand '") + argv[1] + "'")) << "\n";
        return static_cast<int>(ErrorKind::config);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << app.help();
        err << error_line(ConfigError(e.what())) << "\n";
        return static_cast<int>(ErrorKind::config);
    }

    const std::string subcommand = app.get_subcommands().front()->get_name();
    if (!mode.empty()) ov.mode = mode;
    if (!loss.empty()) ov.loss = loss;
    if (!out_dir.empty()) ov.out_dir = out_dir;

    try {
        const RunConfig config = parse_config(config_path);
        dispatch(subcommand, config, config_path, ov);
    } catch (const Error& e) {
        err << error_line(e) << "\n";
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        err << error_line(IoError(e.what())) << "\n";
        return static_cast<int>(ErrorKind::io);
    } catch (const std::exception& e) {
        err << error_line(NumericalError(e.what())) << "\n";
        return static_cast<int>(ErrorKind::numerical);
    }
    return 0;
}

} // namespace cdslab
