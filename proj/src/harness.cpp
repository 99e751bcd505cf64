#include "cdslab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cdslab/parallel.hpp"

namespace cdslab {

EquivalenceResult sds_sde_compare(const Denoiser& denoiser, int n_steps, std::uint64_t sde_seed,
                                  std::uint64_t sds_seed, const NoiseSchedule& sched) {
    RandomStream sde_rng = RandomStream::derive(sde_seed, "sde_noise");
    const Trajectory traj = ancestral_sde_sample(denoiser, n_steps, sched, sde_rng);

    const Index d = denoiser.dim();
    const ViewOperator view(0, Matrix::Identity(d, d));
    RandomStream sds_rng = RandomStream::derive(sds_seed, "sde_noise");
    SceneParams scene{Vector::Zero(d)};

    EquivalenceResult out;
    out.sde_iterates = traj.denoised;
    for (double t : traj.times) {
        const double sigma = sched.sigma(t);
        const Vector x_pi = render(scene, view);
        const Vector x_t = x_pi + sigma * sds_rng.normal_vector(d);
        const Vector target = sigma == 0.0 ? x_t : denoiser(x_t, t);
        // Exact minimizer of |A theta - target| for orthonormal rows.
        scene.theta = render_vjp(view, target);
        out.sds_iterates.push_back(render(scene, view));
    }
    for (std::size_t i = 0; i < out.sds_iterates.size(); ++i) {
        out.max_deviation = std::max(out.max_deviation, (out.sde_iterates[i] - out.sds_iterates[i]).norm());
    }
    return out;
}

double sds_sde_equivalence(const Denoiser& denoiser, int n_steps, std::uint64_t seed, const NoiseSchedule& sched) {
    return sds_sde_compare(denoiser, n_steps, seed, seed, sched).max_deviation;
}

double median(std::vector<double> v) {
    if (v.empty()) throw InputError("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace

double interquartile_range(std::vector<double> v) {
    if (v.empty()) throw InputError("interquartile range of an empty list");
    std::sort(v.begin(), v.end());
    return quantile(v, 0.75) - quantile(v, 0.25);
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("slope fit needs two or more paired points");
    const double tiny = 1e-300;
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(std::max(x[i], tiny)));
        ly.push_back(std::log(std::max(y[i], tiny)));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx == 0.0) throw InputError("slope fit needs distinct x values");
    return sxy / sxx;
}

ScanResult theorem1_scan(const DistillRunConfig& base, const SceneTask& task, const DenoiserSet& denoisers,
                         const NoiseSchedule& sched, std::span<const double> delta_fractions, int seeds_per_delta) {
    std::vector<double> deltas(delta_fractions.begin(), delta_fractions.end());
    std::sort(deltas.begin(), deltas.end());
    deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
    if (deltas.size() < 3) throw ConfigError("theorem scan needs at least 3 distinct Delta values");
    if (deltas.front() <= 0.0) throw ConfigError("theorem scan Delta values must be positive");
    if (seeds_per_delta < 1) throw ConfigError("theorem scan needs at least one seed per Delta");

    ScanResult result;
    result.deltas = deltas;
    result.t_max = std::min(base.schedule.t_max, 1.0 - deltas.back());
    if (!(result.t_max > base.schedule.t_min)) throw ConfigError("largest Delta leaves no room above t_min");
    for (int k = 0; k < seeds_per_delta; ++k) result.seeds.push_back(base.seed + static_cast<std::uint64_t>(k));

    const std::size_t n_seeds = result.seeds.size();
    std::vector<double> flat(deltas.size() * n_seeds);
    parallel_for(flat.size(), [&](std::size_t idx) {
        const std::size_t di = idx / n_seeds;
        const std::size_t si = idx % n_seeds;
        DistillRunConfig cfg = base;
        cfg.schedule.t_max = result.t_max;
        cfg.schedule.cap_delta = deltas[di];
        cfg.schedule.delta = deltas[di] / 2.0;
        cfg.seed = result.seeds[si];
        try {
            flat[idx] = run_distill(cfg, task, denoisers, sched).final_distance.aggregate;
        } catch (const RunDivergence& e) {
            std::ostringstream os;
            os << "theorem scan run (Delta=" << deltas[di] << ", seed=" << cfg.seed << ") failed: " << e.what();
            throw DivergenceError(os.str());
        }
    });

    for (std::size_t di = 0; di < deltas.size(); ++di) {
        std::vector<double> errs(flat.begin() + static_cast<long>(di * n_seeds),
                                 flat.begin() + static_cast<long>((di + 1) * n_seeds));
        result.errors.push_back(median(errs));
        result.iqrs.push_back(interquartile_range(errs));
        result.run_errors.push_back(std::move(errs));
    }
    result.slope = log_log_slope(result.deltas, result.errors);

    // Floor: intercept of a least-squares line err = a + b * Delta, kept
    // below the smallest median so every floored value stays positive.
    const double n = static_cast<double>(deltas.size());
    const double mx = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
    const double my = std::accumulate(result.errors.begin(), result.errors.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        sxy += (deltas[i] - mx) * (result.errors[i] - my);
        sxx += (deltas[i] - mx) * (deltas[i] - mx);
    }
    const double intercept = my - (sxy / sxx) * mx;
    const double min_err = *std::min_element(result.errors.begin(), result.errors.end());
    result.floor = std::clamp(intercept, 0.0, 0.9 * min_err);
    std::vector<double> floored;
    for (double e : result.errors) floored.push_back(e - result.floor);
    result.floored_slope = log_log_slope(result.deltas, floored);
    return result;
}

namespace {

double mean_coordinate_std(const std::vector<Vector>& samples) {
    const auto n = static_cast<double>(samples.size());
    Vector mean = Vector::Zero(samples.front().size());
    for (const auto& s : samples) mean += s;
    mean /= n;
    Vector var = Vector::Zero(mean.size());
    for (const auto& s : samples) var += (s - mean).cwiseAbs2();
    var /= (n - 1.0);
    return var.cwiseSqrt().mean();
}

} // namespace

VarianceComparison guidance_variance_compare(const SceneParams& theta, const SceneTask& task,
                                             const DenoiserSet& denoisers, const DistillRunConfig& config,
                                             const NoiseSchedule& sched, int iteration, int samples) {
    if (samples < 2) throw InputError("variance comparison needs at least 2 samples");
    if (denoisers.size() != task.views.size()) throw ShapeError("need exactly one denoiser per view");
    config.validate();
    const double horizon = sched.horizon();
    const double t2 = t2_of_iter(config.schedule, iteration, horizon);
    const Guidance guidance = guidance_at(config, iteration);

    RandomStream star_rng = RandomStream::derive(config.seed, "eps_star");
    const FixedNoise noise = FixedNoise::draw(task.image_dim(), star_rng);
    RandomStream rng = RandomStream::derive(config.seed, "variance");

    VarianceComparison out;
    for (std::size_t v = 0; v < task.views.size(); ++v) {
        const ViewOperator& view = task.views[v];
        const Denoiser& denoiser = *denoisers[v];
        std::vector<Vector> sds_targets;
        std::vector<Vector> cds_targets;
        for (int k = 0; k < samples; ++k) {
            const double t = rng.uniform(config.schedule.t_min * horizon, config.schedule.t_max * horizon);
            const Vector eps = rng.normal_vector(view.image_dim());
            sds_targets.push_back(sds_step(theta, view, denoiser, t, eps, 1.0, sched, guidance).target);
            const double t1 =
                sample_t1(t2, config.schedule.delta * horizon, config.schedule.cap_delta * horizon, rng);
            cds_targets.push_back(cds_step(theta, view, denoiser, noise, t1, t2, 1.0, sched, guidance).x0_target);
        }
        out.sds_std += mean_coordinate_std(sds_targets);
        out.cds_std += mean_coordinate_std(cds_targets);
    }
    out.sds_std /= static_cast<double>(task.views.size());
    out.cds_std /= static_cast<double>(task.views.size());
    out.ratio = out.sds_std == 0.0 ? 0.0 : out.cds_std / out.sds_std;
    return out;
}

DistillRunConfig ablation_arm(const DistillRunConfig& base, std::size_t arm) {
    DistillRunConfig cfg = base;
    cfg.loss = LossKind::cds;
    switch (arm) {
    case 0: cfg.t2_mode = T2Mode::random; break;
    case 1: cfg.schedule.delta = cfg.schedule.cap_delta; break;
    case 2: cfg.noise_mode = NoiseMode::per_iteration; break;
    case 3: break;
    default: throw InputError("unknown ablation arm " + std::to_string(arm));
    }
    return cfg;
}

AblationResult ablation_suite(const SceneTask& task, const DenoiserSet& denoisers, const DistillRunConfig& base,
                              const NoiseSchedule& sched, int seeds) {
    if (seeds < 1) throw ConfigError("ablation needs at least one seed");
    const std::size_t n_seeds = static_cast<std::size_t>(seeds);
    const std::size_t n_arms = kAblationArms.size();
    std::vector<double> flat(n_arms * n_seeds);
    parallel_for(flat.size(), [&](std::size_t idx) {
        DistillRunConfig cfg = ablation_arm(base, idx / n_seeds);
        cfg.seed = base.seed + idx % n_seeds;
        try {
            flat[idx] = run_distill(cfg, task, denoisers, sched).final_distance.aggregate;
        } catch (const RunDivergence& e) {
            std::ostringstream os;
            os << "ablation arm " << kAblationArms[idx / n_seeds] << " (seed " << cfg.seed << ") failed: " << e.what();
            throw DivergenceError(os.str());
        }
    });

    AblationResult result;
    for (std::size_t a = 0; a < n_arms; ++a) {
        std::vector<double> errs;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const double e = flat[a * n_seeds + s];
            result.rows.push_back({kAblationArms[a], base.seed + s, e});
            errs.push_back(e);
        }
        result.medians[a] = median(errs);
    }
    return result;
}

TaskSpec default_recovery_spec() {
    TaskSpec spec;
    spec.seed = 2024;
    spec.views = 4;
    spec.d_img = 8;
    spec.d_scene = 16;
    spec.scale = 0.3;
    const double modes[3][16] = {
        {2.57, 4.1, 2.87, -2.43, -3.48, 0.17, 2.15, 1.27, 4.53, 1.88, 1.6, -1.83, -2.77, 3.71, 0.12, 2.03},
        {-3.44, -1.09, -3.23, -1.94, 2.26, -3.7, -1.34, 0.41, -1.67, -0.63, -0.55, 1.05, -1.08, 0.68, 0.14, 1.06},
        {0.56, 4.14, -1.66, 3.0, -1.01, -2.39, 3.03, -1.1, -0.97, -3.47, -5.25, 1.59, -2.91, 1.95, 4.62, -0.29},
    };
    for (const auto& m : modes) spec.modes.push_back(Eigen::Map<const Vector>(m, 16));
    spec.labels = {0, 0, 0};
    return spec;
}

DistillRunConfig default_recovery_config() {
    DistillRunConfig cfg;
    cfg.schedule = ScheduleParams{0.1, 0.7, 0.1, 0.2, 2000};
    cfg.loss = LossKind::cds;
    cfg.optimizer = OptimizerConfig{OptimizerKind::adam, 0.02, 0.9, 0.999, 1e-8};
    cfg.seed = 0;
    cfg.poses_per_iter = 4;
    return cfg;
}

double min_projected_separation(const SceneTask& task) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& view : task.views) {
        for (std::size_t i = 0; i < task.modes.size(); ++i) {
            for (std::size_t j = i + 1; j < task.modes.size(); ++j) {
                best = std::min(best, (view.matrix() * (task.modes[i] - task.modes[j])).norm());
            }
        }
    }
    return best;
}

} // namespace cdslab
