#include "cdslab/distill.hpp"

#include <cmath>
#include <sstream>

namespace cdslab {

void DistillRunConfig::validate() const {
    schedule.validate();
    if (!(optimizer.lr > 0.0)) throw ConfigError("distill lr must be positive");
    if (poses_per_iter < 1) throw ConfigError("distill poses must be >= 1");
    if (cfg && !label) throw ConfigError("distill cfg_start/cfg_end require a label");
    if (init_scale && !(*init_scale >= 0.0)) throw ConfigError("distill init_scale must be >= 0");
    if (stop_after && (*stop_after < 0 || *stop_after > schedule.total_iters)) {
        throw ConfigError("distill stop_after must lie in [0, iters]");
    }
    if (!(divergence_bound > 0.0)) throw ConfigError("divergence bound must be positive");
}

std::uint64_t FixedNoise::fingerprint() const {
    return fnv1a64(eps_star.data(), static_cast<std::size_t>(eps_star.size()) * sizeof(double));
}

double loss_weight(LambdaMode mode, double t, const NoiseSchedule& sched) {
    switch (mode) {
    case LambdaMode::unit: return 1.0;
    case LambdaMode::inv_sigma_sq: {
        const double s = sched.sigma(t);
        if (s == 0.0) throw SingularityError("inv-sigma-sq weight at sigma_t = 0");
        return 1.0 / (s * s);
    }
    }
    return 1.0;
}

SdsStep sds_step(const SceneParams& scene, const ViewOperator& view, const Denoiser& denoiser, double t,
                 const Vector& eps, double lambda, const NoiseSchedule& sched, const Guidance& guidance) {
    const double sigma = sched.sigma(t);
    if (sigma == 0.0) throw SingularityError("sds step at sigma_t = 0");
    const Vector x_pi = render(scene, view);
    require_same_dim(x_pi, eps, "sds step noise");
    const Vector x_t = x_pi + sigma * eps;
    SdsStep out;
    out.target = denoiser(x_t, t, guidance);
    const Vector residual = x_pi - out.target;
    out.loss = 0.5 * lambda * residual.squaredNorm();
    out.gradient = render_vjp(view, lambda * residual);
    return out;
}

Vector sds_grad(const SceneParams& scene, const ViewOperator& view, const Denoiser& denoiser, double t,
                RandomStream& rng, double lambda, const NoiseSchedule& sched, const Guidance& guidance) {
    const Vector eps = rng.normal_vector(view.image_dim());
    return sds_step(scene, view, denoiser, t, eps, lambda, sched, guidance).gradient;
}

CdsStep cds_step(const SceneParams& scene, const ViewOperator& view, const Denoiser& denoiser,
                 const FixedNoise& noise, double t1, double t2, double lambda, const NoiseSchedule& sched,
                 const Guidance& guidance) {
    if (t2 > t1) throw OrderError("cds step requires t1 >= t2");
    const double s1 = sched.sigma(t1);
    const double s2 = sched.sigma(t2);
    if (s1 == 0.0) throw SingularityError("cds step with sigma_t1 = 0");

    const Vector x_pi = render(scene, view);
    require_same_dim(x_pi, noise.eps_star, "cds step noise");
    const Vector x_t1 = x_pi + s1 * noise.eps_star;
    const Vector d = (x_t1 - denoiser(x_t1, t1, guidance)) / s1;

    CdsStep out;
    out.x_t2 = x_t1 + (s2 - s1) * d;
    out.x0_target = x_pi + s1 * (noise.eps_star - d);
    out.denoised_target = s2 == 0.0 ? out.x_t2 : denoiser(out.x_t2, t2, guidance);
    const Vector residual = out.x0_target - out.denoised_target;
    out.loss = lambda * residual.squaredNorm();
    out.gradient = render_vjp(view, 2.0 * lambda * residual);
    return out;
}

Guidance guidance_at(const DistillRunConfig& config, int i) {
    Guidance g;
    g.label = config.label;
    if (config.cfg) {
        const int total = std::max(config.schedule.total_iters, 1);
        g.cfg_w = cfg_weight(i, total, config.cfg->w_start, config.cfg->w_end);
    }
    return g;
}

Vector initial_theta(const DistillRunConfig& config, const SceneTask& task) {
    if (config.init_theta) {
        if (config.init_theta->size() != task.scene_dim()) throw ShapeError("init_theta dimension differs from scene");
        return *config.init_theta;
    }
    double scale = 0.0;
    if (config.init_scale) {
        scale = *config.init_scale;
    } else {
        double sq = 0.0;
        Index count = 0;
        for (const auto& m : task.modes) {
            sq += m.squaredNorm();
            count += m.size();
        }
        scale = 0.1 * std::sqrt(sq / static_cast<double>(count));
    }
    RandomStream rng = RandomStream::derive(config.seed, "init");
    return scale * rng.normal_vector(task.scene_dim());
}

RunLog run_distill(const DistillRunConfig& config, const SceneTask& task, const DenoiserSet& denoisers,
                   const NoiseSchedule& sched) {
    config.validate();
    if (task.views.empty()) throw InputError("distillation task has no views");
    if (denoisers.size() != task.views.size()) throw ShapeError("need exactly one denoiser per view");

    const double horizon = sched.horizon();
    const int total = config.schedule.total_iters;
    const int iters = config.stop_after.value_or(total);
    const double delta = config.schedule.delta * horizon;
    const double cap_delta = config.schedule.cap_delta * horizon;

    RandomStream pose_rng = RandomStream::derive(config.seed, "poses");
    RandomStream t1_rng = RandomStream::derive(config.seed, "t1");
    RandomStream eps_rng = RandomStream::derive(config.seed, "eps");
    RandomStream t2_rng = RandomStream::derive(config.seed, "t2");
    RandomStream star_rng = RandomStream::derive(config.seed, "eps_star");
    FixedNoise noise = FixedNoise::draw(task.image_dim(), star_rng);

    RunLog log;
    SceneParams scene{initial_theta(config, task)};
    log.initial_theta = scene.theta;
    log.records.reserve(static_cast<std::size_t>(iters) * static_cast<std::size_t>(config.poses_per_iter));
    Optimizer optimizer(config.optimizer, scene.theta.size());

    for (int i = 0; i < iters; ++i) {
        const double t2 = config.t2_mode == T2Mode::annealed
                              ? t2_of_iter(config.schedule, i, horizon)
                              : horizon * t2_rng.uniform(config.schedule.t_min, config.schedule.t_max);
        if (config.loss == LossKind::cds && config.noise_mode == NoiseMode::per_iteration) {
            noise = FixedNoise::draw(task.image_dim(), eps_rng);
        }
        const Guidance guidance = guidance_at(config, i);
        const double distance = mode_distance(scene, task).aggregate;
        const std::uint64_t hash = noise.fingerprint();

        Vector grad = Vector::Zero(scene.theta.size());
        for (int p = 0; p < config.poses_per_iter; ++p) {
            const std::size_t pose = pose_rng.index(task.views.size());
            const ViewOperator& view = task.views[pose];
            const Denoiser& denoiser = *denoisers[pose];
            RunRecord rec;
            rec.iter = i;
            rec.t2 = t2;
            rec.pose = view.pose_id();
            rec.mode_distance = distance;
            rec.eps_hash = hash;
            if (config.loss == LossKind::cds) {
                rec.t1 = sample_t1(t2, delta, cap_delta, t1_rng);
                const auto step = cds_step(scene, view, denoiser, noise, rec.t1, t2,
                                           loss_weight(config.lambda, t2, sched), sched, guidance);
                rec.loss = step.loss;
                rec.grad_norm = step.gradient.norm();
                grad += step.gradient;
            } else {
                rec.t1 = t1_rng.uniform(config.schedule.t_min * horizon, config.schedule.t_max * horizon);
                const Vector eps = eps_rng.normal_vector(view.image_dim());
                const auto step = sds_step(scene, view, denoiser, rec.t1, eps,
                                           loss_weight(config.lambda, rec.t1, sched), sched, guidance);
                rec.loss = step.loss;
                rec.grad_norm = step.gradient.norm();
                grad += step.gradient;
                rec.eps_hash = fnv1a64(eps.data(), static_cast<std::size_t>(eps.size()) * sizeof(double));
            }
            log.records.push_back(rec);
        }

        const Vector last_good = scene.theta;
        try {
            optimizer.update(scene.theta, grad);
        } catch (const DivergenceError& e) {
            throw RunDivergence(std::string(e.what()) + " (iteration " + std::to_string(i) + ")", last_good, i);
        }
        if (!scene.theta.allFinite() || scene.theta.norm() > config.divergence_bound) {
            std::ostringstream os;
            os << "theta norm left the divergence bound " << config.divergence_bound << " at iteration " << i;
            throw RunDivergence(os.str(), last_good, i);
        }
    }

    log.final_theta = scene.theta;
    log.final_distance = mode_distance(scene, task);
    return log;
}

} // namespace cdslab
