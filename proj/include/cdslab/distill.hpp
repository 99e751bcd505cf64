#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "cdslab/optimizer.hpp"
#include "cdslab/scene.hpp"
#include "cdslab/schedule.hpp"

namespace cdslab {

using DenoiserSet = std::vector<std::shared_ptr<const Denoiser>>;

enum class LossKind { sds, cds };
enum class LambdaMode { unit, inv_sigma_sq };

/// How t2 evolves over iterations: the annealed square-root schedule, or a
/// fresh uniform draw in [t_min, t_max] each iteration (ablation arm).
enum class T2Mode { annealed, random };

/// Whether eps* is drawn once per run or redrawn every iteration (ablation arm).
enum class NoiseMode { fixed, per_iteration };

struct CfgSchedule {
    double w_start = 50.0;
    double w_end = 20.0;
};

struct DistillRunConfig {
    ScheduleParams schedule;
    LossKind loss = LossKind::cds;
    LambdaMode lambda = LambdaMode::unit;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    std::optional<int> label;
    std::optional<CfgSchedule> cfg;
    int poses_per_iter = 4;
    T2Mode t2_mode = T2Mode::annealed;
    NoiseMode noise_mode = NoiseMode::fixed;
    /// Std of the Gaussian theta init; defaults to 0.1 x RMS coordinate of the scene modes.
    std::optional<double> init_scale;
    /// Explicit initial theta; overrides init_scale.
    std::optional<Vector> init_theta;
    /// Stop after this many iterations of the N-iteration schedule (mid-run snapshots).
    std::optional<int> stop_after;
    double divergence_bound = 1e9;

    void validate() const;
};

/// eps*, drawn once at the start of a run and reused for every iteration and pose.
struct FixedNoise {
    Vector eps_star;

    static FixedNoise draw(Index dim, RandomStream& rng) { return FixedNoise{rng.normal_vector(dim)}; }

    /// Hash of the raw bytes; constant across a run's records.
    std::uint64_t fingerprint() const;
};

double loss_weight(LambdaMode mode, double t, const NoiseSchedule& sched);

struct SdsStep {
    double loss = 0.0;      // 0.5 * lambda * |x_pi - sg[D(x_t, t)]|^2
    Vector gradient;        // A^T lambda (x_pi - D(x_t, t))
    Vector target;          // D(x_t, t)
};

SdsStep sds_step(const SceneParams& scene, const ViewOperator& view, const Denoiser& denoiser, double t,
                 const Vector& eps, double lambda, const NoiseSchedule& sched, const Guidance& guidance = {});

Vector sds_grad(const SceneParams& scene, const ViewOperator& view, const Denoiser& denoiser, double t,
                RandomStream& rng, double lambda, const NoiseSchedule& sched, const Guidance& guidance = {});

struct CdsStep {
    double loss = 0.0;
    Vector gradient;
    Vector x0_target;       // x_pi + sg[sigma_t1 (eps* - d)]
    Vector denoised_target; // sg[D(xhat_t2, t2)]
    Vector x_t2;            // Euler estimate xhat_t2
};

/// One pose of the consistency-distillation loop:
///   x_t1   = x_pi + sigma_t1 eps*
///   d      = (x_t1 - D(x_t1, t1)) / sigma_t1
///   xhat   = x_t1 + (sigma_t2 - sigma_t1) d
///   x0     = x_pi + sg[sigma_t1 (eps* - d)]
///   loss   = lambda |x0 - sg[D(xhat, t2)]|^2
/// Everything inside sg[] (hence d and xhat) is constant for the gradient,
/// which is A^T 2 lambda (x0 - D(xhat, t2)).
CdsStep cds_step(const SceneParams& scene, const ViewOperator& view, const Denoiser& denoiser,
                 const FixedNoise& noise, double t1, double t2, double lambda, const NoiseSchedule& sched,
                 const Guidance& guidance = {});

struct RunRecord {
    int iter = 0;
    double t1 = 0.0; // CDS: sampled t1. SDS: sampled t.
    double t2 = 0.0; // schedule value for this iteration (unused by SDS)
    int pose = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double mode_distance = 0.0; // aggregate at the iteration's starting theta
    std::uint64_t eps_hash = 0;
};

struct RunLog {
    std::vector<RunRecord> records;
    Vector initial_theta;
    Vector final_theta;
    ModeDistance final_distance;
};

/// Raised when |theta| leaves the divergence bound; carries the last finite state.
class RunDivergence : public DivergenceError {
public:
    RunDivergence(const std::string& what, Vector last_good, int iteration)
        : DivergenceError(what), last_good_(std::move(last_good)), iteration_(iteration) {}

    const Vector& last_good() const noexcept { return last_good_; }
    int iteration() const noexcept { return iteration_; }

private:
    Vector last_good_;
    int iteration_;
};

/// Runs N iterations (i = 0..N-1): t2 from the schedule, then for each sampled
/// pose a CDS step (t1 ~ U[t2 + delta, t2 + Delta]) or an SDS step
/// (t ~ U[t_min, t_max]); pose gradients are summed and applied in one
/// optimizer update per iteration. Randomness comes from named substreams
/// of config.seed: "init", "eps_star", "poses", "t1", "eps", "t2".
RunLog run_distill(const DistillRunConfig& config, const SceneTask& task, const DenoiserSet& denoisers,
                   const NoiseSchedule& sched);

/// Initial theta exactly as run_distill draws it.
Vector initial_theta(const DistillRunConfig& config, const SceneTask& task);

/// Guidance for iteration i of a run (label plus annealed CFG weight).
Guidance guidance_at(const DistillRunConfig& config, int i);

} // namespace cdslab
