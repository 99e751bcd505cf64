#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdslab/distill.hpp"
#include "cdslab/samplers.hpp"

namespace cdslab {

// --- SDS as stochastic sampling -------------------------------------------

struct EquivalenceResult {
    double max_deviation = 0.0;
    std::vector<Vector> sde_iterates; // xhat^i of the ancestral sampler
    std::vector<Vector> sds_iterates; // x_pi^i of the SDS loop
};

/// Runs the ancestral sampler and an SDS loop with an identity view whose
/// per-iteration minimization is exact (theta <- argmin |g(theta) - D(x_t, t)|),
/// drawing noise from the "sde_noise" substreams of the two seeds.
EquivalenceResult sds_sde_compare(const Denoiser& denoiser, int n_steps, std::uint64_t sde_seed,
                                  std::uint64_t sds_seed, const NoiseSchedule& sched);

/// Max over steps of |xhat^i - x_pi^i| with a shared noise stream.
double sds_sde_equivalence(const Denoiser& denoiser, int n_steps, std::uint64_t seed, const NoiseSchedule& sched);

// --- Delta scan -------------------------------------------------------------

struct ScanResult {
    std::vector<double> deltas;                  // ascending fractions of T
    std::vector<double> errors;                  // median final mode distance per delta
    std::vector<double> iqrs;                    // interquartile range per delta
    std::vector<std::vector<double>> run_errors; // [delta][seed]
    std::vector<std::uint64_t> seeds;
    double slope = 0.0;         // log-log fit on raw medians
    double floor = 0.0;         // extrapolated optimizer floor
    double floored_slope = 0.0; // log-log fit after subtracting the floor
    double t_max = 0.0;         // t_max fraction actually used
};

/// For each Delta (delta = Delta / 2) runs run_distill for every seed
/// (base.seed + k) and records the median final mode distance. t_max is
/// lowered to 1 - max(Delta) when needed so t1 stays within the horizon.
ScanResult theorem1_scan(const DistillRunConfig& base, const SceneTask& task, const DenoiserSet& denoisers,
                         const NoiseSchedule& sched, std::span<const double> delta_fractions, int seeds_per_delta);

/// Least-squares slope of log(y) against log(x); zeros are clamped to 1e-300.
double log_log_slope(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> v);
double interquartile_range(std::vector<double> v);

// --- Guidance variance --------------------------------------------------------

struct VarianceComparison {
    double sds_std = 0.0;
    double cds_std = 0.0;
    double ratio = 0.0; // cds / sds; 0 when sds_std is 0
};

/// Spread of the guidance target at a fixed theta. SDS: D(x_pi + sigma_t eps, t)
/// over redrawn (t, eps). CDS: x0 target over redrawn t1 at the schedule's
/// t2 for `iteration`, with the run's eps*. Each statistic is the mean
/// coordinatewise sample std, averaged over views.
VarianceComparison guidance_variance_compare(const SceneParams& theta, const SceneTask& task,
                                             const DenoiserSet& denoisers, const DistillRunConfig& config,
                                             const NoiseSchedule& sched, int iteration, int samples);

// --- Ablations ----------------------------------------------------------------

inline constexpr std::array<const char*, 4> kAblationArms = {"random_t2", "fixed_t1", "resampled_noise", "full"};

struct AblationRow {
    std::string arm;
    std::uint64_t seed = 0;
    double final_error = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> rows; // arm-major, seeds in order
    std::array<double, 4> medians{};
};

/// Arm configuration derived from the base config.
DistillRunConfig ablation_arm(const DistillRunConfig& base, std::size_t arm);

AblationResult ablation_suite(const SceneTask& task, const DenoiserSet& denoisers, const DistillRunConfig& base,
                              const NoiseSchedule& sched, int seeds);

// --- Default multi-view recovery task ----------------------------------------

/// 16-d scene, four 8-d views, three modes, s = 0.3.
TaskSpec default_recovery_spec();

/// CDS, N = 2000, Adam lr 0.02, t in [0.1, 0.7], delta 0.1, Delta 0.2.
DistillRunConfig default_recovery_config();

/// Smallest projected distance between two modes over all views.
double min_projected_separation(const SceneTask& task);

} // namespace cdslab
