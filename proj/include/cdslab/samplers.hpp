#pragma once

#include <vector>

#include "cdslab/denoiser.hpp"
#include "cdslab/rng.hpp"
#include "cdslab/schedule.hpp"

namespace cdslab {

/// Reverse-time iterates. `times` is strictly decreasing; `denoised[i]` is the
/// denoiser output at (states[i], times[i]). At t = 0 the denoiser is the
/// identity, so the last entry equals its state.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> denoised;

    const Vector& endpoint() const { return states.back(); }
};

/// One Euler step of the probability-flow ODE from t1 down to t2:
/// x + (sigma_t2 - sigma_t1) / sigma_t1 * (x - D(x, t1)).
Vector euler_ode_step(const Denoiser& denoiser, const Vector& x_t1, double t1, double t2, const NoiseSchedule& sched,
                      const Guidance& guidance = {});

/// Deterministic Euler integration over the uniform grid T -> 0.
Trajectory ode_sample(const Denoiser& denoiser, const Vector& x_T, int n_steps, const NoiseSchedule& sched,
                      const Guidance& guidance = {});

/// Stochastic sampling by alternating denoising and fresh full-sigma noise
/// injection on the grid T = t_1 > ... > t_N = 0:
///   x_{t_i} = xhat^{i-1} + sigma_{t_i} eps_i,   xhat^i = D(x_{t_i}, t_i),   xhat^0 = 0.
/// One eps is drawn per grid point, including the final sigma = 0 point.
Trajectory ancestral_sde_sample(const Denoiser& denoiser, int n_steps, const NoiseSchedule& sched, RandomStream& rng,
                                const Guidance& guidance = {});

/// Closed-form PF-ODE endpoint for single-Gaussian data N(mean, scale^2 I):
/// mean + (x_t - mean) * scale / sqrt(scale^2 + sigma_t^2).
Vector gaussian_ode_oracle(const Vector& x_t, double t, const Vector& mean, double scale, const NoiseSchedule& sched);

} // namespace cdslab
