#include "cdslab/samplers.hpp"

#include <cmath>
#include <string>

namespace cdslab {

namespace {

// The exact posterior mean is the identity at sigma = 0; learned denoisers
// cannot be evaluated there, so the identity is applied without a call.
Vector denoise_or_identity(const Denoiser& denoiser, const Vector& x, double t, const NoiseSchedule& sched,
                           const Guidance& guidance) {
    if (sched.sigma(t) == 0.0) return x;
    return denoiser(x, t, guidance);
}

void check_finite(const Vector& x, const char* where) {
    if (!x.allFinite()) throw DomainError(std::string(where) + ": iterate became non-finite");
}

} // namespace

Vector euler_ode_step(const Denoiser& denoiser, const Vector& x_t1, double t1, double t2, const NoiseSchedule& sched,
                      const Guidance& guidance) {
    if (t2 > t1) throw OrderError("euler step requires t1 >= t2");
    const double s1 = sched.sigma(t1);
    const double s2 = sched.sigma(t2);
    if (s1 == 0.0) throw SingularityError("euler step from sigma_t1 = 0");
    if (x_t1.size() != denoiser.dim()) throw ShapeError("euler step: state dimension differs from denoiser");
    const Vector d = (x_t1 - denoiser(x_t1, t1, guidance)) / s1;
    return x_t1 + (s2 - s1) * d;
}

Trajectory ode_sample(const Denoiser& denoiser, const Vector& x_T, int n_steps, const NoiseSchedule& sched,
                      const Guidance& guidance) {
    if (n_steps < 1) throw DomainError("ode_sample needs n_steps >= 1");
    const auto grid = sched.uniform_grid(n_steps);
    Trajectory traj;
    traj.times = grid;
    traj.states.reserve(grid.size());
    traj.denoised.reserve(grid.size());
    Vector x = x_T;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const Vector target = denoiser(x, grid[i], guidance);
        const double s1 = sched.sigma(grid[i]);
        const double s2 = sched.sigma(grid[i + 1]);
        traj.states.push_back(x);
        traj.denoised.push_back(target);
        // Same arithmetic as euler_ode_step, reusing the denoiser call.
        x = x + (s2 - s1) * ((x - target) / s1);
        check_finite(x, "ode_sample");
    }
    traj.states.push_back(x);
    traj.denoised.push_back(x);
    return traj;
}

Trajectory ancestral_sde_sample(const Denoiser& denoiser, int n_steps, const NoiseSchedule& sched, RandomStream& rng,
                                const Guidance& guidance) {
    if (n_steps < 2) throw DomainError("ancestral_sde_sample needs n_steps >= 2");
    const auto grid = sched.uniform_grid(n_steps - 1);
    Trajectory traj;
    traj.times = grid;
    traj.states.reserve(grid.size());
    traj.denoised.reserve(grid.size());
    Vector x_hat = Vector::Zero(denoiser.dim());
    for (double t : grid) {
        const Vector x_t = x_hat + sched.sigma(t) * rng.normal_vector(denoiser.dim());
        x_hat = denoise_or_identity(denoiser, x_t, t, sched, guidance);
        check_finite(x_hat, "ancestral_sde_sample");
        traj.states.push_back(x_t);
        traj.denoised.push_back(x_hat);
    }
    return traj;
}

Vector gaussian_ode_oracle(const Vector& x_t, double t, const Vector& mean, double scale, const NoiseSchedule& sched) {
    require_same_dim(x_t, mean, "gaussian_ode_oracle");
    const double sigma = sched.sigma(t);
    return mean + (x_t - mean) * (scale / std::sqrt(scale * scale + sigma * sigma));
}

} // namespace cdslab
