#pragma once

#include <vector>

#include "cdslab/rng.hpp"

namespace cdslab {

enum class ScheduleKind {
    edm_linear, // sigma_t = t
};

/// Noise level sigma_t over the diffusion horizon [0, T].
class NoiseSchedule {
public:
    explicit NoiseSchedule(double horizon, ScheduleKind kind = ScheduleKind::edm_linear);

    double horizon() const noexcept { return horizon_; }
    ScheduleKind kind() const noexcept { return kind_; }

    double sigma(double t) const;
    double sigma_dot(double t) const;

    /// n_steps + 1 times, uniform in t, from T down to exactly 0.
    std::vector<double> uniform_grid(int n_steps) const;

private:
    void check_time(double t) const;

    double horizon_;
    ScheduleKind kind_;
};

/// Iteration-indexed time schedule. Every time is a fraction of the horizon.
struct ScheduleParams {
    double t_min = 0.1;
    double t_max = 0.7;
    double delta = 0.1;     // lower offset of t1 above t2
    double cap_delta = 0.2; // upper offset of t1 above t2
    int total_iters = 2000;

    /// Throws ConfigError describing every violated constraint.
    void validate() const;
};

/// t2 = T * (t_max - (t_max - t_min) * sqrt(i / N)).
double t2_of_iter(const ScheduleParams& params, int i, double horizon);

/// Uniform draw in [t2 + delta, t2 + cap_delta]; all arguments in absolute time.
double sample_t1(double t2, double delta, double cap_delta, RandomStream& rng);

/// Linear guidance annealing from w_start at i = 0 to w_end at i = N.
double cfg_weight(int i, int total, double w_start, double w_end);

} // namespace cdslab
