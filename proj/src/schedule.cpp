#include "cdslab/schedule.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace cdslab {

NoiseSchedule::NoiseSchedule(double horizon, ScheduleKind kind) : horizon_(horizon), kind_(kind) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ConfigError("schedule horizon must be a positive finite number, got " + std::to_string(horizon));
    }
}

void NoiseSchedule::check_time(double t) const {
    if (!(t >= 0.0 && t <= horizon_)) {
        std::ostringstream os;
        os << "time " << t << " outside [0, " << horizon_ << "]";
        throw DomainError(os.str());
    }
}

double NoiseSchedule::sigma(double t) const {
    check_time(t);
    return t;
}

double NoiseSchedule::sigma_dot(double t) const {
    check_time(t);
    return 1.0;
}

std::vector<double> NoiseSchedule::uniform_grid(int n_steps) const {
    if (n_steps < 1) throw DomainError("time grid needs at least one step");
    std::vector<double> grid(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) {
        grid[static_cast<std::size_t>(i)] = horizon_ * static_cast<double>(n_steps - i) / n_steps;
    }
    return grid;
}

void ScheduleParams::validate() const {
    std::vector<std::string> problems;
    if (!(t_min >= 0.0 && t_min < 1.0)) problems.push_back("t_min must lie in [0, 1)");
    if (!(t_max > t_min && t_max <= 1.0)) problems.push_back("t_max must lie in (t_min, 1]");
    if (!(delta >= 0.0)) problems.push_back("delta must be >= 0");
    if (!(cap_delta > 0.0)) problems.push_back("cap_delta must be > 0");
    // delta == cap_delta is the degenerate fixed-offset schedule.
    if (delta > cap_delta) problems.push_back("delta and cap_delta: delta must not exceed cap_delta");
    if (t_max + cap_delta > 1.0 + 1e-12) problems.push_back("t_max and cap_delta: t_max + cap_delta must be <= 1");
    if (total_iters < 0) problems.push_back("iters must be >= 0");
    if (!problems.empty()) {
        std::string msg = "invalid schedule:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw ConfigError(msg);
    }
}

double t2_of_iter(const ScheduleParams& params, int i, double horizon) {
    if (params.total_iters < 1) throw DomainError("t2 schedule needs N >= 1");
    if (i < 0 || i > params.total_iters) {
        throw DomainError("iteration " + std::to_string(i) + " outside [0, " + std::to_string(params.total_iters) + "]");
    }
    const double frac = std::sqrt(static_cast<double>(i) / params.total_iters);
    return horizon * (params.t_max - (params.t_max - params.t_min) * frac);
}

double sample_t1(double t2, double delta, double cap_delta, RandomStream& rng) {
    if (delta > cap_delta) throw ConfigError("sample_t1: delta exceeds cap_delta");
    if (delta == cap_delta) return t2 + delta;
    return rng.uniform(t2 + delta, t2 + cap_delta);
}

double cfg_weight(int i, int total, double w_start, double w_end) {
    if (total < 1) throw DomainError("cfg annealing needs N >= 1");
    return w_start + (w_end - w_start) * (static_cast<double>(i) / total);
}

} // namespace cdslab
