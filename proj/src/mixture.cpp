#include "cdslab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

namespace cdslab {

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw ConfigError("mixture needs at least one component");
    dim_ = components_.front().mean.size();
    if (dim_ == 0) throw ConfigError("mixture component mean is empty");
    double total = 0.0;
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const auto& c = components_[i];
        const std::string where = "component " + std::to_string(i) + ": ";
        if (c.mean.size() != dim_) throw ConfigError(where + "mean dimension differs from component 0");
        if (!c.mean.allFinite()) throw ConfigError(where + "mean is not finite");
        if (!(c.scale > 0.0) || !std::isfinite(c.scale)) throw ConfigError(where + "scale must be positive");
        if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw ConfigError(where + "weight must be positive");
        if (c.label < 0) throw ConfigError(where + "label must be nonnegative");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw ConfigError("mixture weights sum to " + std::to_string(total) + ", expected 1");
    }
}

bool GaussianMixture::has_label(int label) const {
    return std::any_of(components_.begin(), components_.end(),
                       [label](const MixtureComponent& c) { return c.label == label; });
}

std::vector<int> GaussianMixture::labels() const {
    std::set<int> seen;
    for (const auto& c : components_) seen.insert(c.label);
    return {seen.begin(), seen.end()};
}

GaussianMixture GaussianMixture::conditioned(int label) const {
    std::vector<MixtureComponent> kept;
    double mass = 0.0;
    for (const auto& c : components_) {
        if (c.label == label) {
            kept.push_back(c);
            mass += c.weight;
        }
    }
    if (kept.empty()) throw ConditionError("no mixture component has label " + std::to_string(label));
    double total = 0.0;
    for (auto& c : kept) {
        c.weight /= mass;
        total += c.weight;
    }
    // Absorb rounding so the renormalized weights pass the constructor check.
    kept.back().weight += 1.0 - total;
    return GaussianMixture(std::move(kept));
}

Vector perturb(const Vector& x0, double t, const Vector& eps, const NoiseSchedule& sched) {
    require_same_dim(x0, eps, "perturb");
    return x0 + sched.sigma(t) * eps;
}

namespace {

// Log responsibilities (unnormalized) of each component for x at noise sigma.
std::vector<double> log_weights(const GaussianMixture& gmm, const Vector& x, double sigma) {
    const auto& comps = gmm.components();
    std::vector<double> lw(comps.size());
    const double d = static_cast<double>(gmm.dim());
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const double var = comps[i].scale * comps[i].scale + sigma * sigma;
        lw[i] = std::log(comps[i].weight) - 0.5 * (x - comps[i].mean).squaredNorm() / var -
                0.5 * d * std::log(2.0 * std::numbers::pi * var);
    }
    return lw;
}

double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double a : v) s += std::exp(a - m);
    return m + std::log(s);
}

Vector posterior_mean(const GaussianMixture& gmm, const Vector& x, double sigma) {
    if (sigma == 0.0) return x;
    const auto lw = log_weights(gmm, x, sigma);
    const double norm = log_sum_exp(lw);
    Vector out = Vector::Zero(gmm.dim());
    const auto& comps = gmm.components();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const double r = std::exp(lw[i] - norm);
        if (r == 0.0) continue;
        const double s2 = comps[i].scale * comps[i].scale;
        const double shrink = s2 / (s2 + sigma * sigma);
        out += r * (comps[i].mean + shrink * (x - comps[i].mean));
    }
    return out;
}

void check_query(const GaussianMixture& gmm, const DenoiserQuery& q) {
    if (q.x.size() != gmm.dim()) {
        throw ShapeError("query dimension " + std::to_string(q.x.size()) + " vs mixture dimension " +
                         std::to_string(gmm.dim()));
    }
    if (!q.x.allFinite()) throw DomainError("query point is not finite");
    if (q.cfg_w && !q.label) throw ConditionError("guidance weight given without a label");
}

} // namespace

Vector denoise(const GaussianMixture& gmm, const DenoiserQuery& q, const NoiseSchedule& sched) {
    check_query(gmm, q);
    const double sigma = sched.sigma(q.t);
    if (!q.label) return posterior_mean(gmm, q.x, sigma);
    const Vector cond = posterior_mean(gmm.conditioned(*q.label), q.x, sigma);
    if (!q.cfg_w || *q.cfg_w == 1.0) return cond;
    const Vector uncond = posterior_mean(gmm, q.x, sigma);
    if (*q.cfg_w == 0.0) return uncond;
    return uncond + *q.cfg_w * (cond - uncond);
}

Vector score(const GaussianMixture& gmm, const DenoiserQuery& q, const NoiseSchedule& sched) {
    const double sigma = sched.sigma(q.t);
    if (sigma == 0.0) throw SingularityError("score is undefined at sigma_t = 0");
    return (denoise(gmm, q, sched) - q.x) / (sigma * sigma);
}

double log_density(const GaussianMixture& gmm, const Vector& x, double t, const NoiseSchedule& sched) {
    if (x.size() != gmm.dim()) throw ShapeError("log_density: point dimension differs from mixture");
    return log_sum_exp(log_weights(gmm, x, sched.sigma(t)));
}

namespace {

Vector draw_from(const GaussianMixture& gmm, RandomStream& rng) {
    const auto& comps = gmm.components();
    double u = rng.uniform();
    std::size_t pick = comps.size() - 1;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        if (u < comps[i].weight) {
            pick = i;
            break;
        }
        u -= comps[i].weight;
    }
    return comps[pick].mean + comps[pick].scale * rng.normal_vector(gmm.dim());
}

} // namespace

Vector sample_data(const GaussianMixture& gmm, RandomStream& rng, std::optional<int> label) {
    if (label) return draw_from(gmm.conditioned(*label), rng);
    return draw_from(gmm, rng);
}

} // namespace cdslab
