#pragma once

#include <optional>
#include <vector>

#include "cdslab/denoiser.hpp"
#include "cdslab/rng.hpp"
#include "cdslab/schedule.hpp"

namespace cdslab {

/// Scale used for point-mass components; keeps shrinkage factors finite.
inline constexpr double kPointMassScale = 1e-12;

struct MixtureComponent {
    double weight = 1.0;
    Vector mean;
    double scale = 1.0; // isotropic standard deviation
    int label = 0;
};

/// Isotropic Gaussian mixture p_data. Immutable once constructed.
class GaussianMixture {
public:
    /// Validates weights (sum to 1 within 1e-12), scales, means and dimensions.
    explicit GaussianMixture(std::vector<MixtureComponent> components);

    Index dim() const noexcept { return dim_; }
    const std::vector<MixtureComponent>& components() const noexcept { return components_; }

    bool has_label(int label) const;
    /// Distinct labels in ascending order.
    std::vector<int> labels() const;

    /// Components carrying `label`, weights renormalized. Throws ConditionError
    /// when no component has that label.
    GaussianMixture conditioned(int label) const;

private:
    std::vector<MixtureComponent> components_;
    Index dim_ = 0;
};

struct DenoiserQuery {
    Vector x;
    double t = 0.0;
    std::optional<int> label;
    std::optional<double> cfg_w;
};

/// x0 + sigma_t * eps.
Vector perturb(const Vector& x0, double t, const Vector& eps, const NoiseSchedule& sched);

/// Exact posterior mean E[x0 | x_t = x] under the mixture; with a label the
/// mixture is conditioned first, with cfg_w the result is
/// D_uncond + w * (D_cond - D_uncond).
Vector denoise(const GaussianMixture& gmm, const DenoiserQuery& q, const NoiseSchedule& sched);

/// (denoise - x) / sigma_t^2. Undefined at sigma_t = 0.
Vector score(const GaussianMixture& gmm, const DenoiserQuery& q, const NoiseSchedule& sched);

/// log p_t(x): the mixture with per-component variance s_i^2 + sigma_t^2.
double log_density(const GaussianMixture& gmm, const Vector& x, double t, const NoiseSchedule& sched);

/// Draw x0 ~ p_data, or p_data( . | y) when a label is given.
Vector sample_data(const GaussianMixture& gmm, RandomStream& rng, std::optional<int> label = std::nullopt);

/// The mixture oracle behind the Denoiser interface.
class MixtureDenoiser final : public Denoiser {
public:
    MixtureDenoiser(GaussianMixture gmm, NoiseSchedule sched) : gmm_(std::move(gmm)), sched_(sched) {}

    Index dim() const override { return gmm_.dim(); }
    Vector denoise(const Vector& x, double t, const Guidance& g) const override {
        return cdslab::denoise(gmm_, DenoiserQuery{x, t, g.label, g.cfg_w}, sched_);
    }

    const GaussianMixture& mixture() const noexcept { return gmm_; }

private:
    GaussianMixture gmm_;
    NoiseSchedule sched_;
};

} // namespace cdslab
