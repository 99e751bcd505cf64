#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cdslab/denoiser.hpp"
#include "cdslab/mixture.hpp"
#include "cdslab/optimizer.hpp"

namespace cdslab {

/// Fully connected tanh network mapping [x, log sigma_t] (d + 1 inputs) to a
/// denoised estimate (d outputs). The output layer is linear.
class MlpDenoiser {
public:
    struct Layer {
        Matrix weight; // out x in
        Vector bias;
    };

    /// All parameters zero. `widths` = {d + 1, hidden..., d}.
    explicit MlpDenoiser(std::vector<int> widths);

    /// Weights ~ N(0, 1 / fan_in), zero biases.
    static MlpDenoiser random(Index dim, const std::vector<int>& hidden, RandomStream& rng);

    Index dim() const noexcept { return widths_.back(); }
    const std::vector<int>& widths() const noexcept { return widths_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    Index parameter_count() const;
    /// Flattened per layer: weight (column-major), then bias.
    Vector parameters() const;
    void set_parameters(const Vector& flat);

    Vector forward(const Vector& x, double t, const NoiseSchedule& sched) const;

    nlohmann::json to_json() const;
    static MlpDenoiser from_json(const nlohmann::json& j);

private:
    std::vector<int> widths_;
    std::vector<Layer> layers_;
};

/// One denoising-score-matching batch; entries are aligned by index.
struct DsmBatch {
    std::vector<Vector> x0;
    std::vector<double> t;
    std::vector<Vector> eps;
};

struct LossAndGrad {
    double loss = 0.0;
    Vector grad; // same layout as MlpDenoiser::parameters()
};

/// mean_b |f(x0_b + sigma_{t_b} eps_b, t_b) - x0_b|^2 and its parameter gradient.
LossAndGrad dsm_loss_and_grad(const MlpDenoiser& net, const DsmBatch& batch, const NoiseSchedule& sched);

/// Batch with x0 ~ gmm, t log-uniform on [0.01 T, T], eps ~ N(0, I).
DsmBatch draw_dsm_batch(const GaussianMixture& gmm, int size, RandomStream& rng, const NoiseSchedule& sched);

struct TrainResult {
    MlpDenoiser net;
    std::vector<double> losses; // one per step
};

/// `steps` Adam updates on fresh batches. A loss above 1e6 raises DivergenceError.
TrainResult train(MlpDenoiser net, const GaussianMixture& gmm, int steps, int batch, double lr, RandomStream& rng,
                  const NoiseSchedule& sched);

/// An MlpDenoiser behind the Denoiser interface. Unconditional only.
class LearnedDenoiser final : public Denoiser {
public:
    LearnedDenoiser(MlpDenoiser net, NoiseSchedule sched) : net_(std::move(net)), sched_(sched) {}

    Index dim() const override { return net_.dim(); }
    Vector denoise(const Vector& x, double t, const Guidance& g) const override;

    const MlpDenoiser& net() const noexcept { return net_; }

private:
    MlpDenoiser net_;
    NoiseSchedule sched_;
};

} // namespace cdslab
