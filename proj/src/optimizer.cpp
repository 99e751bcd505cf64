#include "cdslab/optimizer.hpp"

#include <cmath>

namespace cdslab {

Optimizer::Optimizer(OptimizerConfig config, Index n)
    : config_(config), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {
    if (!(config_.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (config_.kind == OptimizerKind::adam) {
        if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) || !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
            throw ConfigError("adam moment coefficients must lie in [0, 1)");
        }
    }
}

void Optimizer::update(Vector& params, const Vector& grad) {
    require_same_dim(params, grad, "optimizer update");
    if (grad.size() != m_.size()) throw ShapeError("optimizer update: gradient size differs from optimizer state");
    if (!grad.allFinite()) throw DivergenceError("non-finite gradient at optimizer step " + std::to_string(step_));
    ++step_;
    if (config_.kind == OptimizerKind::sgd) {
        params -= config_.lr * grad;
        return;
    }
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    params.array() -= config_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.eps);
}

} // namespace cdslab
