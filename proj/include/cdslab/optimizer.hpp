#pragma once

#include "cdslab/types.hpp"

namespace cdslab {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 0.02;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First-order optimizer state for one parameter vector.
///   sgd:  p <- p - lr * g
///   adam: bias-corrected first/second moments.
class Optimizer {
public:
    Optimizer(OptimizerConfig config, Index n);

    /// Throws DivergenceError on a non-finite gradient; `params` is left untouched then.
    void update(Vector& params, const Vector& grad);

    const OptimizerConfig& config() const noexcept { return config_; }
    long steps() const noexcept { return step_; }

private:
    OptimizerConfig config_;
    Vector m_;
    Vector v_;
    long step_ = 0;
};

} // namespace cdslab
