#pragma once

#include <functional>
#include <optional>

#include "cdslab/types.hpp"

namespace cdslab {

/// Conditioning for a denoiser call: optional label y and optional
/// classifier-free guidance weight (which requires y).
struct Guidance {
    std::optional<int> label;
    std::optional<double> cfg_w;
};

/// Estimator of E[x0 | x_t]: the D_phi(x, t, y) every sampler and
/// distillation loss is written against.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual Index dim() const = 0;
    virtual Vector denoise(const Vector& x, double t, const Guidance& guidance) const = 0;

    Vector operator()(const Vector& x, double t, const Guidance& guidance = {}) const {
        return denoise(x, t, guidance);
    }
};

/// Wraps a callable; handy for degenerate denoisers in tests.
class FunctionDenoiser final : public Denoiser {
public:
    using Fn = std::function<Vector(const Vector&, double, const Guidance&)>;

    FunctionDenoiser(Index dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

    Index dim() const override { return dim_; }
    Vector denoise(const Vector& x, double t, const Guidance& g) const override { return fn_(x, t, g); }

private:
    Index dim_;
    Fn fn_;
};

} // namespace cdslab
