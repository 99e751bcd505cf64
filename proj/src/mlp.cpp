#include "cdslab/mlp.hpp"

#include <cmath>
#include <sstream>

namespace cdslab {

MlpDenoiser::MlpDenoiser(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ConfigError("mlp needs at least input and output widths");
    for (int w : widths_) {
        if (w < 1) throw ConfigError("mlp layer widths must be positive");
    }
    if (widths_.front() != widths_.back() + 1) throw ConfigError("mlp input width must be output width + 1");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        layers_.push_back({Matrix::Zero(widths_[l + 1], widths_[l]), Vector::Zero(widths_[l + 1])});
    }
}

MlpDenoiser MlpDenoiser::random(Index dim, const std::vector<int>& hidden, RandomStream& rng) {
    std::vector<int> widths;
    widths.push_back(static_cast<int>(dim) + 1);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(static_cast<int>(dim));
    MlpDenoiser net(widths);
    for (auto& layer : net.layers_) {
        const double sd = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        for (Index c = 0; c < layer.weight.cols(); ++c) {
            for (Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = sd * rng.normal();
        }
    }
    return net;
}

Index MlpDenoiser::parameter_count() const {
    Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

Vector MlpDenoiser::parameters() const {
    Vector flat(parameter_count());
    Index k = 0;
    for (const auto& l : layers_) {
        flat.segment(k, l.weight.size()) = l.weight.reshaped();
        k += l.weight.size();
        flat.segment(k, l.bias.size()) = l.bias;
        k += l.bias.size();
    }
    return flat;
}

void MlpDenoiser::set_parameters(const Vector& flat) {
    if (flat.size() != parameter_count()) throw ShapeError("mlp parameter vector has the wrong length");
    Index k = 0;
    for (auto& l : layers_) {
        l.weight.reshaped() = flat.segment(k, l.weight.size());
        k += l.weight.size();
        l.bias = flat.segment(k, l.bias.size());
        k += l.bias.size();
    }
}

namespace {

Vector network_input(const Vector& x, double sigma) {
    Vector in(x.size() + 1);
    in.head(x.size()) = x;
    in[x.size()] = std::log(sigma);
    return in;
}

} // namespace

Vector MlpDenoiser::forward(const Vector& x, double t, const NoiseSchedule& sched) const {
    if (x.size() != dim()) throw ShapeError("mlp input dimension differs from network");
    const double sigma = sched.sigma(t);
    if (!(sigma > 0.0)) throw DomainError("mlp denoiser needs sigma_t > 0");
    for (const auto& l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) throw StateError("mlp has non-finite parameters");
    }
    Vector h = network_input(x, sigma);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = layers_[l].weight * h + layers_[l].bias;
        if (l + 1 < layers_.size()) h = h.array().tanh();
    }
    return h;
}

nlohmann::json MlpDenoiser::to_json() const {
    nlohmann::json j;
    j["format"] = "cdslab-mlp";
    j["widths"] = widths_;
    j["activation"] = "tanh";
    const Vector p = parameters();
    j["params"] = std::vector<double>(p.data(), p.data() + p.size());
    return j;
}

MlpDenoiser MlpDenoiser::from_json(const nlohmann::json& j) {
    try {
        if (j.at("activation").get<std::string>() != "tanh") throw ConfigError("unsupported mlp activation");
        MlpDenoiser net(j.at("widths").get<std::vector<int>>());
        const auto values = j.at("params").get<std::vector<double>>();
        net.set_parameters(Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed mlp file: ") + e.what());
    }
}

LossAndGrad dsm_loss_and_grad(const MlpDenoiser& net, const DsmBatch& batch, const NoiseSchedule& sched) {
    const std::size_t n = batch.x0.size();
    if (n == 0) throw InputError("dsm loss on an empty batch");
    if (batch.t.size() != n || batch.eps.size() != n) throw ShapeError("dsm batch fields have different lengths");

    const auto& layers = net.layers();
    const std::size_t depth = layers.size();
    std::vector<Matrix> grad_w;
    std::vector<Vector> grad_b;
    for (const auto& l : layers) {
        grad_w.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        grad_b.push_back(Vector::Zero(l.bias.size()));
    }

    LossAndGrad out;
    std::vector<Vector> acts(depth + 1);
    for (std::size_t b = 0; b < n; ++b) {
        require_same_dim(batch.x0[b], batch.eps[b], "dsm batch");
        const double sigma = sched.sigma(batch.t[b]);
        if (!(sigma > 0.0)) throw DomainError("dsm batch needs t > 0");
        acts[0] = network_input(batch.x0[b] + sigma * batch.eps[b], sigma);
        for (std::size_t l = 0; l < depth; ++l) {
            Vector z = layers[l].weight * acts[l] + layers[l].bias;
            acts[l + 1] = l + 1 < depth ? Vector(z.array().tanh()) : z;
        }
        const Vector residual = acts[depth] - batch.x0[b];
        out.loss += residual.squaredNorm();

        // Backward: delta is dLoss_b / dz for the current layer.
        Vector delta = 2.0 * residual;
        for (std::size_t l = depth; l-- > 0;) {
            grad_w[l] += delta * acts[l].transpose();
            grad_b[l] += delta;
            if (l > 0) {
                delta = (layers[l].weight.transpose() * delta).cwiseProduct(
                    (1.0 - acts[l].array().square()).matrix());
            }
        }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    out.loss *= inv_n;
    out.grad.resize(net.parameter_count());
    Index k = 0;
    for (std::size_t l = 0; l < depth; ++l) {
        out.grad.segment(k, grad_w[l].size()) = inv_n * grad_w[l].reshaped();
        k += grad_w[l].size();
        out.grad.segment(k, grad_b[l].size()) = inv_n * grad_b[l];
        k += grad_b[l].size();
    }
    return out;
}

DsmBatch draw_dsm_batch(const GaussianMixture& gmm, int size, RandomStream& rng, const NoiseSchedule& sched) {
    DsmBatch batch;
    const double lo = std::log(0.01 * sched.horizon());
    const double hi = std::log(sched.horizon());
    for (int i = 0; i < size; ++i) {
        batch.x0.push_back(sample_data(gmm, rng));
        batch.t.push_back(std::min(std::exp(rng.uniform(lo, hi)), sched.horizon()));
        batch.eps.push_back(rng.normal_vector(gmm.dim()));
    }
    return batch;
}

TrainResult train(MlpDenoiser net, const GaussianMixture& gmm, int steps, int batch, double lr, RandomStream& rng,
                  const NoiseSchedule& sched) {
    if (steps < 0) throw ConfigError("training steps must be >= 0");
    if (batch < 1) throw ConfigError("training batch must be >= 1");
    if (gmm.dim() != net.dim()) throw ShapeError("training data dimension differs from network");
    OptimizerConfig oc;
    oc.kind = OptimizerKind::adam;
    oc.lr = lr;
    Optimizer optimizer(oc, net.parameter_count());
    Vector params = net.parameters();
    TrainResult result{net, {}};
    result.losses.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        const auto lg = dsm_loss_and_grad(result.net, draw_dsm_batch(gmm, batch, rng, sched), sched);
        if (!std::isfinite(lg.loss) || lg.loss > 1e6) {
            std::ostringstream os;
            os << "training diverged at step " << s << " (loss " << lg.loss << ", |grad| " << lg.grad.norm() << ")";
            throw DivergenceError(os.str());
        }
        result.losses.push_back(lg.loss);
        optimizer.update(params, lg.grad);
        result.net.set_parameters(params);
    }
    return result;
}

Vector LearnedDenoiser::denoise(const Vector& x, double t, const Guidance& g) const {
    if (g.label || g.cfg_w) throw ConditionError("learned denoiser is unconditional");
    return net_.forward(x, t, sched_);
}

} // namespace cdslab
