#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cdslab/errors.hpp"
#include "cdslab/mlp.hpp"

using namespace cdslab;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

GaussianMixture standard_1d() { return GaussianMixture({{1.0, scalar(0.0), 1.0, 0}}); }

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
    return std::accumulate(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(to), 0.0) /
           static_cast<double>(to - from);
}

TrainResult train_standard(double horizon, int steps, std::uint64_t seed) {
    const NoiseSchedule s(horizon);
    RandomStream init(seed);
    RandomStream rng(seed + 1);
    return train(MlpDenoiser::random(1, {32, 32}, init), standard_1d(), steps, 64, 2e-3, rng, s);
}

} // namespace

TEST_CASE("zero network outputs zero") {
    const NoiseSchedule s(10.0);
    const MlpDenoiser net({3, 5, 2});
    CHECK(net.parameter_count() == 3 * 5 + 5 + 5 * 2 + 2);
    CHECK(net.forward(Vector::Constant(2, 4.0), 2.0, s) == Vector::Zero(2));
    CHECK_THROWS(MlpDenoiser({3, 5, 3}));
}

TEST_CASE("output ignores x when the first layer ignores it") {
    const NoiseSchedule s(10.0);
    RandomStream rng(70);
    MlpDenoiser net = MlpDenoiser::random(2, {6}, rng);
    net.layers()[0].weight.leftCols(2).setZero();
    const Vector a = net.forward(Vector::Constant(2, -3.0), 1.5, s);
    const Vector b = net.forward(Vector::Constant(2, 8.0), 1.5, s);
    CHECK(a == b);
    CHECK(net.forward(Vector::Constant(2, 8.0), 3.0, s) != b);
}

TEST_CASE("forward guards") {
    const NoiseSchedule s(10.0);
    RandomStream rng(71);
    MlpDenoiser net = MlpDenoiser::random(1, {4}, rng);
    CHECK_THROWS_AS(net.forward(scalar(1.0), 0.0, s), DomainError);
    CHECK_THROWS_AS(net.forward(Vector::Zero(2), 1.0, s), ShapeError);
    Vector p = net.parameters();
    p[0] = NAN;
    net.set_parameters(p);
    CHECK_THROWS_AS(net.forward(scalar(1.0), 1.0, s), StateError);
}

TEST_CASE("parameter flattening and json round trip") {
    RandomStream rng(72);
    const MlpDenoiser net = MlpDenoiser::random(2, {5, 4}, rng);
    MlpDenoiser copy({3, 5, 4, 2});
    copy.set_parameters(net.parameters());
    CHECK(copy.parameters() == net.parameters());
    CHECK(copy.layers()[1].weight == net.layers()[1].weight);

    const MlpDenoiser back = MlpDenoiser::from_json(net.to_json());
    CHECK(back.widths() == net.widths());
    CHECK(back.parameters() == net.parameters());
    CHECK(net.to_json()["widths"] == nlohmann::json({3, 5, 4, 2}));

    nlohmann::json bad = net.to_json();
    bad["params"].erase(0);
    CHECK_THROWS(MlpDenoiser::from_json(bad));
}

TEST_CASE("dsm loss on a zero network") {
    const NoiseSchedule s(10.0);
    const MlpDenoiser net({2, 3, 1});
    DsmBatch b{{scalar(0.0)}, {1.0}, {scalar(0.0)}};
    const LossAndGrad lg = dsm_loss_and_grad(net, b, s);
    CHECK(lg.loss == 0.0);
    CHECK(lg.grad[lg.grad.size() - 1] == 0.0);
    CHECK_THROWS_AS(dsm_loss_and_grad(net, DsmBatch{}, s), InputError);
}

TEST_CASE("dsm gradient matches central finite differences") {
    const NoiseSchedule s(10.0);
    RandomStream rng(73);
    const MlpDenoiser net = MlpDenoiser::random(2, {7, 5}, rng);
    const GaussianMixture data({{0.5, Vector::Constant(2, -1.0), 0.5, 0}, {0.5, Vector::Constant(2, 2.0), 0.3, 0}});
    const DsmBatch batch = draw_dsm_batch(data, 16, rng, s);
    const LossAndGrad lg = dsm_loss_and_grad(net, batch, s);
    const Vector p = net.parameters();
    const double h = 1e-6;
    for (int k = 0; k < 10; ++k) {
        const Index i = static_cast<Index>(rng.index(static_cast<std::size_t>(p.size())));
        MlpDenoiser plus = net;
        MlpDenoiser minus = net;
        Vector pp = p;
        Vector pm = p;
        pp[i] += h;
        pm[i] -= h;
        plus.set_parameters(pp);
        minus.set_parameters(pm);
        const double fd = (dsm_loss_and_grad(plus, batch, s).loss - dsm_loss_and_grad(minus, batch, s).loss) / (2 * h);
        CHECK(std::abs(fd - lg.grad[i]) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
}

TEST_CASE("dsm batches draw times log-uniformly inside the horizon") {
    const NoiseSchedule s(10.0);
    RandomStream rng(74);
    const DsmBatch b = draw_dsm_batch(standard_1d(), 4000, rng, s);
    double log_sum = 0.0;
    for (double t : b.t) {
        REQUIRE(t >= 0.1 - 1e-12);
        REQUIRE(t <= 10.0);
        log_sum += std::log(t);
    }
    CHECK(std::abs(log_sum / 4000 - 0.5 * (std::log(0.1) + std::log(10.0))) < 0.05);
}

TEST_CASE("training basics") {
    const NoiseSchedule s(10.0);
    RandomStream rng(75);
    const MlpDenoiser net = MlpDenoiser::random(1, {4}, rng);
    const TrainResult none = train(net, standard_1d(), 0, 8, 1e-3, rng, s);
    CHECK(none.net.parameters() == net.parameters());
    CHECK(none.losses.empty());
    CHECK_THROWS_AS(train(net, GaussianMixture({{1.0, Vector::Zero(2), 1.0, 0}}), 1, 8, 1e-3, rng, s), ShapeError);

    const GaussianMixture far({{1.0, scalar(1e5), 1.0, 0}});
    CHECK_THROWS_AS(train(net, far, 5, 8, 1e-3, rng, s), DivergenceError);
}

TEST_CASE("training on a point mass learns the atom") {
    const NoiseSchedule s(10.0);
    RandomStream init(76);
    RandomStream rng(77);
    const GaussianMixture point({{1.0, scalar(1.7), kPointMassScale, 0}});
    const TrainResult r = train(MlpDenoiser::random(1, {16}, init), point, 1500, 32, 5e-3, rng, s);
    CHECK(std::abs(r.net.forward(scalar(0.4), 2.0, s)[0] - 1.7) <= 0.05);
}

TEST_CASE("training on a standard Gaussian") {
    const NoiseSchedule s(10.0);
    RandomStream init(78);
    RandomStream rng(79);
    const TrainResult first = train(MlpDenoiser::random(1, {32, 32}, init), standard_1d(), 4000, 128, 2e-3, rng, s);
    CHECK(mean_of(first.losses, first.losses.size() - 100, first.losses.size()) < mean_of(first.losses, 0, 100));
    // Step-decayed learning rate to get below the constant-rate noise floor.
    MlpDenoiser net = first.net;
    net = train(net, standard_1d(), 2000, 128, 5e-4, rng, s).net;
    net = train(net, standard_1d(), 2000, 128, 1e-4, rng, s).net;
    const LearnedDenoiser d(net, s);
    CHECK(std::abs(d(scalar(2.0), 1.0)[0] - 1.0) <= 0.1);

    // Analytic posterior mean x / (1 + sigma^2) on a grid spanning two stds and sigma in [0.1, T].
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i) {
        const double x = -2.0 + 0.2 * i;
        for (int j = 0; j <= 20; ++j) {
            const double sigma = 0.1 * std::pow(100.0, j / 20.0);
            worst = std::max(worst, std::abs(d(scalar(x), sigma)[0] - x / (1.0 + sigma * sigma)));
        }
    }
    CHECK(worst <= 0.1);
    CHECK_THROWS_AS(d(scalar(1.0), 1.0, Guidance{1, std::nullopt}), ConditionError);
}

TEST_CASE("training cuts the loss to a fifth of its initial value") {
    // Horizon 1: over t in [0.01, 1] the Bayes loss floor is well below 0.2 of the initial loss.
    const TrainResult r = train_standard(1.0, 5000, 79);
    CHECK(mean_of(r.losses, r.losses.size() - 100, r.losses.size()) <= 0.2 * mean_of(r.losses, 0, 10));
}
