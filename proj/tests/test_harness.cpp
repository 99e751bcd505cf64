#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdlib>

#include "cdslab/errors.hpp"
#include "cdslab/harness.hpp"

using namespace cdslab;

namespace {

SceneTask point_mass_task(std::size_t modes) {
    RandomStream rng(100);
    TaskSpec spec;
    spec.views = 2;
    spec.d_img = 2;
    spec.d_scene = 3;
    spec.scale = kPointMassScale;
    for (std::size_t j = 0; j < modes; ++j) spec.modes.push_back(4.0 * rng.normal_vector(3));
    return make_task(spec);
}

SceneTask small_task() {
    RandomStream rng(101);
    TaskSpec spec;
    spec.seed = 4;
    spec.views = 2;
    spec.d_img = 2;
    spec.d_scene = 3;
    spec.scale = 0.3;
    for (int j = 0; j < 2; ++j) spec.modes.push_back(4.0 * rng.normal_vector(3));
    return make_task(spec);
}

DistillRunConfig short_config() {
    DistillRunConfig c;
    c.optimizer.kind = OptimizerKind::sgd;
    c.schedule.total_iters = 40;
    c.seed = 9;
    c.poses_per_iter = 2;
    return c;
}

} // namespace

TEST_CASE("equivalence on a point mass is exact and constant") {
    const NoiseSchedule s(10.0);
    const Vector mu = Vector::LinSpaced(3, -1.0, 1.0);
    const MixtureDenoiser d(GaussianMixture({{1.0, mu, kPointMassScale, 0}}), s);
    const EquivalenceResult r = sds_sde_compare(d, 16, 4, 4, s);
    CHECK(r.max_deviation == 0.0);
    for (const auto& v : r.sds_iterates) CHECK((v - mu).norm() <= 1e-9);
}

TEST_CASE("equivalence on a Gaussian with shared noise") {
    const NoiseSchedule s(10.0);
    const MixtureDenoiser d(GaussianMixture({{1.0, Vector::Constant(2, 0.5), 1.0, 0}}), s);
    CHECK(sds_sde_equivalence(d, 64, 11, s) <= 1e-12);
    CHECK(sds_sde_compare(d, 64, 11, 12, s).max_deviation > 0.0);
}

TEST_CASE("statistics helpers") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(interquartile_range({1.0, 2.0, 3.0, 4.0, 5.0}) == doctest::Approx(2.0));
    CHECK_THROWS(median({}));

    const std::array<double, 4> x{0.05, 0.1, 0.2, 0.4};
    std::array<double, 4> y{};
    for (std::size_t i = 0; i < 4; ++i) y[i] = 3.0 * x[i] * x[i];
    CHECK(log_log_slope(x, y) == doctest::Approx(2.0).epsilon(1e-12));
    const std::array<double, 2> same{1.0, 1.0};
    CHECK_THROWS(log_log_slope(same, same));
}

TEST_CASE("scan at an exact mode stays at zero error") {
    const NoiseSchedule s(10.0);
    const SceneTask task = point_mass_task(1);
    DistillRunConfig cfg = short_config();
    cfg.init_theta = task.modes[0];
    const std::array<double, 3> deltas{0.1, 0.2, 0.3};
    const ScanResult r = theorem1_scan(cfg, task, oracle_denoisers(task, s), s, deltas, 2);
    for (double e : r.errors) CHECK(e <= 1e-8);
    CHECK(r.run_errors.size() == 3);
    CHECK(r.t_max == doctest::Approx(0.7));
}

TEST_CASE("scan shape and validation") {
    const NoiseSchedule s(10.0);
    const SceneTask task = small_task();
    const auto den = oracle_denoisers(task, s);
    const std::array<double, 4> deltas{0.4, 0.1, 0.05, 0.2};
    const ScanResult r = theorem1_scan(short_config(), task, den, s, deltas, 2);
    CHECK(r.deltas == std::vector<double>{0.05, 0.1, 0.2, 0.4});
    CHECK(r.t_max == doctest::Approx(0.6));
    CHECK(std::isfinite(r.slope));
    CHECK(std::isfinite(r.floored_slope));
    CHECK(r.floor >= 0.0);
    CHECK(r.seeds == std::vector<std::uint64_t>{9, 10});
    for (double e : r.errors) CHECK(e >= 0.0);

    const std::array<double, 2> two{0.1, 0.2};
    CHECK_THROWS_AS(theorem1_scan(short_config(), task, den, s, two, 2), ConfigError);
    const std::array<double, 3> dup{0.1, 0.1, 0.2};
    CHECK_THROWS_AS(theorem1_scan(short_config(), task, den, s, dup, 2), ConfigError);

    DistillRunConfig fragile = short_config();
    fragile.divergence_bound = 1e-6;
    try {
        theorem1_scan(fragile, task, den, s, deltas, 1);
        FAIL("expected a divergence");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("Delta=0.05") != std::string::npos);
    }
}

TEST_CASE("scan results do not depend on the worker count") {
    const NoiseSchedule s(10.0);
    const SceneTask task = small_task();
    const auto den = oracle_denoisers(task, s);
    const std::array<double, 3> deltas{0.1, 0.2, 0.3};
    setenv("CDSLAB_THREADS", "1", 1);
    const ScanResult a = theorem1_scan(short_config(), task, den, s, deltas, 3);
    setenv("CDSLAB_THREADS", "4", 1);
    const ScanResult b = theorem1_scan(short_config(), task, den, s, deltas, 3);
    unsetenv("CDSLAB_THREADS");
    CHECK(a.run_errors == b.run_errors);
}

TEST_CASE("variance comparison degenerate cases") {
    const NoiseSchedule s(10.0);
    const SceneTask point = point_mass_task(1);
    const VarianceComparison v =
        guidance_variance_compare({point.modes[0]}, point, oracle_denoisers(point, s), short_config(), s, 10, 32);
    CHECK(v.sds_std <= 1e-9);
    CHECK(v.cds_std <= 1e-9);

    DistillRunConfig exact = short_config();
    exact.schedule.delta = exact.schedule.cap_delta;
    const SceneTask task = small_task();
    const VarianceComparison fixed =
        guidance_variance_compare({Vector::Zero(3)}, task, oracle_denoisers(task, s), exact, s, 10, 64);
    CHECK(fixed.cds_std <= 1e-12);
    CHECK(fixed.sds_std > 0.1);
    CHECK(fixed.ratio <= 1e-11);
    CHECK_THROWS(guidance_variance_compare({Vector::Zero(3)}, task, oracle_denoisers(task, s), exact, s, 10, 1));
}

TEST_CASE("variance ratio is zero when nothing varies") {
    const NoiseSchedule s(10.0);
    const SceneTask point = point_mass_task(1);
    const FunctionDenoiser constant(2, [](const Vector&, double, const Guidance&) { return Vector::Zero(2).eval(); });
    const auto c = std::make_shared<FunctionDenoiser>(constant);
    const VarianceComparison v = guidance_variance_compare({Vector::Zero(3)}, point, {c, c}, short_config(), s, 5, 8);
    CHECK(v.sds_std == 0.0);
    CHECK(v.ratio == 0.0);
}

TEST_CASE("ablation arms") {
    const DistillRunConfig base = short_config();
    CHECK(ablation_arm(base, 0).t2_mode == T2Mode::random);
    CHECK(ablation_arm(base, 1).schedule.delta == base.schedule.cap_delta);
    CHECK(ablation_arm(base, 2).noise_mode == NoiseMode::per_iteration);
    const DistillRunConfig full = ablation_arm(base, 3);
    CHECK(full.t2_mode == T2Mode::annealed);
    CHECK(full.noise_mode == NoiseMode::fixed);
    CHECK(full.schedule.delta == base.schedule.delta);
    CHECK_THROWS(ablation_arm(base, 4));
}

TEST_CASE("ablation at an exact mode is all zeros and has one row per arm and seed") {
    const NoiseSchedule s(10.0);
    const SceneTask task = point_mass_task(1);
    DistillRunConfig cfg = short_config();
    cfg.init_theta = task.modes[0];
    const AblationResult r = ablation_suite(task, oracle_denoisers(task, s), cfg, s, 3);
    CHECK(r.rows.size() == 4 * 3);
    for (const auto& row : r.rows) CHECK(row.final_error <= 1e-8);
    CHECK(r.rows[3].arm == "fixed_t1");
    CHECK(r.rows[3].seed == 9);
    for (double m : r.medians) CHECK(m <= 1e-8);
}

TEST_CASE("default recovery configuration") {
    const DistillRunConfig c = default_recovery_config();
    CHECK(c.loss == LossKind::cds);
    CHECK(c.schedule.total_iters == 2000);
    CHECK(c.optimizer.kind == OptimizerKind::adam);
    CHECK(c.optimizer.lr == 0.02);
    CHECK(c.schedule.t_max == 0.7);
    CHECK(c.schedule.t_min == 0.1);
    CHECK(c.schedule.delta == 0.1);
    CHECK(c.schedule.cap_delta == 0.2);
    CHECK_NOTHROW(c.validate());
}
