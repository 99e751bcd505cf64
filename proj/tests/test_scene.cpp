#include <doctest.h>

#include <cmath>
#include <limits>

#include "cdslab/errors.hpp"
#include "cdslab/harness.hpp"
#include "cdslab/scene.hpp"

using namespace cdslab;

namespace {

TaskSpec random_spec(std::uint64_t seed, int views = 3, int d_img = 4, int d_scene = 7) {
    RandomStream rng(seed);
    TaskSpec spec;
    spec.seed = seed;
    spec.views = views;
    spec.d_img = d_img;
    spec.d_scene = d_scene;
    for (int j = 0; j < 3; ++j) spec.modes.push_back(3.0 * rng.normal_vector(d_scene));
    return spec;
}

// Definition-level oracle: min over modes of the mean over views of |A (theta - mode)|.
double brute_force_distance(const Vector& theta, const SceneTask& task, std::size_t& best) {
    double out = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < task.modes.size(); ++j) {
        double sum = 0.0;
        for (const auto& v : task.views) sum += (v.matrix() * theta - v.matrix() * task.modes[j]).norm();
        const double mean = sum / static_cast<double>(task.views.size());
        if (mean < out) {
            out = mean;
            best = j;
        }
    }
    return out;
}

} // namespace

TEST_CASE("render and vjp on the identity view") {
    const ViewOperator id(0, Matrix::Identity(3, 3));
    const Vector theta = Vector::LinSpaced(3, -1.0, 2.0);
    CHECK(render({theta}, id) == theta);
    CHECK(render({Vector::Zero(3)}, id) == Vector::Zero(3));
    CHECK(render_vjp(id, theta) == theta);
    CHECK(render_vjp(id, Vector::Zero(3)) == Vector::Zero(3));
    CHECK_THROWS_AS(render({Vector::Zero(4)}, id), ShapeError);
    CHECK_THROWS_AS(render_vjp(id, Vector::Zero(2)), ShapeError);
}

TEST_CASE("view operators require orthonormal rows") {
    CHECK_THROWS(ViewOperator(0, 2.0 * Matrix::Identity(2, 2)));
    CHECK_THROWS(ViewOperator(0, Matrix::Identity(3, 2)));
}

TEST_CASE("generated views are orthonormal, reproducible and contracting") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SceneTask task = make_task(random_spec(seed));
        for (const auto& v : task.views) {
            const Matrix r = v.matrix() * v.matrix().transpose() - Matrix::Identity(4, 4);
            CHECK(r.cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
    const SceneTask a = make_task(random_spec(3));
    const SceneTask b = make_task(random_spec(3));
    for (std::size_t k = 0; k < a.views.size(); ++k) CHECK(a.views[k].matrix() == b.views[k].matrix());

    RandomStream rng(30);
    for (int k = 0; k < 100; ++k) {
        const Vector theta = rng.normal_vector(7);
        CHECK(render({theta}, a.views[0]).norm() <= theta.norm() * (1 + 1e-12));
    }
}

TEST_CASE("render is linear and vjp is its adjoint") {
    const SceneTask task = make_task(random_spec(31));
    RandomStream rng(32);
    for (int k = 0; k < 50; ++k) {
        const auto& v = task.views[static_cast<std::size_t>(k) % task.views.size()];
        const Vector t1 = rng.normal_vector(7);
        const Vector t2 = rng.normal_vector(7);
        const double a = rng.normal();
        const double b = rng.normal();
        const Vector lhs = render({a * t1 + b * t2}, v);
        const Vector rhs = a * render({t1}, v) + b * render({t2}, v);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

        const Vector c = rng.normal_vector(4);
        CHECK(std::abs(render({t1}, v).dot(c) - t1.dot(render_vjp(v, c))) <= 1e-10);
    }
}

TEST_CASE("vjp matches finite differences of the projected render") {
    const SceneTask task = make_task(random_spec(33));
    RandomStream rng(34);
    const auto& v = task.views[1];
    const Vector theta = rng.normal_vector(7);
    const Vector c = rng.normal_vector(4);
    const Vector g = render_vjp(v, c);
    const double h = 1e-6;
    for (Index i = 0; i < 7; ++i) {
        Vector tp = theta;
        Vector tm = theta;
        tp[i] += h;
        tm[i] -= h;
        const double fd = (c.dot(render({tp}, v)) - c.dot(render({tm}, v))) / (2 * h);
        CHECK(std::abs(fd - g[i]) <= 1e-8 * std::max(1.0, std::abs(g[i])));
    }
}

TEST_CASE("task construction") {
    TaskSpec spec = random_spec(35, 1, 5, 5);
    spec.identity_views = true;
    const SceneTask task = make_task(spec);
    REQUIRE(task.view_data.size() == 1);
    for (std::size_t j = 0; j < spec.modes.size(); ++j) {
        CHECK(task.view_data[0].components()[j].mean == spec.modes[j]);
    }

    const SceneTask multi = make_task(random_spec(36));
    for (std::size_t k = 0; k < multi.views.size(); ++k) {
        for (std::size_t j = 0; j < multi.modes.size(); ++j) {
            const Vector expect = multi.views[k].matrix() * multi.modes[j];
            CHECK((multi.view_data[k].components()[j].mean - expect).norm() == 0.0);
        }
    }

    TaskSpec bad = random_spec(37, 2, 8, 4);
    CHECK_THROWS_AS(make_task(bad), ConfigError);
    TaskSpec no_views = random_spec(38, 0);
    CHECK_THROWS_AS(make_task(no_views), ConfigError);
}

TEST_CASE("mode distance") {
    const SceneTask task = make_task(random_spec(40));
    for (std::size_t j = 0; j < task.modes.size(); ++j) {
        const ModeDistance d = mode_distance({task.modes[j]}, task);
        CHECK(d.aggregate == 0.0);
        CHECK(d.best_mode == j);
        CHECK(d.per_view.size() == task.views.size());
    }

    TaskSpec sym;
    sym.views = 1;
    sym.d_img = 2;
    sym.d_scene = 2;
    sym.identity_views = true;
    Vector v(2);
    v << 3.0, 4.0;
    sym.modes = {v, -v};
    CHECK(mode_distance({Vector::Zero(2)}, make_task(sym)).aggregate == doctest::Approx(5.0));

    RandomStream rng(41);
    for (int k = 0; k < 50; ++k) {
        const Vector theta = 3.0 * rng.normal_vector(7);
        std::size_t best = 0;
        const double expect = brute_force_distance(theta, task, best);
        const ModeDistance d = mode_distance({theta}, task);
        CHECK(d.aggregate == doctest::Approx(expect).epsilon(1e-12));
        CHECK(d.best_mode == best);
    }
}

TEST_CASE("default recovery task keeps the modes well separated") {
    const TaskSpec spec = default_recovery_spec();
    const SceneTask task = make_task(spec);
    CHECK(task.views.size() == 4);
    CHECK(task.image_dim() == 8);
    CHECK(task.scene_dim() == 16);
    CHECK(task.modes.size() == 3);
    CHECK(min_projected_separation(task) >= 10.0 * spec.scale);
}
