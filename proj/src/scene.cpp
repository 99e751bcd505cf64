#include "cdslab/scene.hpp"

#include <limits>
#include <memory>
#include <string>

namespace cdslab {

ViewOperator::ViewOperator(int pose_id, Matrix matrix) : pose_id_(pose_id), matrix_(std::move(matrix)) {
    if (matrix_.rows() == 0 || matrix_.cols() == 0) throw ShapeError("view operator is empty");
    if (matrix_.rows() > matrix_.cols()) throw ConfigError("view operator has more rows than scene dimensions");
    const Matrix gram = matrix_ * matrix_.transpose();
    const double residual = (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    if (residual > 1e-10) {
        throw DomainError("view operator rows are not orthonormal (residual " + std::to_string(residual) + ")");
    }
}

Vector render(const SceneParams& scene, const ViewOperator& view) {
    if (scene.theta.size() != view.scene_dim()) {
        throw ShapeError("render: theta has " + std::to_string(scene.theta.size()) + " entries, view expects " +
                         std::to_string(view.scene_dim()));
    }
    return view.matrix() * scene.theta;
}

Vector render_vjp(const ViewOperator& view, const Vector& cotangent) {
    if (cotangent.size() != view.image_dim()) {
        throw ShapeError("render_vjp: cotangent has " + std::to_string(cotangent.size()) + " entries, view expects " +
                         std::to_string(view.image_dim()));
    }
    return view.matrix().transpose() * cotangent;
}

SceneTask make_task(const TaskSpec& spec) {
    if (spec.views < 1) throw ConfigError("scene needs at least one view");
    if (spec.d_img < 1 || spec.d_scene < 1) throw ConfigError("scene dimensions must be positive");
    if (spec.d_img > spec.d_scene) throw ConfigError("d_img must not exceed d_scene");
    if (spec.identity_views && spec.d_img != spec.d_scene) {
        throw ConfigError("identity views require d_img == d_scene");
    }
    if (spec.modes.empty()) throw ConfigError("scene needs at least one mode");
    for (const auto& m : spec.modes) {
        if (m.size() != spec.d_scene) throw ConfigError("scene mode dimension differs from d_scene");
    }
    if (!spec.labels.empty() && spec.labels.size() != spec.modes.size()) {
        throw ConfigError("labels must list one label per mode");
    }
    if (!(spec.scale > 0.0)) throw ConfigError("scene scale must be positive");

    SceneTask task;
    task.modes = spec.modes;
    task.labels = spec.labels.empty() ? std::vector<int>(spec.modes.size(), 0) : spec.labels;
    task.scale = spec.scale;

    RandomStream rng = RandomStream::derive(spec.seed, "views");
    for (int k = 0; k < spec.views; ++k) {
        if (spec.identity_views) {
            task.views.emplace_back(k, Matrix::Identity(spec.d_scene, spec.d_scene));
            continue;
        }
        Matrix gauss(spec.d_scene, spec.d_img);
        for (Index c = 0; c < gauss.cols(); ++c) {
            for (Index r = 0; r < gauss.rows(); ++r) gauss(r, c) = rng.normal();
        }
        Eigen::HouseholderQR<Matrix> qr(gauss);
        const Matrix q = qr.householderQ() * Matrix::Identity(spec.d_scene, spec.d_img);
        task.views.emplace_back(k, q.transpose());
    }

    const double weight = 1.0 / static_cast<double>(spec.modes.size());
    for (const auto& view : task.views) {
        std::vector<MixtureComponent> comps;
        double total = 0.0;
        for (std::size_t j = 0; j < task.modes.size(); ++j) {
            comps.push_back({weight, view.matrix() * task.modes[j], task.scale, task.labels[j]});
            total += weight;
        }
        comps.back().weight += 1.0 - total;
        task.view_data.emplace_back(std::move(comps));
    }
    return task;
}

ModeDistance mode_distance(const SceneParams& scene, const SceneTask& task) {
    if (task.views.empty() || task.modes.empty()) throw InputError("mode_distance on an empty task");
    ModeDistance best;
    best.aggregate = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < task.modes.size(); ++j) {
        const Vector diff = scene.theta - task.modes[j];
        std::vector<double> per_view;
        double sum = 0.0;
        for (const auto& view : task.views) {
            per_view.push_back((view.matrix() * diff).norm());
            sum += per_view.back();
        }
        const double agg = sum / static_cast<double>(task.views.size());
        if (agg < best.aggregate) {
            best.aggregate = agg;
            best.best_mode = j;
            best.per_view = std::move(per_view);
        }
    }
    return best;
}

std::vector<std::shared_ptr<const Denoiser>> oracle_denoisers(const SceneTask& task, const NoiseSchedule& sched) {
    std::vector<std::shared_ptr<const Denoiser>> out;
    out.reserve(task.view_data.size());
    for (const auto& gmm : task.view_data) out.push_back(std::make_shared<MixtureDenoiser>(gmm, sched));
    return out;
}

} // namespace cdslab
