#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "cdslab/mixture.hpp"

namespace cdslab {

/// The optimized model parameters theta.
struct SceneParams {
    Vector theta;
};

/// A pose and its linear renderer x = A theta. Rows of A are orthonormal.
class ViewOperator {
public:
    ViewOperator(int pose_id, Matrix matrix);

    int pose_id() const noexcept { return pose_id_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    Index image_dim() const noexcept { return matrix_.rows(); }
    Index scene_dim() const noexcept { return matrix_.cols(); }

private:
    int pose_id_;
    Matrix matrix_;
};

/// Views, ground-truth scene modes and the per-view data mixtures obtained by
/// projecting every mode through every view.
struct SceneTask {
    std::vector<ViewOperator> views;
    std::vector<Vector> modes;
    std::vector<int> labels;
    double scale = 0.3;
    std::vector<GaussianMixture> view_data; // one per view, same order as views

    Index scene_dim() const { return modes.front().size(); }
    Index image_dim() const { return views.front().image_dim(); }
};

struct TaskSpec {
    std::uint64_t seed = 0;
    int views = 4;
    int d_img = 8;
    int d_scene = 16;
    std::vector<Vector> modes;
    std::vector<int> labels; // empty: every mode gets label 0
    double scale = 0.3;
    bool identity_views = false; // requires d_img == d_scene
};

Vector render(const SceneParams& scene, const ViewOperator& view);

/// A^T c: the pullback of an image-space cotangent to scene space.
Vector render_vjp(const ViewOperator& view, const Vector& cotangent);

/// Builds K seeded views (QR of Gaussian matrices) and the projected mixtures.
SceneTask make_task(const TaskSpec& spec);

struct ModeDistance {
    std::size_t best_mode = 0;
    std::vector<double> per_view; // distances to the best mode, one per view
    double aggregate = 0.0;       // mean of per_view
};

/// Distance to the nearest scene mode, with one mode index shared by all views.
ModeDistance mode_distance(const SceneParams& scene, const SceneTask& task);

/// One exact mixture denoiser per view, in view order.
std::vector<std::shared_ptr<const Denoiser>> oracle_denoisers(const SceneTask& task, const NoiseSchedule& sched);

} // namespace cdslab
