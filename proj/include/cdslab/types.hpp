#pragma once

#include <Eigen/Dense>

#include <string>

#include "cdslab/errors.hpp"

namespace cdslab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline void require_same_dim(const Vector& a, const Vector& b, const char* what) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(what) + ": dimension " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

} // namespace cdslab
