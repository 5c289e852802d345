#pragma once

#include <Eigen/Core>

namespace rnnpb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Time-major sample storage: one row per time step.
using Frames = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace rnnpb
