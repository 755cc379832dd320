#pragma once

#include <Eigen/Dense>

namespace brim {

// Pixel-by-channel data is stored row-major so that a spectrum is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace brim
