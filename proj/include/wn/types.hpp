#pragma once

#include <Eigen/Dense>

namespace wn {

// Ambient dimensions stay tiny (tensor grids cap at n = 4), so points,
// H-vectors and H-Hessians use fixed-capacity storage and never touch the
// heap in inner quadrature loops.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

}  // namespace wn
