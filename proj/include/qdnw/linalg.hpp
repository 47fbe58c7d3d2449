#pragma once

#include <complex>

#include <Eigen/Dense>

namespace qdnw {

/// Space-time dimension never exceeds 1 + 3, so every small matrix and vector
/// uses a dynamic size with a fixed upper bound and lives on the stack.
inline constexpr int kMaxDim = 4;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using CVec = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

}  // namespace qdnw
