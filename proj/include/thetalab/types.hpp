#pragma once

#include <complex>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace thetalab {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using IVector = Eigen::VectorXi;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

// Absolute truncation target used when callers do not ask for one. Applies to
// the scaled numbers (exponential growth factored out), which are O(1).
inline constexpr double kDefaultTargetAbsErr = 1e-16;

// Bilinear (non-conjugating) pairing sum_i a_i b_i.
inline Complex bilinear(const CVector& a, const CVector& b) {
  return a.cwiseProduct(b).sum();
}

}  // namespace thetalab
