#include "thetalab/riemann_matrix.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "thetalab/error.hpp"
#include "thetalab/random.hpp"

namespace thetalab {

RiemannMatrix::RiemannMatrix(const CMatrix& tau) : tau_(tau) {
  validate_and_factor();
}

RiemannMatrix::RiemannMatrix(const RMatrix& re, const RMatrix& im) {
  if (re.rows() != im.rows() || re.cols() != im.cols())
    throw Error(ErrorCode::kInvalidInput, "tau_re and tau_im shapes differ");
  tau_ = re.cast<Complex>() + kI * im.cast<Complex>();
  validate_and_factor();
}

void RiemannMatrix::validate_and_factor() {
  const Eigen::Index g = tau_.rows();
  if (g < 1 || tau_.cols() != g)
    throw Error(ErrorCode::kInvalidInput, "tau must be a non-empty square matrix");
  if (!tau_.allFinite())
    throw Error(ErrorCode::kInvalidInput, "tau has non-finite entries");

  const double scale = tau_.cwiseAbs().maxCoeff();
  const double asym = (tau_ - tau_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    std::ostringstream msg;
    msg << "tau is not symmetric (max |tau_jk - tau_kj| = " << asym << ")";
    throw Error(ErrorCode::kTauNotSymmetric, msg.str());
  }
  // Symmetrize exactly so downstream quadratic forms are consistent.
  tau_ = (0.5 * (tau_ + tau_.transpose())).eval();
  re_ = tau_.real();
  im_ = tau_.imag();

  Eigen::LLT<RMatrix> llt(im_);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::kTauNotPositiveDefinite,
                "Im tau is not positive definite");
  RMatrix upper = llt.matrixU();
  for (Eigen::Index i = 0; i < g; ++i) {
    if (!(upper(i, i) > 0.0))
      throw Error(ErrorCode::kTauNotPositiveDefinite,
                  "Im tau is not positive definite");
  }
  chol_ = upper;
  im_inv_ = llt.solve(RMatrix::Identity(g, g));
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(im_, Eigen::EigenvaluesOnly);
  lambda_min_ = eig.eigenvalues().minCoeff();
  if (!(lambda_min_ > 0.0))
    throw Error(ErrorCode::kTauNotPositiveDefinite,
                "Im tau is not positive definite");
}

RiemannMatrix RiemannMatrix::scaled(double factor) const {
  return RiemannMatrix(CMatrix(tau_ * factor));
}

RiemannMatrix RiemannMatrix::random(int g, std::uint64_t seed) {
  if (g < 1) throw Error(ErrorCode::kInvalidInput, "genus must be positive");
  Rng rng(seed, 0x7a75);
  RMatrix re(g, g), b(g, g);
  for (int i = 0; i < g; ++i) {
    for (int j = i; j < g; ++j) {
      re(i, j) = rng.uniform(-0.5, 0.5);
      re(j, i) = re(i, j);
    }
  }
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
  RMatrix im = b * b.transpose() / static_cast<double>(g) +
               0.6 * RMatrix::Identity(g, g);
  return RiemannMatrix(re, im);
}

}  // namespace thetalab
