#pragma once

#include <cstdint>

#include "thetalab/types.hpp"

namespace thetalab {

// A g x g complex symmetric matrix with positive-definite imaginary part.
// Immutable after construction; caches the factorizations the theta engine
// needs (Cholesky factor of Im tau, its inverse, smallest eigenvalue).
class RiemannMatrix {
 public:
  // Throws Error{kTauNotSymmetric | kTauNotPositiveDefinite | kInvalidInput}.
  explicit RiemannMatrix(const CMatrix& tau);
  RiemannMatrix(const RMatrix& re, const RMatrix& im);

  int genus() const { return static_cast<int>(tau_.rows()); }
  const CMatrix& tau() const { return tau_; }
  const RMatrix& re() const { return re_; }
  const RMatrix& im() const { return im_; }

  // Upper-triangular R with Im tau = R^T R.
  const RMatrix& im_cholesky() const { return chol_; }
  const RMatrix& im_inverse() const { return im_inv_; }
  double im_min_eigenvalue() const { return lambda_min_; }

  RiemannMatrix scaled(double factor) const;

  // Seeded random matrix: Re tau uniform in [-1/2, 1/2] (symmetric),
  // Im tau = B B^T / g + 0.6 I with B uniform in [-1, 1].
  static RiemannMatrix random(int g, std::uint64_t seed);

 private:
  void validate_and_factor();

  CMatrix tau_;
  RMatrix re_;
  RMatrix im_;
  RMatrix chol_;
  RMatrix im_inv_;
  double lambda_min_ = 0.0;
};

}  // namespace thetalab
