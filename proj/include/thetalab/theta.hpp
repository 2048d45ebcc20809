#pragma once

// Riemann theta functions with characteristics and their directional
// derivatives.
//
// Conventions (all lattice sums over n in Z^g):
//
//   theta(z, tau)         = sum exp(pi i n.tau.n + 2 pi i n.z)
//   theta[eps,delta](z)   = sum exp(pi i (n+eps).tau.(n+eps)
//                                   + 2 pi i (n+eps).(z+delta))
//   D_h1 ... D_hk theta   = sum prod_l (2 pi i (n+eps).h_l) * term(n)
//
// with eps, delta in {0, 1/2}^g. Every evaluation first reduces the argument
// modulo Z^g + tau Z^g and returns numbers that are O(1): the true value is
// exp(scale_exponent) * value. The unit-modulus part of the quasi-periodicity
// multiplier is folded into value and derivs.
//
// Truncation: the sum runs over the ellipsoid ||R (n + beta)|| <= radius where
// Im tau = R^T R and beta are the imaginary lattice coordinates of the reduced
// argument. The radius is the smallest one whose tail bound (lattice-point
// packing count times the Gaussian envelope and the polynomial derivative
// weight) is below the requested absolute error.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "thetalab/riemann_matrix.hpp"
#include "thetalab/types.hpp"

namespace thetalab {

struct AbelianPoint {
  CVector z;
  // True when z is known to lie in the fundamental domain (lattice
  // coordinates in [-1/2, 1/2)).
  bool reduced = false;

  AbelianPoint() = default;
  AbelianPoint(CVector point, bool is_reduced = false)  // NOLINT: implicit
      : z(std::move(point)), reduced(is_reduced) {}
  template <class Derived>
  AbelianPoint(const Eigen::MatrixBase<Derived>& expr)  // NOLINT: implicit
      : z(expr) {}
};

struct Characteristic {
  RVector eps;
  RVector delta;

  static Characteristic zero(int g);
  // Throws kInvalidInput unless all entries are 0 or 1/2.
  void validate(int g) const;
  // 0 for even, 1 for odd (parity of 4 eps.delta).
  int parity() const;
};

// Ordered list of directions h_1..h_k (k <= 4); requests D_h1...D_hk theta.
// An empty request asks for the value itself.
using DerivativeRequest = std::vector<CVector>;

struct ThetaJet {
  Complex value;
  std::vector<Complex> derivs;
  // Sums of absolute values of the series terms; a local scale used to
  // normalize "is this zero" questions.
  double value_abs_sum = 0.0;
  std::vector<double> deriv_abs_sums;
  double error_bound = 0.0;
  double scale_exponent = 0.0;
  double radius = 0.0;
  std::size_t lattice_points = 0;
};

struct ReducedPoint {
  AbelianPoint point;
  // theta(z) = exp(factor_exponent) * quasiperiod_factor * theta(z0).
  Complex quasiperiod_factor{1.0, 0.0};
  double factor_exponent = 0.0;
  // z = z0 + tau m + n.
  IVector m;
  IVector n;
};

struct EngineOptions {
  // Multiplies the radius chosen by the tail bound (>= 1 only enlarges).
  double radius_scale = 1.0;
  // Cap on the index-space half-width radius / sqrt(lambda_min(Im tau)),
  // expressed as radius_cap_factor * lambda_min^(-1/2).
  double radius_cap_factor = 40.0;
  std::size_t max_lattice_points = 20'000'000;
};

// Throws kInvalidInput for non-finite or wrongly sized input.
ReducedPoint reduce_point(const CVector& z, const RiemannMatrix& tau);

// Lattice coordinates (a, b) with z = a + tau b.
std::pair<RVector, RVector> lattice_coordinates(const CVector& z,
                                                const RiemannMatrix& tau);

ThetaJet theta_eval(const AbelianPoint& z, const RiemannMatrix& tau,
                    std::span<const DerivativeRequest> requests = {},
                    double target_abs_err = kDefaultTargetAbsErr,
                    const EngineOptions& options = {});

ThetaJet theta_char_eval(const AbelianPoint& z, const RiemannMatrix& tau,
                         const Characteristic& ch,
                         std::span<const DerivativeRequest> requests = {},
                         double target_abs_err = kDefaultTargetAbsErr,
                         const EngineOptions& options = {});

// All coordinate partial derivatives of theta up to a fixed order, sharing
// one scale exponent. Directional derivatives of any order <= `order` follow
// by contraction, which is how the optimizers evaluate many direction sets
// at fixed sample points.
class ThetaTensor {
 public:
  static constexpr int kMaxOrder = 5;

  ThetaTensor() = default;
  ThetaTensor(int genus, int order);

  int genus() const { return genus_; }
  int order() const { return order_; }
  double scale_exponent() const { return scale_exponent_; }
  double error_bound() const { return error_bound_; }

  // Flattened row-major partials of order k (g^k entries).
  const std::vector<Complex>& partials(int k) const { return partials_[k]; }

  // D_h1 ... D_hk theta.
  Complex contract(std::span<const CVector* const> dirs) const;
  // Gradient of D_h1 ... D_hk theta, i.e. the order k+1 partials contracted
  // with the k directions.
  CVector gradient(std::span<const CVector* const> dirs) const;

  Complex value() const { return partials_[0][0]; }
  Complex d(const CVector& a) const;
  Complex d(const CVector& a, const CVector& b) const;
  Complex d(const CVector& a, const CVector& b, const CVector& c) const;
  Complex d(const CVector& a, const CVector& b, const CVector& c,
            const CVector& e) const;
  CVector grad() const;
  CVector grad(const CVector& a) const;
  CVector grad(const CVector& a, const CVector& b) const;
  CVector grad(const CVector& a, const CVector& b, const CVector& c) const;

 private:
  friend ThetaTensor theta_tensor(const AbelianPoint&, const RiemannMatrix&,
                                  int, double, const EngineOptions&);

  int genus_ = 0;
  int order_ = 0;
  double scale_exponent_ = 0.0;
  double error_bound_ = 0.0;
  std::vector<Complex> partials_[kMaxOrder + 1];
};

ThetaTensor theta_tensor(const AbelianPoint& z, const RiemannMatrix& tau,
                         int order,
                         double target_abs_err = kDefaultTargetAbsErr,
                         const EngineOptions& options = {});

// exp(scale_exponent) * value, for callers that can afford to materialize.
Complex materialize(Complex value, double scale_exponent);

}  // namespace thetalab
