#pragma once

// Bilinear theta identities of KP type and the PDE-level objects built from
// them.
//
// Every residual is returned normalized: |sum of terms| / sum |terms|, so it
// lies in [0, 1] and is independent of the exponential growth of theta. Each
// term is a product of theta quantities at the same points (z, or z and z+a),
// so the scale factors from point reduction are common and never evaluated.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thetalab/riemann_matrix.hpp"
#include "thetalab/theta.hpp"
#include "thetalab/types.hpp"

namespace thetalab {

// Directions of the vector fields D1, D2, D3 plus the scalar constants of the
// various equations. Absent fields are std::nullopt / empty.
struct DirectionJet {
  std::optional<CVector> U, V, W;
  std::optional<Complex> c;  // constant of the one-point equation and of u
  std::optional<Complex> d;  // constant of the Hirota equation
  std::optional<Complex> A, B;
  // zeta[k] is the coefficient of eps^(k+1) in zeta(eps).
  std::vector<CVector> zeta;
  // dcoef[k] is the coefficient of eps^(k+3) in d(eps).
  std::vector<Complex> dcoef;

  const CVector& u() const;
  const CVector& v() const;
  const CVector& w() const;
  Complex c_or_zero() const { return c.value_or(Complex{}); }
  Complex d_or_zero() const { return d.value_or(Complex{}); }

  // Rescales by the KP weights (lambda U, lambda^2 V, lambda^3 W, lambda^2 c,
  // lambda^4 d, lambda A, lambda^2 B) so that |U| = 1 and the first nonzero
  // component of U is real positive. Throws kDegenerateJet if U = 0.
  DirectionJet gauge_normalized() const;
  DirectionJet gauge_scaled(Complex lambda) const;
};

// Raw residual together with its term-sum normalizer.
struct BilinearValue {
  Complex residual;
  double normalizer = 0.0;
  // A structurally zero expression (every term exactly 0, e.g. a zero jet)
  // has residual 0.
  double normalized() const {
    return normalizer == 0.0 ? 0.0 : std::abs(residual) / normalizer;
  }
};

// Sums the terms; throws kDegenerateSample when 0 < sum |terms| < 1e-300.
BilinearValue combine_terms(std::span<const Complex> terms);

// Theta quantities the assemblers consume, all at one point and sharing one
// scale factor.
struct HirotaQuantities {
  Complex th, d1, d11, d111, d1111, d2, d22, d3, d13;
};
struct OnePointQuantities {
  Complex th, d1, d11, d2;
};
struct LongQuantities {
  Complex th, d1, d11, d111, d1111, d2, d22, d12;
};

std::array<Complex, 8> hirota_terms(const HirotaQuantities& q, Complex d);
std::array<Complex, 6> p_terms(const OnePointQuantities& base,
                               const OnePointQuantities& shifted, Complex c);
std::array<Complex, 8> p_ab_terms(const OnePointQuantities& base,
                                  const OnePointQuantities& shifted, Complex A,
                                  Complex B);
// eps (D1^2 th.th_a + th.D1^2 th_a + D2 th.th_a - th.D2 th_a - 2 D1 th.D1 th_a)
//   - (D1 th_a.th - th_a.D1 th) + d(eps) th.th_a
std::array<Complex, 8> hierarchy_terms(const OnePointQuantities& base,
                                       const OnePointQuantities& shifted,
                                       Complex eps, Complex d_eps);
// Left side minus right side of the identity valid on the theta divisor.
std::array<Complex, 6> longeq_terms(const LongQuantities& q);

HirotaQuantities hirota_quantities(const ThetaTensor& t, const CVector& U,
                                   const CVector& V, const CVector& W);
OnePointQuantities one_point_quantities(const ThetaTensor& t, const CVector& U,
                                        const CVector& V);

// Engine-backed evaluations (one theta_eval per point).
BilinearValue hirota_value(const AbelianPoint& z, const RiemannMatrix& tau,
                           const DirectionJet& jet);
BilinearValue p_value(const AbelianPoint& z, const RiemannMatrix& tau,
                      const DirectionJet& jet, const CVector& a);
BilinearValue p_ab_value(const AbelianPoint& z, const RiemannMatrix& tau,
                         const DirectionJet& jet, const CVector& a);
BilinearValue longeq_value(const AbelianPoint& z, const RiemannMatrix& tau,
                           const DirectionJet& jet);
BilinearValue hierarchy_value(const AbelianPoint& z, const RiemannMatrix& tau,
                              const DirectionJet& jet, Complex eps);

double hirota_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                       const DirectionJet& jet);
double p_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                  const DirectionJet& jet, const CVector& a);
double p_ab_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                     const DirectionJet& jet, const CVector& a);
// Precondition |theta(z)| <= 1e-8 * (sum of |series terms|); throws
// kNotOnDivisor otherwise.
double longeq_residual(const AbelianPoint& z_on_theta, const RiemannMatrix& tau,
                       const DirectionJet& jet);
// a = 2 zeta(eps) truncated at the jet order, d(eps) = sum dcoef[k] eps^(k+3).
double hierarchy_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                          const DirectionJet& jet, Complex eps);

// 2 zeta(eps) from jet.zeta.
CVector hierarchy_shift(const DirectionJet& jet, Complex eps);
Complex hierarchy_d(const DirectionJet& jet, Complex eps);

// The one-point data (a, A, B) whose (p.AB)-residual equals the hierarchy
// residual at eps: a = 2 zeta(eps), A = -1/(2 eps), B = A^2 - d(eps)/eps.
DirectionJet hierarchy_as_p_ab(const DirectionJet& jet, Complex eps,
                               CVector* a_out);

// Time direction of the KP flow generated by Hirota data (U, W, c):
// 3/4 W + 3/2 c U (the Hirota form carries 3 D1 D3 where KP has 4 u_t, and
// the constant c is absorbed by a Galilean shift).
CVector kp_time_direction(const DirectionJet& jet);

// u(x, y, t) = 2 d^2/dx^2 log theta(x U + y V + t T + z) + c with T the KP time
// direction above. Throws kPole when |theta| < 1e-10 * local scale.
Complex kp_field_u(double x, double y, double t, const AbelianPoint& z,
                   const RiemannMatrix& tau, const DirectionJet& jet);

// exp(A x + B y) theta(x U + y V + a + z) / theta(x U + y V + z).
Complex baker_akhiezer(double x, double y, const AbelianPoint& z,
                       const RiemannMatrix& tau, const DirectionJet& jet,
                       const CVector& a, Complex A, Complex B);

enum class Normalization { kTermSum, kNone };

struct ResidualReport {
  std::vector<AbelianPoint> sample_points;
  std::vector<double> residuals;
  Normalization normalization = Normalization::kTermSum;
  double max_residual = 0.0;
  double mean_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool vacuous = false;
  std::vector<std::string> notes;
};

// Fills max/mean/pass from residuals; an empty list is a vacuous pass.
ResidualReport make_report(std::vector<AbelianPoint> points,
                           std::vector<double> residuals, double tolerance,
                           Normalization normalization = Normalization::kTermSum);

// Points with lattice coordinates uniform in [-1/2, 1/2)^(2g).
std::vector<CVector> sample_fundamental(const RiemannMatrix& tau, int count,
                                        std::uint64_t seed);

// Evaluates `residual` at `count` seeded sample points. A degenerate sample is
// redrawn (up to 3 times) from a derived seed before the error propagates.
ResidualReport residual_sweep(
    const RiemannMatrix& tau, int count, std::uint64_t seed, double tolerance,
    const std::function<double(const AbelianPoint&)>& residual,
    unsigned threads = 0);

}  // namespace thetalab
