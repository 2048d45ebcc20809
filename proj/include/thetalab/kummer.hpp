#pragma once

// Kummer map through second-order theta functions and the flex test.
//
// Basis: K_s(z) = theta[s/2, 0](2z, 2 tau) for s in {0,1}^g, s ordered with
// s_1 as the most significant bit. A derivative along h of K_s is the
// derivative of theta[s/2, 0] along 2h at 2z.
//
// Flex test: for the germ gamma(eps) = 2U eps + 2V eps^2 + 2W eps^3 the rows
//   F    = K(b)
//   F'   = 2 D_U K
//   F''  = 4 D_U^2 K + 4 D_V K
//   F''' = 8 D_U^3 K + 24 D_U D_V K + 12 D_W K
// are the derivatives of eps -> K(b + gamma(eps)) at 0; the image of the germ
// lies on a line to that order iff the row matrix has rank <= 2.

#include <optional>
#include <string>
#include <vector>

#include "thetalab/riemann_matrix.hpp"
#include "thetalab/theta.hpp"
#include "thetalab/types.hpp"

namespace thetalab {

struct KummerPoint {
  CVector coords;  // 2^g homogeneous coordinates
  AbelianPoint base;
  // derivs[r] holds the 2^g coordinates of the r-th requested derivative.
  std::vector<CVector> derivs;
  // True coordinates are exp(scale_exponent) * coords (common to all).
  double scale_exponent = 0.0;
};

KummerPoint kummer_map(const AbelianPoint& z, const RiemannMatrix& tau,
                       std::span<const DerivativeRequest> requests = {});

// sigma_2 / sigma_1 of the 2 x 2^g matrix [k1; k2]: 0 iff projectively equal.
double projective_distance(const CVector& k1, const CVector& k2);

enum class FlexOrder { kSecond = 2, kThird = 3 };

struct FlexCandidate {
  AbelianPoint b;
  IVector m, n;  // b = a/2 + (m + tau n)/2, before reduction
  std::vector<double> singular_values;
  std::vector<double> sigma_ratios;  // sigma_k / sigma_1, k >= 2
  bool pass = false;
};

struct FlexReport {
  AbelianPoint b;
  FlexOrder order = FlexOrder::kSecond;
  std::vector<double> singular_values;
  std::vector<double> sigma_ratios;
  double tolerance = 1e-6;
  bool pass = false;
  std::vector<FlexCandidate> tested_halves;  // empty for a single-point test
  std::vector<std::string> notes;
};

// Jet rows F, F', F'' (and F''' at third order) as a k x 2^g matrix, all on a
// common scale.
CMatrix flex_jet_rows(const AbelianPoint& b, const CVector& U, const CVector& V,
                      const RiemannMatrix& tau, FlexOrder order,
                      const std::optional<CVector>& W = std::nullopt);

// Singular values of the row matrix (descending). Throws kDegenerateJet when
// every row is numerically zero.
std::vector<double> jet_singular_values(const CMatrix& rows);

FlexReport flex_test(const AbelianPoint& b, const CVector& U, const CVector& V,
                     const RiemannMatrix& tau, FlexOrder order,
                     const std::optional<CVector>& W = std::nullopt,
                     double tolerance = 1e-6);

// The 2^(2g) solutions b of 2b = a, reduced, ordered by (m, n)
// lexicographically.
std::vector<AbelianPoint> half_points(const AbelianPoint& a,
                                      const RiemannMatrix& tau);

// Tests every half of a; pass iff some candidate passes. The report's b and
// singular values are those of the best candidate.
FlexReport flex_test_halves(const AbelianPoint& a, const CVector& U,
                            const CVector& V, const RiemannMatrix& tau,
                            FlexOrder order,
                            const std::optional<CVector>& W = std::nullopt,
                            double tolerance = 1e-6, unsigned threads = 0);

// Flex germ (U, V_flex) attached to one-point data (U, V, a, c): V_flex = -V.
// Follows from theta(z + b) theta(z - b) = sum_s K_s(z) K_s(b), which turns the
// one-point residual at z - b into sum_s K_s(z) ((D_U^2 - D_V + c) K_s)(b).
CVector flex_direction_from_one_point(const CVector& V);

struct OnePointFromFlex {
  CVector U, V, a;
  Complex c;
  double fit_residual = 0.0;  // relative least-squares misfit
};

// Converse: writes (D_U^2 + D_Vflex) K(b) = alpha K(b) + beta D_U K(b) in the
// least-squares sense and returns the one-point data a = 2b, V = -Vflex +
// beta U, c = -alpha.
OnePointFromFlex one_point_from_flex(const AbelianPoint& b, const CVector& U,
                                     const CVector& V_flex,
                                     const RiemannMatrix& tau);

struct DecomposabilityReport {
  double indicator = 0.0;  // min |theta[ch](0)| / max over the even set
  std::vector<double> moduli;  // per even characteristic, normalized by max
  std::vector<Characteristic> characteristics;
};

// g = 2 only (kUnsupportedGenus otherwise).
DecomposabilityReport decomposability(const RiemannMatrix& tau,
                                      double target_abs_err = kDefaultTargetAbsErr);
double decomposability_indicator(const RiemannMatrix& tau,
                                 double target_abs_err = kDefaultTargetAbsErr);

}  // namespace thetalab
