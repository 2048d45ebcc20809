#pragma once

// Newton sampling of the theta divisor, of D1 Theta = {theta = D1 theta = 0}
// and of Theta cap Theta_a, plus the pointwise Weil-type containment checks.
//
// Every Newton start is an independent seeded stream, results are collected by
// start index and deduplicated modulo the lattice in a sorted post-pass, so the
// output does not depend on the worker count.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thetalab/bilinear.hpp"
#include "thetalab/riemann_matrix.hpp"
#include "thetalab/theta.hpp"

namespace thetalab {

enum class DivisorKind { kTheta, kD1Theta, kThetaCapThetaA };

std::string to_string(DivisorKind kind);

struct Constraint {
  std::string id;  // "theta", "D1theta", "theta_a"
  double magnitude = 0.0;  // |f| / (sum of |series terms| of f)
};

struct DivisorPoint {
  AbelianPoint z;  // reduced
  DivisorKind kind = DivisorKind::kTheta;
  std::vector<Constraint> constraints_met;
  double last_step_ratio = 0.0;  // |last Newton step| / |previous step|
  int iterations = 0;
};

struct SamplePlan {
  int count = 50;          // distinct points wanted
  int starts = 200;        // Newton starts
  int iterations = 50;     // per start
  double tol = 1e-12;      // convergence: normalized residual
  double accept = 1e-10;   // acceptance: normalized residual
  double dedup_distance = 1e-6;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct DivisorSample {
  DivisorKind kind = DivisorKind::kTheta;
  std::vector<DivisorPoint> points;      // distinct modulo the lattice
  std::vector<DivisorPoint> raw_points;  // every accepted start, by start index
  int starts = 0;
  bool under_sampled = false;
  bool slice_based = false;  // g >= 3 two-equation sampling on 2-planes
  std::vector<std::string> notes;
};

// Lattice distance of x - y to the nearest lattice point.
double torus_distance(const CVector& x, const CVector& y,
                      const RiemannMatrix& tau);

// Sorted by reduced lattice coordinates, then greedily merged within
// `distance`.
std::vector<DivisorPoint> dedup_modulo_lattice(std::vector<DivisorPoint> pts,
                                               const RiemannMatrix& tau,
                                               double distance);

// 1-D Newton on t -> theta(z0 + t w) for seeded random (z0, w).
DivisorSample sample_theta_divisor(const RiemannMatrix& tau,
                                   const SamplePlan& plan);

// theta = 0, D1 theta = 0 by 2-unknown Newton on seeded 2-planes (the whole
// space for g = 2). Empty with a note for g = 1.
DivisorSample sample_D1_theta(const RiemannMatrix& tau, const DirectionJet& jet,
                              const SamplePlan& plan);

// theta(z) = 0, theta(z + a) = 0 by the same 2-unknown Newton.
DivisorSample sample_theta_cap_theta_a(const RiemannMatrix& tau,
                                       const CVector& a, const SamplePlan& plan);

// Normalized constraint magnitudes of a point of the given kind.
std::vector<Constraint> divisor_constraints(const AbelianPoint& z,
                                            const RiemannMatrix& tau,
                                            DivisorKind kind,
                                            const DirectionJet* jet,
                                            const CVector* a);

enum class WeilRelation { kWeil, kWeil1, kWeil2 };

std::string to_string(WeilRelation which);

// Per point, the smaller of the two normalized alternative factors:
//   weil : (D1^2 + D2) theta,  (D1^2 - D2) theta        on D1 Theta
//   weil1: D1 theta,           D1 theta_a               on Theta cap Theta_a
//   weil2: (D1^2 + D2) theta,  theta_a                  on D1 Theta
// An empty point list is a vacuous pass.
ResidualReport weil_check(const std::vector<DivisorPoint>& points,
                          const RiemannMatrix& tau, const DirectionJet& jet,
                          const std::optional<CVector>& a, WeilRelation which,
                          double tolerance = 1e-6);

}  // namespace thetalab
