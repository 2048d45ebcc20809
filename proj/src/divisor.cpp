#include "thetalab/divisor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <tuple>

#include "thetalab/error.hpp"
#include "thetalab/parallel.hpp"
#include "thetalab/random.hpp"

namespace thetalab {

std::string to_string(DivisorKind kind) {
  switch (kind) {
    case DivisorKind::kTheta:
      return "Theta";
    case DivisorKind::kD1Theta:
      return "D1Theta";
    case DivisorKind::kThetaCapThetaA:
      return "ThetaCapThetaA";
  }
  return "?";
}

std::string to_string(WeilRelation which) {
  switch (which) {
    case WeilRelation::kWeil:
      return "weil";
    case WeilRelation::kWeil1:
      return "weil1";
    case WeilRelation::kWeil2:
      return "weil2";
  }
  return "?";
}

double torus_distance(const CVector& x, const CVector& y,
                      const RiemannMatrix& tau) {
  auto [a, b] = lattice_coordinates(CVector(x - y), tau);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a[i] -= std::round(a[i]);
    b[i] -= std::round(b[i]);
  }
  return (a.cast<Complex>() + tau.tau() * b.cast<Complex>()).norm();
}

std::vector<DivisorPoint> dedup_modulo_lattice(std::vector<DivisorPoint> pts,
                                               const RiemannMatrix& tau,
                                               double distance) {
  std::vector<std::pair<RVector, std::size_t>> keys;
  keys.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto [a, b] = lattice_coordinates(pts[i].z.z, tau);
    RVector k(a.size() + b.size());
    k << a, b;
    keys.emplace_back(std::move(k), i);
  }
  std::sort(keys.begin(), keys.end(), [](const auto& x, const auto& y) {
    for (Eigen::Index i = 0; i < x.first.size(); ++i)
      if (x.first[i] != y.first[i]) return x.first[i] < y.first[i];
    return x.second < y.second;
  });
  std::vector<DivisorPoint> out;
  for (const auto& [key, idx] : keys) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const DivisorPoint& p) {
      return torus_distance(p.z.z, pts[idx].z.z, tau) <= distance;
    });
    if (!dup) out.push_back(std::move(pts[idx]));
  }
  return out;
}

namespace {

struct Eval {
  CVector f;         // system values (common row scale irrelevant)
  CMatrix jac;       // d f / d s
  RVector normalized;  // |f_i| / local scale
};

using System = std::function<Eval(const CVector& s)>;

struct NewtonResult {
  CVector s;
  bool converged = false;
  double last_step_ratio = 0.0;
  int iterations = 0;
};

NewtonResult newton(const System& sys, CVector s, const SamplePlan& plan,
                    double max_step) {
  NewtonResult r;
  double prev = -1.0, last = -1.0;
  for (int it = 0; it <= plan.iterations; ++it) {
    Eval e = sys(s);
    if (!e.f.allFinite() || !e.jac.allFinite()) return r;
    if (e.normalized.maxCoeff() <= plan.tol) {
      r.s = s;
      r.converged = true;
      r.iterations = it;
      r.last_step_ratio = (prev > 0.0 && last >= 0.0) ? last / prev : 0.0;
      return r;
    }
    if (it == plan.iterations) break;
    const auto lu = e.jac.fullPivLu();
    if (!lu.isInvertible()) return r;
    CVector step = lu.solve(e.f);
    double n = step.norm();
    if (!std::isfinite(n)) return r;
    if (n > max_step) {
      step *= max_step / n;
      n = max_step;
    }
    s -= step;
    prev = last;
    last = n;
    // Steps at rounding level: accept the current point if it is close enough.
    if (n <= 1e-15 * (1.0 + s.norm())) {
      const Eval fin = sys(s);
      if (fin.normalized.maxCoeff() <= plan.accept) {
        r.s = s;
        r.converged = true;
        r.iterations = it + 1;
        r.last_step_ratio = prev > 0.0 ? last / prev : 0.0;
      }
      return r;
    }
  }
  return r;
}

CVector fundamental_point(const RiemannMatrix& tau, Rng& rng) {
  const int g = tau.genus();
  RVector a(g), b(g);
  for (int i = 0; i < g; ++i) a[i] = rng.uniform(-0.5, 0.5);
  for (int i = 0; i < g; ++i) b[i] = rng.uniform(-0.5, 0.5);
  return a.cast<Complex>() + tau.tau() * b.cast<Complex>();
}

double max_step_for(const RiemannMatrix& tau) {
  return 0.25 * std::sqrt(tau.im_min_eigenvalue());
}

double scaled_abs(Complex v, double abs_sum) {
  return abs_sum > 0.0 ? std::abs(v) / abs_sum : std::abs(v);
}

DivisorSample finish(DivisorKind kind, std::vector<std::optional<DivisorPoint>> found,
                     const RiemannMatrix& tau, const SamplePlan& plan) {
  DivisorSample out;
  out.kind = kind;
  out.starts = plan.starts;
  for (auto& p : found)
    if (p) out.raw_points.push_back(std::move(*p));
  out.points = dedup_modulo_lattice(out.raw_points, tau, plan.dedup_distance);
  out.under_sampled = static_cast<int>(out.points.size()) < plan.count;
  if (out.under_sampled)
    out.notes.push_back("under-sampled: " + std::to_string(out.points.size()) +
                        " distinct points of " + std::to_string(plan.count) +
                        " requested");
  return out;
}

void check_plan(const SamplePlan& plan) {
  if (plan.count < 1 || plan.starts < 1 || plan.iterations < 1 ||
      !(plan.tol > 0.0) || !(plan.accept > 0.0))
    throw Error(ErrorCode::kInvalidInput, "invalid sample plan");
}

// Re-evaluates at the reduced representative and applies the acceptance test.
std::optional<DivisorPoint> accept_point(const CVector& z, DivisorKind kind,
                                         const RiemannMatrix& tau,
                                         const DirectionJet* jet,
                                         const CVector* a,
                                         const NewtonResult& nr,
                                         const SamplePlan& plan) {
  if (nr.last_step_ratio > 0.5) return std::nullopt;
  DivisorPoint p;
  p.z = reduce_point(z, tau).point;
  p.kind = kind;
  p.constraints_met = divisor_constraints(p.z, tau, kind, jet, a);
  p.last_step_ratio = nr.last_step_ratio;
  p.iterations = nr.iterations;
  for (const auto& c : p.constraints_met)
    if (!(c.magnitude <= plan.accept)) return std::nullopt;
  return p;
}

// Two-unknown sampling on the planes z0 + s1 w1 + s2 w2.
DivisorSample sample_two_equations(
    const RiemannMatrix& tau, DivisorKind kind, const DirectionJet* jet,
    const CVector* a, const SamplePlan& plan,
    const std::function<Eval(const CVector& z, const CVector& w1,
                             const CVector& w2)>& system) {
  const int g = tau.genus();
  auto found = parallel_map(
      static_cast<std::size_t>(plan.starts),
      [&](std::size_t i) -> std::optional<DivisorPoint> {
        Rng rng(plan.seed, i);
        const CVector z0 = fundamental_point(tau, rng);
        CVector w1, w2;
        if (g == 2) {
          w1 = CVector::Unit(2, 0);
          w2 = CVector::Unit(2, 1);
        } else {
          w1 = rng.unit_complex(g);
          w2 = rng.unit_complex(g);
        }
        const System sys = [&](const CVector& s) {
          return system(CVector(z0 + s[0] * w1 + s[1] * w2), w1, w2);
        };
        const NewtonResult nr =
            newton(sys, CVector::Zero(2), plan, max_step_for(tau));
        if (!nr.converged) return std::nullopt;
        const CVector z = z0 + nr.s[0] * w1 + nr.s[1] * w2;
        return accept_point(z, kind, tau, jet, a, nr, plan);
      },
      plan.threads);
  DivisorSample out = finish(kind, std::move(found), tau, plan);
  if (g >= 3) {
    out.slice_based = true;
    out.notes.emplace_back(
        "g >= 3: sampled on random 2-plane slices; not exhaustive");
  }
  return out;
}

}  // namespace

std::vector<Constraint> divisor_constraints(const AbelianPoint& z,
                                            const RiemannMatrix& tau,
                                            DivisorKind kind,
                                            const DirectionJet* jet,
                                            const CVector* a) {
  std::vector<Constraint> out;
  switch (kind) {
    case DivisorKind::kTheta: {
      const ThetaJet j = theta_eval(z, tau);
      out.push_back({"theta", scaled_abs(j.value, j.value_abs_sum)});
      break;
    }
    case DivisorKind::kD1Theta: {
      if (!jet) throw Error(ErrorCode::kInvalidInput, "D1Theta needs a jet");
      const std::vector<DerivativeRequest> req{{jet->u()}};
      const ThetaJet j = theta_eval(z, tau, req);
      out.push_back({"theta", scaled_abs(j.value, j.value_abs_sum)});
      out.push_back({"D1theta", scaled_abs(j.derivs[0], j.deriv_abs_sums[0])});
      break;
    }
    case DivisorKind::kThetaCapThetaA: {
      if (!a) throw Error(ErrorCode::kInvalidInput, "ThetaCapThetaA needs a");
      const ThetaJet j = theta_eval(z, tau);
      const ThetaJet ja = theta_eval(AbelianPoint(CVector(z.z + *a)), tau);
      out.push_back({"theta", scaled_abs(j.value, j.value_abs_sum)});
      out.push_back({"theta_a", scaled_abs(ja.value, ja.value_abs_sum)});
      break;
    }
  }
  return out;
}

DivisorSample sample_theta_divisor(const RiemannMatrix& tau,
                                   const SamplePlan& plan) {
  check_plan(plan);
  const int g = tau.genus();
  auto found = parallel_map(
      static_cast<std::size_t>(plan.starts),
      [&](std::size_t i) -> std::optional<DivisorPoint> {
        Rng rng(plan.seed, i);
        const CVector z0 = fundamental_point(tau, rng);
        const CVector w = rng.unit_complex(g);
        const std::vector<DerivativeRequest> req{{w}};
        const System sys = [&](const CVector& s) {
          const ThetaJet j = theta_eval(AbelianPoint(CVector(z0 + s[0] * w)), tau, req);
          Eval e;
          e.f = CVector::Constant(1, j.value);
          e.jac = CMatrix::Constant(1, 1, j.derivs[0]);
          e.normalized = RVector::Constant(1, scaled_abs(j.value, j.value_abs_sum));
          return e;
        };
        const NewtonResult nr =
            newton(sys, CVector::Zero(1), plan, max_step_for(tau));
        if (!nr.converged) return std::nullopt;
        return accept_point(CVector(z0 + nr.s[0] * w), DivisorKind::kTheta, tau,
                            nullptr, nullptr, nr, plan);
      },
      plan.threads);
  return finish(DivisorKind::kTheta, std::move(found), tau, plan);
}

DivisorSample sample_D1_theta(const RiemannMatrix& tau, const DirectionJet& jet,
                              const SamplePlan& plan) {
  check_plan(plan);
  const int g = tau.genus();
  const CVector U = jet.u();
  if (U.size() != g || U.norm() == 0.0)
    throw Error(ErrorCode::kInvalidInput, "U must be a nonzero g-vector");
  if (g == 1) {
    DivisorSample out;
    out.kind = DivisorKind::kD1Theta;
    out.starts = 0;
    out.notes.emplace_back(
        "g = 1: theta has simple zeros, so D1 Theta is empty");
    return out;
  }
  return sample_two_equations(
      tau, DivisorKind::kD1Theta, &jet, nullptr, plan,
      [&](const CVector& z, const CVector& w1, const CVector& w2) {
        const std::vector<DerivativeRequest> req{{w1}, {w2}, {U}, {U, w1}, {U, w2}};
        const ThetaJet j = theta_eval(AbelianPoint(z), tau, req);
        Eval e;
        e.f.resize(2);
        e.f << j.value, j.derivs[2];
        e.jac.resize(2, 2);
        e.jac << j.derivs[0], j.derivs[1], j.derivs[3], j.derivs[4];
        e.normalized.resize(2);
        e.normalized << scaled_abs(j.value, j.value_abs_sum),
            scaled_abs(j.derivs[2], j.deriv_abs_sums[2]);
        return e;
      });
}

DivisorSample sample_theta_cap_theta_a(const RiemannMatrix& tau,
                                       const CVector& a, const SamplePlan& plan) {
  check_plan(plan);
  const int g = tau.genus();
  if (a.size() != g || !a.allFinite())
    throw Error(ErrorCode::kInvalidInput, "a must be a finite g-vector");
  if (g == 1) {
    DivisorSample out;
    out.kind = DivisorKind::kThetaCapThetaA;
    out.notes.emplace_back(
        "g = 1: Theta and Theta_a are single points; they meet only for a in "
        "the lattice");
    return out;
  }
  return sample_two_equations(
      tau, DivisorKind::kThetaCapThetaA, nullptr, &a, plan,
      [&](const CVector& z, const CVector& w1, const CVector& w2) {
        const std::vector<DerivativeRequest> req{{w1}, {w2}};
        const ThetaJet j = theta_eval(AbelianPoint(z), tau, req);
        const ThetaJet ja = theta_eval(AbelianPoint(CVector(z + a)), tau, req);
        Eval e;
        e.f.resize(2);
        e.f << j.value, ja.value;
        e.jac.resize(2, 2);
        e.jac << j.derivs[0], j.derivs[1], ja.derivs[0], ja.derivs[1];
        e.normalized.resize(2);
        e.normalized << scaled_abs(j.value, j.value_abs_sum),
            scaled_abs(ja.value, ja.value_abs_sum);
        return e;
      });
}

ResidualReport weil_check(const std::vector<DivisorPoint>& points,
                          const RiemannMatrix& tau, const DirectionJet& jet,
                          const std::optional<CVector>& a, WeilRelation which,
                          double tolerance) {
  const DivisorKind need = which == WeilRelation::kWeil1
                               ? DivisorKind::kThetaCapThetaA
                               : DivisorKind::kD1Theta;
  if (which != WeilRelation::kWeil && !a)
    throw Error(ErrorCode::kInvalidInput, to_string(which) + " needs a");
  std::vector<AbelianPoint> zs;
  std::vector<double> values;
  for (const DivisorPoint& p : points) {
    if (p.kind != need)
      throw Error(ErrorCode::kInvalidInput,
                  to_string(which) + " needs " + to_string(need) + " points");
    const CVector& U = jet.u();
    double v = 0.0;
    if (which == WeilRelation::kWeil1) {
      const std::vector<DerivativeRequest> req{{U}};
      const ThetaJet j = theta_eval(p.z, tau, req);
      const ThetaJet ja = theta_eval(AbelianPoint(CVector(p.z.z + *a)), tau, req);
      v = std::min(scaled_abs(j.derivs[0], j.deriv_abs_sums[0]),
                   scaled_abs(ja.derivs[0], ja.deriv_abs_sums[0]));
    } else {
      const CVector& V = jet.v();
      const std::vector<DerivativeRequest> req{{U, U}, {V}};
      const ThetaJet j = theta_eval(p.z, tau, req);
      const double scale = j.deriv_abs_sums[0] + j.deriv_abs_sums[1];
      const double plus = scaled_abs(j.derivs[0] + j.derivs[1], scale);
      if (which == WeilRelation::kWeil) {
        v = std::min(plus, scaled_abs(j.derivs[0] - j.derivs[1], scale));
      } else {
        const ThetaJet ja = theta_eval(AbelianPoint(CVector(p.z.z + *a)), tau);
        v = std::min(plus, scaled_abs(ja.value, ja.value_abs_sum));
      }
    }
    zs.push_back(p.z);
    values.push_back(v);
  }
  ResidualReport r = make_report(std::move(zs), std::move(values), tolerance);
  r.notes.push_back(to_string(which) + " checked pointwise as alternative vanishing");
  return r;
}

}  // namespace thetalab
