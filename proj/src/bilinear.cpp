#include "thetalab/bilinear.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "compensated_sum.hpp"
#include "thetalab/error.hpp"
#include "thetalab/parallel.hpp"
#include "thetalab/random.hpp"

namespace thetalab {

namespace {

const CVector& require(const std::optional<CVector>& v, const char* name) {
  if (!v) throw Error(ErrorCode::kInvalidInput, std::string("jet has no ") + name);
  return *v;
}

void check_dims(const CVector& v, int g, const char* name) {
  if (v.size() != g)
    throw Error(ErrorCode::kInvalidInput,
                std::string(name) + " has wrong dimension");
  if (!v.allFinite())
    throw Error(ErrorCode::kInvalidInput, std::string(name) + " is not finite");
}

ThetaJet eval_requests(const AbelianPoint& z, const RiemannMatrix& tau,
                       const std::vector<DerivativeRequest>& requests) {
  return theta_eval(z, tau, requests);
}

OnePointQuantities one_point_from_jet(const ThetaJet& j) {
  // requests: [U], [U,U], [V]
  return {j.value, j.derivs[0], j.derivs[1], j.derivs[2]};
}

std::vector<DerivativeRequest> one_point_requests(const CVector& U,
                                                  const CVector& V) {
  return {{U}, {U, U}, {V}};
}

}  // namespace

const CVector& DirectionJet::u() const { return require(U, "U"); }
const CVector& DirectionJet::v() const { return require(V, "V"); }
const CVector& DirectionJet::w() const { return require(W, "W"); }

DirectionJet DirectionJet::gauge_scaled(Complex lambda) const {
  DirectionJet out = *this;
  const Complex l2 = lambda * lambda;
  if (out.U) *out.U *= lambda;
  if (out.V) *out.V *= l2;
  if (out.W) *out.W *= l2 * lambda;
  if (out.c) *out.c *= l2;
  if (out.d) *out.d *= l2 * l2;
  if (out.A) *out.A *= lambda;
  if (out.B) *out.B *= l2;
  Complex p = lambda;
  for (auto& z : out.zeta) {
    z *= p;
    p *= lambda;
  }
  p = l2 * l2;
  for (auto& dk : out.dcoef) {
    dk *= p;
    p *= lambda;
  }
  return out;
}

DirectionJet DirectionJet::gauge_normalized() const {
  const CVector& u0 = u();
  const double n = u0.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorCode::kDegenerateJet, "U vanishes; gauge undefined");
  Complex lead{};
  for (Eigen::Index i = 0; i < u0.size(); ++i) {
    if (std::abs(u0[i]) > 1e-14 * n) {
      lead = u0[i];
      break;
    }
  }
  const Complex phase = std::conj(lead) / std::abs(lead);
  DirectionJet out = gauge_scaled(phase / n);
  // Remove the rounding residue of the gauge conditions.
  Eigen::Index k = 0;
  while (std::abs((*out.U)[k]) <= 1e-14) ++k;
  (*out.U)[k] = std::abs((*out.U)[k]);
  return out;
}

BilinearValue combine_terms(std::span<const Complex> terms) {
  detail::CompensatedSum sum;
  detail::CompensatedRealSum abs_sum;
  for (const Complex& t : terms) {
    sum.add(t);
    abs_sum.add(std::abs(t));
  }
  BilinearValue out{sum.value(), abs_sum.value()};
  const bool all_zero = std::all_of(terms.begin(), terms.end(),
                                    [](Complex t) { return t == Complex{}; });
  if (all_zero) return out;
  if (!(out.normalizer >= 1e-300))
    throw Error(ErrorCode::kDegenerateSample,
                "term-sum normalizer below 1e-300");
  return out;
}

std::array<Complex, 8> hirota_terms(const HirotaQuantities& q, Complex d) {
  return {q.d1111 * q.th,      -4.0 * q.d111 * q.d1, 3.0 * q.d11 * q.d11,
          3.0 * q.d22 * q.th,  -3.0 * q.d2 * q.d2,   -3.0 * q.d13 * q.th,
          3.0 * q.d3 * q.d1,   -d * q.th * q.th};
}

std::array<Complex, 6> p_terms(const OnePointQuantities& b,
                               const OnePointQuantities& s, Complex c) {
  return {b.d11 * s.th,  b.th * s.d11,       b.d2 * s.th,
          -b.th * s.d2,  -2.0 * b.d1 * s.d1, c * b.th * s.th};
}

std::array<Complex, 8> p_ab_terms(const OnePointQuantities& b,
                                  const OnePointQuantities& s, Complex A,
                                  Complex B) {
  return {b.d11 * s.th,
          b.th * s.d11,
          b.d2 * s.th,
          -b.th * s.d2,
          -2.0 * b.d1 * s.d1,
          2.0 * A * s.d1 * b.th,
          -2.0 * A * s.th * b.d1,
          (A * A - B) * b.th * s.th};
}

std::array<Complex, 8> hierarchy_terms(const OnePointQuantities& b,
                                       const OnePointQuantities& s, Complex eps,
                                       Complex d_eps) {
  return {eps * b.d11 * s.th,
          eps * b.th * s.d11,
          eps * b.d2 * s.th,
          -eps * b.th * s.d2,
          -2.0 * eps * b.d1 * s.d1,
          -s.d1 * b.th,
          s.th * b.d1,
          d_eps * b.th * s.th};
}

std::array<Complex, 6> longeq_terms(const LongQuantities& q) {
  // lhs - rhs
  return {-q.d11 * q.d2 * q.d2,
          2.0 * q.d12 * q.d2 * q.d1,
          -q.d22 * q.d1 * q.d1,
          q.d11 * q.d11 * q.d11,
          -2.0 * q.d11 * q.d111 * q.d1,
          q.d1111 * q.d1 * q.d1};
}

HirotaQuantities hirota_quantities(const ThetaTensor& t, const CVector& U,
                                   const CVector& V, const CVector& W) {
  HirotaQuantities q;
  q.th = t.value();
  q.d1 = t.d(U);
  q.d11 = t.d(U, U);
  q.d111 = t.d(U, U, U);
  q.d1111 = t.d(U, U, U, U);
  q.d2 = t.d(V);
  q.d22 = t.d(V, V);
  q.d3 = t.d(W);
  q.d13 = t.d(U, W);
  return q;
}

OnePointQuantities one_point_quantities(const ThetaTensor& t, const CVector& U,
                                        const CVector& V) {
  return {t.value(), t.d(U), t.d(U, U), t.d(V)};
}

BilinearValue hirota_value(const AbelianPoint& z, const RiemannMatrix& tau,
                           const DirectionJet& jet) {
  const int g = tau.genus();
  const CVector& U = jet.u();
  const CVector& V = jet.v();
  const CVector& W = jet.w();
  check_dims(U, g, "U");
  check_dims(V, g, "V");
  check_dims(W, g, "W");
  const ThetaJet j = eval_requests(
      z, tau, {{U}, {U, U}, {U, U, U}, {U, U, U, U}, {V}, {V, V}, {W}, {U, W}});
  const HirotaQuantities q{j.value,    j.derivs[0], j.derivs[1],
                           j.derivs[2], j.derivs[3], j.derivs[4],
                           j.derivs[5], j.derivs[6], j.derivs[7]};
  const auto terms = hirota_terms(q, jet.d_or_zero());
  return combine_terms(terms);
}

namespace {

std::pair<OnePointQuantities, OnePointQuantities> one_point_pair(
    const AbelianPoint& z, const RiemannMatrix& tau, const CVector& U,
    const CVector& V, const CVector& a) {
  const int g = tau.genus();
  check_dims(U, g, "U");
  check_dims(V, g, "V");
  check_dims(a, g, "a");
  if (z.z.size() != g)
    throw Error(ErrorCode::kInvalidInput, "point has wrong dimension");
  const auto req = one_point_requests(U, V);
  const ThetaJet base = eval_requests(z, tau, req);
  const ThetaJet shifted = eval_requests(AbelianPoint(CVector(z.z + a)), tau, req);
  return {one_point_from_jet(base), one_point_from_jet(shifted)};
}

}  // namespace

BilinearValue p_value(const AbelianPoint& z, const RiemannMatrix& tau,
                      const DirectionJet& jet, const CVector& a) {
  const auto [b, s] = one_point_pair(z, tau, jet.u(), jet.v(), a);
  const auto terms = p_terms(b, s, jet.c_or_zero());
  return combine_terms(terms);
}

BilinearValue p_ab_value(const AbelianPoint& z, const RiemannMatrix& tau,
                         const DirectionJet& jet, const CVector& a) {
  if (!jet.A || !jet.B)
    throw Error(ErrorCode::kInvalidInput, "jet has no A or B");
  const auto [b, s] = one_point_pair(z, tau, jet.u(), jet.v(), a);
  const auto terms = p_ab_terms(b, s, *jet.A, *jet.B);
  return combine_terms(terms);
}

BilinearValue longeq_value(const AbelianPoint& z, const RiemannMatrix& tau,
                           const DirectionJet& jet) {
  const int g = tau.genus();
  const CVector& U = jet.u();
  const CVector& V = jet.v();
  check_dims(U, g, "U");
  check_dims(V, g, "V");
  const ThetaJet j = eval_requests(
      z, tau, {{U}, {U, U}, {U, U, U}, {U, U, U, U}, {V}, {V, V}, {U, V}});
  if (std::abs(j.value) > 1e-8 * j.value_abs_sum)
    throw Error(ErrorCode::kNotOnDivisor,
                "|theta| exceeds 1e-8 of its local scale");
  const LongQuantities q{j.value,     j.derivs[0], j.derivs[1], j.derivs[2],
                         j.derivs[3], j.derivs[4], j.derivs[5], j.derivs[6]};
  const auto terms = longeq_terms(q);
  return combine_terms(terms);
}

CVector hierarchy_shift(const DirectionJet& jet, Complex eps) {
  if (jet.zeta.empty())
    throw Error(ErrorCode::kInvalidInput, "hierarchy jet has no zeta");
  CVector a = CVector::Zero(jet.zeta.front().size());
  Complex p = eps;
  for (const CVector& zk : jet.zeta) {
    a += 2.0 * p * zk;
    p *= eps;
  }
  return a;
}

Complex hierarchy_d(const DirectionJet& jet, Complex eps) {
  Complex d{};
  Complex p = eps * eps * eps;
  for (const Complex& dk : jet.dcoef) {
    d += dk * p;
    p *= eps;
  }
  return d;
}

namespace {

// D1 along zeta_1 (or U), D2 along V (zero when absent).
std::pair<CVector, CVector> hierarchy_directions(const DirectionJet& jet) {
  if (jet.zeta.empty())
    throw Error(ErrorCode::kInvalidInput, "hierarchy jet has no zeta");
  const CVector& U = jet.U ? *jet.U : jet.zeta.front();
  CVector V = jet.V ? *jet.V : CVector(CVector::Zero(U.size()));
  return {U, V};
}

}  // namespace

DirectionJet hierarchy_as_p_ab(const DirectionJet& jet, Complex eps,
                               CVector* a_out) {
  if (eps == Complex{})
    throw Error(ErrorCode::kInvalidInput, "eps must be nonzero");
  auto [U, V] = hierarchy_directions(jet);
  DirectionJet out;
  out.U = std::move(U);
  out.V = std::move(V);
  const Complex A = -1.0 / (2.0 * eps);
  out.A = A;
  out.B = A * A - hierarchy_d(jet, eps) / eps;
  if (a_out) *a_out = hierarchy_shift(jet, eps);
  return out;
}

BilinearValue hierarchy_value(const AbelianPoint& z, const RiemannMatrix& tau,
                              const DirectionJet& jet, Complex eps) {
  const auto [U, V] = hierarchy_directions(jet);
  const CVector a = hierarchy_shift(jet, eps);
  const auto [b, s] = one_point_pair(z, tau, U, V, a);
  const auto terms = hierarchy_terms(b, s, eps, hierarchy_d(jet, eps));
  return combine_terms(terms);
}

double hirota_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                       const DirectionJet& jet) {
  return hirota_value(z, tau, jet).normalized();
}

double p_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                  const DirectionJet& jet, const CVector& a) {
  return p_value(z, tau, jet, a).normalized();
}

double p_ab_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                     const DirectionJet& jet, const CVector& a) {
  return p_ab_value(z, tau, jet, a).normalized();
}

double longeq_residual(const AbelianPoint& z_on_theta, const RiemannMatrix& tau,
                       const DirectionJet& jet) {
  return longeq_value(z_on_theta, tau, jet).normalized();
}

double hierarchy_residual(const AbelianPoint& z, const RiemannMatrix& tau,
                          const DirectionJet& jet, Complex eps) {
  if (!(std::abs(eps) < 1.0))
    throw Error(ErrorCode::kInvalidInput, "|eps| must be below 1");
  return hierarchy_value(z, tau, jet, eps).normalized();
}

CVector kp_time_direction(const DirectionJet& jet) {
  return 0.75 * jet.w() + 1.5 * jet.c_or_zero() * jet.u();
}

Complex kp_field_u(double x, double y, double t, const AbelianPoint& z,
                   const RiemannMatrix& tau, const DirectionJet& jet) {
  const int g = tau.genus();
  const CVector& U = jet.u();
  const CVector& V = jet.v();
  check_dims(U, g, "U");
  check_dims(V, g, "V");
  const CVector T = kp_time_direction(jet);
  check_dims(T, g, "W");
  const CVector p = x * U + y * V + t * T + z.z;
  const std::vector<DerivativeRequest> req{{U}, {U, U}};
  const ThetaJet j = theta_eval(AbelianPoint(p), tau, req);
  if (std::abs(j.value) < 1e-10 * j.value_abs_sum)
    throw Error(ErrorCode::kPole, "theta vanishes at the field point");
  const Complex r1 = j.derivs[0] / j.value;
  const Complex r2 = j.derivs[1] / j.value;
  return 2.0 * (r2 - r1 * r1) + jet.c_or_zero();
}

Complex baker_akhiezer(double x, double y, const AbelianPoint& z,
                       const RiemannMatrix& tau, const DirectionJet& jet,
                       const CVector& a, Complex A, Complex B) {
  const int g = tau.genus();
  const CVector& U = jet.u();
  const CVector& V = jet.v();
  check_dims(U, g, "U");
  check_dims(V, g, "V");
  check_dims(a, g, "a");
  const CVector p = x * U + y * V + z.z;
  const ThetaJet den = theta_eval(AbelianPoint(p), tau);
  if (std::abs(den.value) < 1e-10 * den.value_abs_sum)
    throw Error(ErrorCode::kPole, "theta vanishes in the denominator");
  const ThetaJet num = theta_eval(AbelianPoint(CVector(p + a)), tau);
  const Complex expo =
      A * x + B * y + (num.scale_exponent - den.scale_exponent);
  return std::exp(expo) * num.value / den.value;
}

ResidualReport make_report(std::vector<AbelianPoint> points,
                           std::vector<double> residuals, double tolerance,
                           Normalization normalization) {
  ResidualReport r;
  r.sample_points = std::move(points);
  r.residuals = std::move(residuals);
  r.normalization = normalization;
  r.tolerance = tolerance;
  detail::CompensatedRealSum sum;
  for (double v : r.residuals) {
    r.max_residual = std::max(r.max_residual, v);
    sum.add(v);
  }
  r.vacuous = r.residuals.empty();
  r.mean_residual =
      r.vacuous ? 0.0 : sum.value() / static_cast<double>(r.residuals.size());
  r.pass = r.max_residual <= tolerance;
  if (r.vacuous) r.notes.emplace_back("no samples: vacuous pass");
  return r;
}

namespace {

CVector fundamental_point(const RiemannMatrix& tau, Rng& rng) {
  const int g = tau.genus();
  RVector a(g), b(g);
  for (int i = 0; i < g; ++i) a[i] = rng.uniform(-0.5, 0.5);
  for (int i = 0; i < g; ++i) b[i] = rng.uniform(-0.5, 0.5);
  return a.cast<Complex>() + tau.tau() * b.cast<Complex>();
}

}  // namespace

std::vector<CVector> sample_fundamental(const RiemannMatrix& tau, int count,
                                        std::uint64_t seed) {
  std::vector<CVector> out;
  out.reserve(std::max(count, 0));
  for (int i = 0; i < count; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    out.push_back(fundamental_point(tau, rng));
  }
  return out;
}

ResidualReport residual_sweep(
    const RiemannMatrix& tau, int count, std::uint64_t seed, double tolerance,
    const std::function<double(const AbelianPoint&)>& residual,
    unsigned threads) {
  if (count < 0) throw Error(ErrorCode::kInvalidInput, "negative sample count");
  const auto first = sample_fundamental(tau, count, seed);
  struct Sample {
    AbelianPoint point;
    double value = 0.0;
    int redraws = 0;
  };
  auto results = parallel_map(
      first.size(),
      [&](std::size_t i) {
        Sample s{AbelianPoint(first[i], true), 0.0, 0};
        for (int attempt = 0;; ++attempt) {
          try {
            s.value = residual(s.point);
            s.redraws = attempt;
            return s;
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kDegenerateSample || attempt == 3) throw;
          }
          Rng rng(mix_seed(seed, 0x5e5a + attempt), i);
          s.point = AbelianPoint(fundamental_point(tau, rng), true);
        }
      },
      threads);
  std::vector<AbelianPoint> points;
  std::vector<double> values;
  int redrawn = 0;
  for (auto& s : results) {
    points.push_back(std::move(s.point));
    values.push_back(s.value);
    redrawn += s.redraws;
  }
  ResidualReport r = make_report(std::move(points), std::move(values), tolerance);
  if (redrawn > 0)
    r.notes.push_back(std::to_string(redrawn) + " degenerate samples redrawn");
  return r;
}

}  // namespace thetalab
