#include "thetalab/kummer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "thetalab/error.hpp"
#include "thetalab/parallel.hpp"

namespace thetalab {

namespace {

RVector sigma_eps(int g, unsigned s) {
  RVector eps(g);
  for (int i = 0; i < g; ++i) eps[i] = ((s >> (g - 1 - i)) & 1u) ? 0.5 : 0.0;
  return eps;
}

void check_vec(const CVector& v, int g, const char* name) {
  if (v.size() != g || !v.allFinite())
    throw Error(ErrorCode::kInvalidInput,
                std::string(name) + " must be a finite vector of length g");
}

}  // namespace

KummerPoint kummer_map(const AbelianPoint& z, const RiemannMatrix& tau,
                       std::span<const DerivativeRequest> requests) {
  const int g = tau.genus();
  check_vec(z.z, g, "z");
  const RiemannMatrix tau2 = tau.scaled(2.0);
  std::vector<DerivativeRequest> doubled(requests.begin(), requests.end());
  for (auto& req : doubled)
    for (auto& h : req) h = 2.0 * h;
  const CVector z2 = 2.0 * z.z;

  const unsigned n = 1u << g;
  std::vector<ThetaJet> jets;
  jets.reserve(n);
  double smax = -std::numeric_limits<double>::infinity();
  for (unsigned s = 0; s < n; ++s) {
    const Characteristic ch{sigma_eps(g, s), RVector::Zero(g)};
    jets.push_back(theta_char_eval(AbelianPoint(z2), tau2, ch, doubled));
    smax = std::max(smax, jets.back().scale_exponent);
  }

  KummerPoint k;
  k.base = z;
  k.scale_exponent = smax;
  k.coords.resize(n);
  k.derivs.assign(doubled.size(), CVector(n));
  for (unsigned s = 0; s < n; ++s) {
    const double f = std::exp(jets[s].scale_exponent - smax);
    k.coords[s] = f * jets[s].value;
    for (std::size_t r = 0; r < doubled.size(); ++r)
      k.derivs[r][s] = f * jets[s].derivs[r];
  }
  return k;
}

double projective_distance(const CVector& k1, const CVector& k2) {
  CMatrix m(2, k1.size());
  m.row(0) = k1.transpose();
  m.row(1) = k2.transpose();
  const auto sv = jet_singular_values(m);
  return sv.size() < 2 ? 0.0 : sv[1] / sv[0];
}

CMatrix flex_jet_rows(const AbelianPoint& b, const CVector& U, const CVector& V,
                      const RiemannMatrix& tau, FlexOrder order,
                      const std::optional<CVector>& W) {
  const int g = tau.genus();
  check_vec(U, g, "U");
  check_vec(V, g, "V");
  std::vector<DerivativeRequest> req{{U}, {U, U}, {V}};
  if (order == FlexOrder::kThird) {
    if (!W) throw Error(ErrorCode::kInvalidInput, "third order needs W");
    check_vec(*W, g, "W");
    req.push_back({U, U, U});
    req.push_back({U, V});
    req.push_back({*W});
  }
  const KummerPoint k = kummer_map(b, tau, req);
  const int rows = order == FlexOrder::kThird ? 4 : 3;
  CMatrix m(rows, k.coords.size());
  m.row(0) = k.coords.transpose();
  m.row(1) = 2.0 * k.derivs[0].transpose();
  m.row(2) = (4.0 * k.derivs[1] + 4.0 * k.derivs[2]).transpose();
  if (rows == 4)
    m.row(3) =
        (8.0 * k.derivs[3] + 24.0 * k.derivs[4] + 12.0 * k.derivs[5]).transpose();
  return m;
}

std::vector<double> jet_singular_values(const CMatrix& rows) {
  if (!rows.allFinite())
    throw Error(ErrorCode::kDegenerateJet, "jet rows are not finite");
  Eigen::JacobiSVD<CMatrix> svd(rows);
  const auto& s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  if (out.empty() || !(out[0] > 1e-300))
    throw Error(ErrorCode::kDegenerateJet, "all jet rows vanish");
  out.resize(rows.rows(), 0.0);
  return out;
}

namespace {

void fill_verdict(const std::vector<double>& sv, double tol,
                  std::vector<double>& ratios, bool& pass) {
  ratios.clear();
  for (std::size_t k = 1; k < sv.size(); ++k) ratios.push_back(sv[k] / sv[0]);
  pass = ratios.size() < 2 || ratios[1] <= tol;
}

}  // namespace

FlexReport flex_test(const AbelianPoint& b, const CVector& U, const CVector& V,
                     const RiemannMatrix& tau, FlexOrder order,
                     const std::optional<CVector>& W, double tolerance) {
  if (U.size() > 0 && U.norm() == 0.0)
    throw Error(ErrorCode::kInvalidInput, "U must be nonzero");
  FlexReport r;
  r.b = b;
  r.order = order;
  r.tolerance = tolerance;
  r.singular_values =
      jet_singular_values(flex_jet_rows(b, U, V, tau, order, W));
  fill_verdict(r.singular_values, tolerance, r.sigma_ratios, r.pass);
  if (tau.genus() == 1)
    r.notes.emplace_back(
        "g = 1: the Kummer image is P^1, so any jet has rank <= 2");
  return r;
}

std::vector<AbelianPoint> half_points(const AbelianPoint& a,
                                      const RiemannMatrix& tau) {
  const int g = tau.genus();
  check_vec(a.z, g, "a");
  const CVector b0 = 0.5 * a.z;
  const unsigned n = 1u << g;
  std::vector<AbelianPoint> out;
  out.reserve(n * n);
  for (unsigned mi = 0; mi < n; ++mi)
    for (unsigned ni = 0; ni < n; ++ni) {
      const RVector m = sigma_eps(g, mi), nn = sigma_eps(g, ni);
      const CVector b = b0 + m.cast<Complex>() + tau.tau() * nn.cast<Complex>();
      out.push_back(reduce_point(b, tau).point);
    }
  return out;
}

FlexReport flex_test_halves(const AbelianPoint& a, const CVector& U,
                            const CVector& V, const RiemannMatrix& tau,
                            FlexOrder order, const std::optional<CVector>& W,
                            double tolerance, unsigned threads) {
  const int g = tau.genus();
  const auto halves = half_points(a, tau);
  const unsigned n = 1u << g;
  auto cands = parallel_map(
      halves.size(),
      [&](std::size_t i) {
        FlexCandidate c;
        c.b = halves[i];
        c.m = IVector(g);
        c.n = IVector(g);
        const unsigned mi = static_cast<unsigned>(i) / n, ni = static_cast<unsigned>(i) % n;
        for (int k = 0; k < g; ++k) {
          c.m[k] = (mi >> (g - 1 - k)) & 1u;
          c.n[k] = (ni >> (g - 1 - k)) & 1u;
        }
        c.singular_values =
            jet_singular_values(flex_jet_rows(c.b, U, V, tau, order, W));
        fill_verdict(c.singular_values, tolerance, c.sigma_ratios, c.pass);
        return c;
      },
      threads);

  FlexReport r;
  r.order = order;
  r.tolerance = tolerance;
  std::size_t best = 0;
  auto key = [](const FlexCandidate& c) {
    return c.sigma_ratios.size() < 2 ? 0.0 : c.sigma_ratios[1];
  };
  for (std::size_t i = 1; i < cands.size(); ++i)
    if (key(cands[i]) < key(cands[best])) best = i;
  r.b = cands[best].b;
  r.singular_values = cands[best].singular_values;
  r.sigma_ratios = cands[best].sigma_ratios;
  r.pass = std::any_of(cands.begin(), cands.end(),
                       [](const FlexCandidate& c) { return c.pass; });
  r.tested_halves = std::move(cands);
  if (g == 1)
    r.notes.emplace_back(
        "g = 1: the Kummer image is P^1, so any jet has rank <= 2");
  r.notes.emplace_back("irreducibility of the group generated by a is assumed, "
                       "not tested");
  return r;
}

CVector flex_direction_from_one_point(const CVector& V) { return -V; }

OnePointFromFlex one_point_from_flex(const AbelianPoint& b, const CVector& U,
                                     const CVector& V_flex,
                                     const RiemannMatrix& tau) {
  const int g = tau.genus();
  check_vec(U, g, "U");
  check_vec(V_flex, g, "V");
  const std::vector<DerivativeRequest> req{{U}, {U, U}, {V_flex}};
  const KummerPoint k = kummer_map(b, tau, req);
  CMatrix M(k.coords.size(), 2);
  M.col(0) = k.coords;
  M.col(1) = k.derivs[0];
  const CVector q = k.derivs[1] + k.derivs[2];
  const CVector x = M.colPivHouseholderQr().solve(q);
  OnePointFromFlex out;
  out.U = U;
  out.V = -V_flex + x[1] * U;
  out.c = -x[0];
  out.a = 2.0 * b.z;
  const double qn = q.norm();
  out.fit_residual = qn == 0.0 ? 0.0 : (q - M * x).norm() / qn;
  return out;
}

DecomposabilityReport decomposability(const RiemannMatrix& tau,
                                      double target_abs_err) {
  if (tau.genus() != 2)
    throw Error(ErrorCode::kUnsupportedGenus,
                "decomposability indicator is implemented for g = 2 only");
  DecomposabilityReport r;
  std::vector<double> logs;
  for (unsigned e = 0; e < 4; ++e)
    for (unsigned d = 0; d < 4; ++d) {
      const Characteristic ch{sigma_eps(2, e), sigma_eps(2, d)};
      if (ch.parity() != 0) continue;
      const ThetaJet j =
          theta_char_eval(AbelianPoint(CVector(CVector::Zero(2))), tau, ch, {},
                          target_abs_err);
      r.characteristics.push_back(ch);
      logs.push_back(std::log(std::abs(j.value)) + j.scale_exponent);
    }
  const double lmax = *std::max_element(logs.begin(), logs.end());
  for (double l : logs) r.moduli.push_back(std::exp(l - lmax));
  r.indicator = *std::min_element(r.moduli.begin(), r.moduli.end());
  return r;
}

double decomposability_indicator(const RiemannMatrix& tau,
                                 double target_abs_err) {
  return decomposability(tau, target_abs_err).indicator;
}

}  // namespace thetalab
