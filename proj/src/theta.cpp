#include "thetalab/theta.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "compensated_sum.hpp"
#include "thetalab/error.hpp"

namespace thetalab {

namespace {

constexpr int kMaxRequestOrder = 4;

// Everything the lattice sum needs once the argument has been reduced.
struct PreparedSum {
  RVector w_re;    // real part of the reduced argument
  RVector beta;    // imaginary lattice coordinates of the reduced argument
  RVector offset;  // derivative weights use (j + offset)
  double scale = 0.0;
  Complex phase{1.0, 0.0};
};

void check_point(const CVector& z, const RiemannMatrix& tau) {
  if (z.size() != tau.genus()) {
    std::ostringstream msg;
    msg << "point has dimension " << z.size() << ", expected " << tau.genus();
    throw Error(ErrorCode::kInvalidInput, msg.str());
  }
  if (!z.allFinite())
    throw Error(ErrorCode::kInvalidInput, "point has non-finite components");
}

PreparedSum prepare(const AbelianPoint& z, const RiemannMatrix& tau,
                    const Characteristic* ch) {
  check_point(z.z, tau);
  const int g = tau.genus();
  PreparedSum out;
  Complex prefactor{0.0, 0.0};
  CVector w = z.z;
  RVector eps = RVector::Zero(g);
  if (ch != nullptr) {
    eps = ch->eps;
    const CVector eps_c = eps.cast<Complex>();
    const CVector delta_c = ch->delta.cast<Complex>();
    w = z.z + delta_c + tau.tau() * eps_c;
    prefactor = kI * kPi * eps_c.dot(tau.tau() * eps_c) +
                2.0 * kPi * kI * eps_c.dot(z.z + delta_c);
  }

  IVector m = IVector::Zero(g);
  CVector w0 = w;
  if (ch != nullptr || !z.reduced) {
    ReducedPoint red = reduce_point(w, tau);
    w0 = red.point.z;
    m = red.m;
    // exp(factor_exponent) * quasiperiod_factor = exp(E) with E complex.
    prefactor += Complex(red.factor_exponent, std::arg(red.quasiperiod_factor));
  }

  out.w_re = w0.real();
  out.beta = tau.im_inverse() * w0.imag();
  out.offset = eps - m.cast<double>();
  out.scale = prefactor.real() + kPi * out.beta.dot(tau.im() * out.beta);
  out.phase = std::polar(1.0, prefactor.imag());
  return out;
}

// Upper bound on sum over lattice points x in beta + Z^g with ||R x|| > radius
// of weight(x) * exp(-pi ||R x||^2), where weight(x) <= C (||x|| + delta)^k.
// Uses the packing count #{||R x|| < s} <= (2 s / rho + 1)^g with rho the
// smallest singular value of R.
double tail_bound(double radius, int g, int order, double weight_norm,
                  double sigma, double delta) {
  constexpr double kShell = 0.25;
  const double peak =
      order == 0 ? 0.0
                 : 0.5 * (-sigma * delta +
                          std::sqrt(sigma * sigma * delta * delta +
                                    2.0 * order / kPi));
  auto envelope = [&](double r) {
    return weight_norm * std::pow(r / sigma + delta, order) *
           std::exp(-kPi * r * r);
  };
  double total = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double lo = radius + i * kShell;
    const double hi = lo + kShell;
    double fmax;
    if (lo >= peak)
      fmax = envelope(lo);
    else if (hi <= peak)
      fmax = envelope(hi);
    else
      fmax = envelope(peak);
    const double count = std::pow(2.0 * hi / sigma + 1.0, g);
    const double term = count * fmax;
    total += term;
    if (lo > peak && term < 1e-30 * total) break;
    if (lo > peak && total == 0.0) break;
  }
  return total;
}

struct RadiusChoice {
  double radius = 0.0;
  double bound = 0.0;
};

// Orders and weight norms (prod 2 pi ||h||) of each output.
RadiusChoice choose_radius(const RiemannMatrix& tau, const PreparedSum& ps,
                           std::span<const std::pair<int, double>> weights,
                           double target, const EngineOptions& opts) {
  if (!(target > 0.0))
    throw Error(ErrorCode::kInvalidInput, "target_abs_err must be positive");
  const int g = tau.genus();
  const double sigma = std::sqrt(tau.im_min_eigenvalue());
  const double delta = (ps.offset - ps.beta).norm();
  auto bound_at = [&](double r) {
    double b = 0.0;
    for (const auto& [order, norm] : weights)
      b = std::max(b, tail_bound(r, g, order, norm, sigma, delta));
    return b;
  };
  // Coarse steps, then bisection; the bound is decreasing in r.
  const double cap = opts.radius_cap_factor;  // in units of lambda_min^(-1/2)
  double lo = 0.0;
  double r = 0.5;
  double b = bound_at(r);
  while (b > target) {
    lo = r;
    r += 0.5;
    if (r > cap + 0.5) {
      std::ostringstream msg;
      msg << "ellipsoid radius exceeds cap " << cap
          << " (Im tau ill-conditioned or target too small)";
      throw Error(ErrorCode::kPrecisionUnreachable, msg.str());
    }
    b = bound_at(r);
  }
  for (int it = 0; it < 6 && lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + r);
    const double bm = bound_at(mid);
    if (bm <= target) {
      r = mid;
      b = bm;
    } else {
      lo = mid;
    }
  }
  if (r > cap) {
    std::ostringstream msg;
    msg << "ellipsoid radius " << r << " exceeds cap " << cap
        << " (Im tau ill-conditioned or target too small)";
    throw Error(ErrorCode::kPrecisionUnreachable, msg.str());
  }
  if (opts.radius_scale != 1.0) {
    r *= opts.radius_scale;
    b = bound_at(r);
  }
  return {r, b};
}

// Visits every j in Z^g with ||R (j + beta)||^2 <= radius^2, in a fixed order
// (last coordinate outermost, each coordinate ascending).
template <class Visit>
std::size_t enumerate_ellipsoid(const RMatrix& R, const RVector& beta,
                                double radius, std::size_t max_points,
                                Visit&& visit) {
  const int g = static_cast<int>(R.rows());
  IVector j(g);
  RVector x(g);
  std::size_t count = 0;
  const double r2 = radius * radius;

  std::function<void(int, double)> recurse = [&](int i, double used) {
    double shift = 0.0;
    for (int k = i + 1; k < g; ++k) shift += R(i, k) * x[k];
    const double rem = r2 - used;
    if (rem < 0.0) return;
    const double half = std::sqrt(rem) / R(i, i);
    const double center = -shift / R(i, i);
    const long lo = static_cast<long>(std::ceil(center - half - beta[i]));
    const long hi = static_cast<long>(std::floor(center + half - beta[i]));
    for (long ji = lo; ji <= hi; ++ji) {
      j[i] = static_cast<int>(ji);
      x[i] = static_cast<double>(ji) + beta[i];
      const double lin = R(i, i) * x[i] + shift;
      const double q = used + lin * lin;
      if (q > r2) continue;
      if (i == 0) {
        if (++count > max_points)
          throw Error(ErrorCode::kPrecisionUnreachable,
                      "lattice point budget exceeded");
        visit(j, q);
      } else {
        recurse(i - 1, q);
      }
    }
  };
  recurse(g - 1, 0.0);
  return count;
}

Complex series_term(const RiemannMatrix& tau, const PreparedSum& ps,
                    const IVector& j, double q) {
  const RVector jd = j.cast<double>();
  const double phi = kPi * jd.dot(tau.re() * jd) + 2.0 * kPi * jd.dot(ps.w_re);
  return std::polar(std::exp(-kPi * q), phi);
}

ThetaJet evaluate(const AbelianPoint& z, const RiemannMatrix& tau,
                  const Characteristic* ch,
                  std::span<const DerivativeRequest> requests, double target,
                  const EngineOptions& opts) {
  const int g = tau.genus();
  for (const auto& req : requests) {
    if (req.size() > static_cast<std::size_t>(kMaxRequestOrder))
      throw Error(ErrorCode::kInvalidInput,
                  "derivative requests are limited to 4 directions");
    for (const auto& h : req) {
      if (h.size() != g || !h.allFinite())
        throw Error(ErrorCode::kInvalidInput, "invalid derivative direction");
    }
  }
  const PreparedSum ps = prepare(z, tau, ch);

  std::vector<std::pair<int, double>> weights{{0, 1.0}};
  for (const auto& req : requests) {
    double norm = 1.0;
    for (const auto& h : req) norm *= 2.0 * kPi * h.norm();
    weights.emplace_back(static_cast<int>(req.size()), norm);
  }
  const RadiusChoice rc = choose_radius(tau, ps, weights, target, opts);

  const std::size_t nreq = requests.size();
  detail::CompensatedSum value_sum;
  detail::CompensatedRealSum value_abs;
  std::vector<detail::CompensatedSum> deriv_sums(nreq);
  std::vector<detail::CompensatedRealSum> deriv_abs(nreq);
  const Complex two_pi_i = 2.0 * kPi * kI;

  const std::size_t count = enumerate_ellipsoid(
      tau.im_cholesky(), ps.beta, rc.radius, opts.max_lattice_points,
      [&](const IVector& j, double q) {
        const Complex term = series_term(tau, ps, j, q);
        value_sum.add(term);
        value_abs.add(std::abs(term));
        if (nreq == 0) return;
        const RVector shifted = j.cast<double>() + ps.offset;
        for (std::size_t r = 0; r < nreq; ++r) {
          Complex w = term;
          for (const auto& h : requests[r]) {
            Complex dot{0.0, 0.0};
            for (int i = 0; i < g; ++i) dot += shifted[i] * h[i];
            w *= two_pi_i * dot;
          }
          deriv_sums[r].add(w);
          deriv_abs[r].add(std::abs(w));
        }
      });

  ThetaJet jet;
  jet.value = ps.phase * value_sum.value();
  jet.value_abs_sum = value_abs.value();
  jet.derivs.resize(nreq);
  jet.deriv_abs_sums.resize(nreq);
  for (std::size_t r = 0; r < nreq; ++r) {
    jet.derivs[r] = ps.phase * deriv_sums[r].value();
    jet.deriv_abs_sums[r] = deriv_abs[r].value();
  }
  jet.error_bound = rc.bound;
  jet.scale_exponent = ps.scale;
  jet.radius = rc.radius;
  jet.lattice_points = count;
  return jet;
}

std::size_t ipow(int g, int k) {
  std::size_t r = 1;
  for (int i = 0; i < k; ++i) r *= static_cast<std::size_t>(g);
  return r;
}

}  // namespace

Characteristic Characteristic::zero(int g) {
  return {RVector::Zero(g), RVector::Zero(g)};
}

void Characteristic::validate(int g) const {
  if (eps.size() != g || delta.size() != g)
    throw Error(ErrorCode::kInvalidInput, "characteristic has wrong dimension");
  for (int i = 0; i < g; ++i) {
    for (double v : {eps[i], delta[i]}) {
      if (v != 0.0 && v != 0.5)
        throw Error(ErrorCode::kInvalidInput,
                    "characteristic entries must be 0 or 1/2");
    }
  }
}

int Characteristic::parity() const {
  const double p = 4.0 * eps.dot(delta);
  return static_cast<int>(std::lround(p)) % 2;
}

std::pair<RVector, RVector> lattice_coordinates(const CVector& z,
                                                const RiemannMatrix& tau) {
  check_point(z, tau);
  RVector b = tau.im_inverse() * z.imag();
  RVector a = z.real() - tau.re() * b;
  return {a, b};
}

ReducedPoint reduce_point(const CVector& z, const RiemannMatrix& tau) {
  const auto [a, b] = lattice_coordinates(z, tau);
  const int g = tau.genus();
  ReducedPoint out;
  out.m.resize(g);
  out.n.resize(g);
  for (int i = 0; i < g; ++i) {
    out.m[i] = static_cast<int>(std::floor(b[i] + 0.5));
    out.n[i] = static_cast<int>(std::floor(a[i] + 0.5));
  }
  const CVector mc = out.m.cast<double>().cast<Complex>();
  const CVector nc = out.n.cast<double>().cast<Complex>();
  CVector z0 = z - tau.tau() * mc - nc;
  // Exponent of theta(z0 + tau m + n) = exp(-pi i m.tau.m - 2 pi i m.z0) theta(z0).
  const Complex e = -kI * kPi * mc.dot(tau.tau() * mc) - 2.0 * kPi * kI * mc.dot(z0);
  out.point = AbelianPoint(std::move(z0), true);
  out.factor_exponent = e.real();
  out.quasiperiod_factor = std::polar(1.0, e.imag());
  return out;
}

ThetaJet theta_eval(const AbelianPoint& z, const RiemannMatrix& tau,
                    std::span<const DerivativeRequest> requests,
                    double target_abs_err, const EngineOptions& options) {
  return evaluate(z, tau, nullptr, requests, target_abs_err, options);
}

ThetaJet theta_char_eval(const AbelianPoint& z, const RiemannMatrix& tau,
                         const Characteristic& ch,
                         std::span<const DerivativeRequest> requests,
                         double target_abs_err, const EngineOptions& options) {
  ch.validate(tau.genus());
  return evaluate(z, tau, &ch, requests, target_abs_err, options);
}

ThetaTensor::ThetaTensor(int genus, int order) : genus_(genus), order_(order) {
  for (int k = 0; k <= order; ++k)
    partials_[k].assign(ipow(genus, k), Complex{0.0, 0.0});
}

namespace {

// Contracts the trailing indices of a flattened order-k tensor with dirs,
// leaving `k - dirs.size()` leading indices.
std::vector<Complex> contract_trailing(const std::vector<Complex>& t, int g,
                                       std::span<const CVector* const> dirs) {
  std::vector<Complex> cur = t;
  for (const CVector* h : dirs) {
    const std::size_t outer = cur.size() / static_cast<std::size_t>(g);
    std::vector<Complex> next(outer);
    for (std::size_t p = 0; p < outer; ++p) {
      Complex s{0.0, 0.0};
      for (int i = 0; i < g; ++i) s += cur[p * g + i] * (*h)[i];
      next[p] = s;
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace

Complex ThetaTensor::contract(std::span<const CVector* const> dirs) const {
  const int k = static_cast<int>(dirs.size());
  if (k > order_)
    throw Error(ErrorCode::kInvalidInput, "contraction order exceeds tensor order");
  return contract_trailing(partials_[k], genus_, dirs)[0];
}

CVector ThetaTensor::gradient(std::span<const CVector* const> dirs) const {
  const int k = static_cast<int>(dirs.size()) + 1;
  if (k > order_)
    throw Error(ErrorCode::kInvalidInput, "gradient order exceeds tensor order");
  const std::vector<Complex> v = contract_trailing(partials_[k], genus_, dirs);
  CVector out(genus_);
  for (int i = 0; i < genus_; ++i) out[i] = v[i];
  return out;
}

Complex ThetaTensor::d(const CVector& a) const {
  const CVector* dirs[] = {&a};
  return contract(dirs);
}
Complex ThetaTensor::d(const CVector& a, const CVector& b) const {
  const CVector* dirs[] = {&a, &b};
  return contract(dirs);
}
Complex ThetaTensor::d(const CVector& a, const CVector& b,
                       const CVector& c) const {
  const CVector* dirs[] = {&a, &b, &c};
  return contract(dirs);
}
Complex ThetaTensor::d(const CVector& a, const CVector& b, const CVector& c,
                       const CVector& e) const {
  const CVector* dirs[] = {&a, &b, &c, &e};
  return contract(dirs);
}
CVector ThetaTensor::grad() const {
  return gradient(std::span<const CVector* const>{});
}
CVector ThetaTensor::grad(const CVector& a) const {
  const CVector* dirs[] = {&a};
  return gradient(dirs);
}
CVector ThetaTensor::grad(const CVector& a, const CVector& b) const {
  const CVector* dirs[] = {&a, &b};
  return gradient(dirs);
}
CVector ThetaTensor::grad(const CVector& a, const CVector& b,
                          const CVector& c) const {
  const CVector* dirs[] = {&a, &b, &c};
  return gradient(dirs);
}

ThetaTensor theta_tensor(const AbelianPoint& z, const RiemannMatrix& tau,
                         int order, double target_abs_err,
                         const EngineOptions& options) {
  if (order < 0 || order > ThetaTensor::kMaxOrder)
    throw Error(ErrorCode::kInvalidInput, "tensor order must be in [0, 5]");
  const int g = tau.genus();
  const PreparedSum ps = prepare(z, tau, nullptr);
  std::vector<std::pair<int, double>> weights;
  for (int k = 0; k <= order; ++k)
    weights.emplace_back(k, std::pow(2.0 * kPi, k));
  const RadiusChoice rc = choose_radius(tau, ps, weights, target_abs_err, options);

  ThetaTensor out(g, order);
  std::vector<std::vector<detail::CompensatedSum>> sums(order + 1);
  for (int k = 0; k <= order; ++k) sums[k].resize(ipow(g, k));
  std::vector<std::vector<Complex>> level(order + 1);
  for (int k = 0; k <= order; ++k) level[k].resize(ipow(g, k));
  std::vector<Complex> w(g);
  const Complex two_pi_i = 2.0 * kPi * kI;

  enumerate_ellipsoid(
      tau.im_cholesky(), ps.beta, rc.radius, options.max_lattice_points,
      [&](const IVector& j, double q) {
        level[0][0] = series_term(tau, ps, j, q);
        sums[0][0].add(level[0][0]);
        for (int i = 0; i < g; ++i) w[i] = two_pi_i * (j[i] + ps.offset[i]);
        for (int k = 1; k <= order; ++k) {
          const auto& prev = level[k - 1];
          auto& cur = level[k];
          for (std::size_t p = 0; p < prev.size(); ++p)
            for (int i = 0; i < g; ++i) cur[p * g + i] = prev[p] * w[i];
          for (std::size_t p = 0; p < cur.size(); ++p) sums[k][p].add(cur[p]);
        }
      });

  for (int k = 0; k <= order; ++k)
    for (std::size_t p = 0; p < sums[k].size(); ++p)
      out.partials_[k][p] = ps.phase * sums[k][p].value();
  out.scale_exponent_ = ps.scale;
  out.error_bound_ = rc.bound;
  return out;
}

Complex materialize(Complex value, double scale_exponent) {
  return value * std::exp(scale_exponent);
}

}  // namespace thetalab
