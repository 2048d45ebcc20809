#include "thetalab/search.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "thetalab/error.hpp"
#include "thetalab/parallel.hpp"
#include "thetalab/random.hpp"
#include "thetalab/theta.hpp"

namespace thetalab {

std::string to_string(SearchTarget t) {
  switch (t) {
    case SearchTarget::kHirota:
      return "hirota";
    case SearchTarget::kOnePoint:
      return "one_point";
    case SearchTarget::kHierarchy:
      return "hierarchy";
  }
  return "?";
}

namespace {

constexpr std::uint64_t kTrainStream = 0x7a1;
constexpr std::uint64_t kHoldoutStream = 0x401d;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct GaugeCollapse {};

CVector unit0(int g) {
  CVector e = CVector::Zero(g);
  e[0] = 1.0;
  return e;
}

// Complex slot offsets into the parameter vector; -1 when fixed.
struct Layout {
  int g = 0;
  int U = -1, V = -1, W = -1, c = -1, d = -1, a = -1;
  int size = 0;

  int take(bool on, int width) {
    if (!on) return -1;
    const int at = size;
    size += width;
    return at;
  }
};

Layout make_layout(const SearchProblem& p) {
  Layout l;
  l.g = p.tau.genus();
  const int g = l.g;
  const bool hirota = p.target == SearchTarget::kHirota;
  l.U = l.take(p.free.U, g);
  l.V = l.take(p.free.V, g);
  l.W = l.take(hirota && p.free.W, g);
  l.c = l.take(!hirota && p.free.c, 1);
  l.d = l.take(hirota && p.free.d, 1);
  l.a = l.take(!hirota && p.free.a, g);
  return l;
}

// Full values of every quantity; free ones are overwritten from x.
struct State {
  CVector U, V, W, a;
  Complex c{}, d{};
};

State unpack(const Layout& l, const State& fixed, const CVector& x) {
  State s = fixed;
  if (l.U >= 0) s.U = x.segment(l.U, l.g);
  if (l.V >= 0) s.V = x.segment(l.V, l.g);
  if (l.W >= 0) s.W = x.segment(l.W, l.g);
  if (l.a >= 0) s.a = x.segment(l.a, l.g);
  if (l.c >= 0) s.c = x[l.c];
  if (l.d >= 0) s.d = x[l.d];
  return s;
}

CVector pack(const Layout& l, const State& s) {
  CVector x(l.size);
  if (l.U >= 0) x.segment(l.U, l.g) = s.U;
  if (l.V >= 0) x.segment(l.V, l.g) = s.V;
  if (l.W >= 0) x.segment(l.W, l.g) = s.W;
  if (l.a >= 0) x.segment(l.a, l.g) = s.a;
  if (l.c >= 0) x[l.c] = s.c;
  if (l.d >= 0) x[l.d] = s.d;
  return x;
}

CVector random_fundamental(const RiemannMatrix& tau, Rng& rng) {
  const int g = tau.genus();
  RVector a(g), b(g);
  for (int i = 0; i < g; ++i) a[i] = rng.uniform(-0.5, 0.5);
  for (int i = 0; i < g; ++i) b[i] = rng.uniform(-0.5, 0.5);
  return a.cast<Complex>() + tau.tau() * b.cast<Complex>();
}

// Residual vector e (term-normalized, one row per sample) and its Jacobian
// with the normalizers held fixed.
class Model {
 public:
  virtual ~Model() = default;
  virtual int size() const = 0;
  virtual int rows() const = 0;
  virtual void eval(const CVector& x, CVector& e, CMatrix* J) const = 0;
  // Parameters entering the residual linearly.
  virtual std::vector<int> linear() const = 0;
  virtual void project(CVector&) const {}
};

void set_row(CVector& e, CMatrix* J, int i, const BilinearValue& v,
             double weight = 1.0) {
  if (v.normalizer == 0.0) {
    e[i] = 0.0;
    if (J) J->row(i).setZero();
    return;
  }
  const double s = weight / v.normalizer;
  e[i] = v.residual * s;
  if (J) J->row(i) *= s;
}

void fix_gauge(const Layout& l, bool renormalize, CVector& x) {
  if (l.U < 0) return;
  const CVector U = x.segment(l.U, l.g);
  const double n = U.norm();
  if (!(n >= 1e-6) || !std::isfinite(n)) throw GaugeCollapse{};
  if (!renormalize) return;
  Complex lead{};
  for (Eigen::Index i = 0; i < U.size(); ++i)
    if (std::abs(U[i]) > 1e-14 * n) {
      lead = U[i];
      break;
    }
  const Complex lambda = std::conj(lead) / std::abs(lead) / n;
  const Complex l2 = lambda * lambda;
  x.segment(l.U, l.g) *= lambda;
  if (l.V >= 0) x.segment(l.V, l.g) *= l2;
  if (l.W >= 0) x.segment(l.W, l.g) *= l2 * lambda;
  if (l.c >= 0) x[l.c] *= l2;
  if (l.d >= 0) x[l.d] *= l2 * l2;
}

class HirotaModel final : public Model {
 public:
  HirotaModel(Layout l, State fixed, std::vector<ThetaTensor> t, bool renorm)
      : l_(l), fixed_(std::move(fixed)), t_(std::move(t)), renorm_(renorm) {}

  int size() const override { return l_.size; }
  int rows() const override { return static_cast<int>(t_.size()); }
  std::vector<int> linear() const override {
    std::vector<int> out;
    for (int k = 0; l_.W >= 0 && k < l_.g; ++k) out.push_back(l_.W + k);
    if (l_.d >= 0) out.push_back(l_.d);
    return out;
  }
  // The Hirota form is exactly invariant under the Galilean shift
  // (V, W) -> (V + s U, W + 2 s V + s^2 U) while its term sum grows like
  // |s|^2, so an unpinned shift lets |V| run off and fakes small residuals.
  // Pin it by U^H V = 0.
  void project(CVector& x) const override {
    fix_gauge(l_, renorm_, x);
    if (l_.V < 0 || l_.W < 0) return;
    const CVector U = l_.U >= 0 ? CVector(x.segment(l_.U, l_.g)) : fixed_.U;
    const Complex shift = -U.dot(x.segment(l_.V, l_.g)) / U.squaredNorm();
    const CVector V = x.segment(l_.V, l_.g);
    x.segment(l_.W, l_.g) += 2.0 * shift * V + shift * shift * U;
    x.segment(l_.V, l_.g) += shift * U;
  }

  void eval(const CVector& x, CVector& e, CMatrix* J) const override {
    const State s = unpack(l_, fixed_, x);
    const int m = rows();
    e.resize(m);
    if (J) J->setZero(m, l_.size);
    for (int i = 0; i < m; ++i) {
      const ThetaTensor& T = t_[i];
      const HirotaQuantities q = hirota_quantities(T, s.U, s.V, s.W);
      const auto terms = hirota_terms(q, s.d);
      const BilinearValue v = combine_terms(terms);
      if (J) {
        const CVector g0 = T.grad();
        if (l_.U >= 0)
          J->row(i).segment(l_.U, l_.g) =
              (4.0 * q.th * T.grad(s.U, s.U, s.U) -
               12.0 * q.d1 * T.grad(s.U, s.U) - 4.0 * q.d111 * g0 +
               12.0 * q.d11 * T.grad(s.U) - 3.0 * q.th * T.grad(s.W) +
               3.0 * q.d3 * g0)
                  .transpose();
        if (l_.V >= 0)
          J->row(i).segment(l_.V, l_.g) =
              (6.0 * q.th * T.grad(s.V) - 6.0 * q.d2 * g0).transpose();
        if (l_.W >= 0)
          J->row(i).segment(l_.W, l_.g) =
              (-3.0 * q.th * T.grad(s.U) + 3.0 * q.d1 * g0).transpose();
        if (l_.d >= 0) (*J)(i, l_.d) = -q.th * q.th;
      }
      set_row(e, J, i, v);
    }
  }

 private:
  Layout l_;
  State fixed_;
  std::vector<ThetaTensor> t_;
  bool renorm_;
};

class OnePointModel final : public Model {
 public:
  OnePointModel(Layout l, State fixed, std::vector<CVector> z,
                std::vector<ThetaTensor> base, const RiemannMatrix& tau,
                bool renorm)
      : l_(l),
        fixed_(std::move(fixed)),
        z_(std::move(z)),
        base_(std::move(base)),
        tau_(tau),
        renorm_(renorm) {
    if (l_.a < 0) shifted_ = shifted(fixed_.a);
  }

  int size() const override { return l_.size; }
  int rows() const override { return static_cast<int>(z_.size()); }
  std::vector<int> linear() const override {
    std::vector<int> out;
    for (int k = 0; l_.V >= 0 && k < l_.g; ++k) out.push_back(l_.V + k);
    if (l_.c >= 0) out.push_back(l_.c);
    return out;
  }
  void project(CVector& x) const override { fix_gauge(l_, renorm_, x); }

  void eval(const CVector& x, CVector& e, CMatrix* J) const override {
    const State s = unpack(l_, fixed_, x);
    const int m = rows();
    std::vector<ThetaTensor> fresh;
    if (l_.a >= 0) fresh = shifted(s.a);
    const std::vector<ThetaTensor>& sh = l_.a >= 0 ? fresh : shifted_;
    e.resize(m);
    if (J) J->setZero(m, l_.size);
    for (int i = 0; i < m; ++i) {
      const ThetaTensor& T = base_[i];
      const ThetaTensor& Ta = sh[i];
      const OnePointQuantities b = one_point_quantities(T, s.U, s.V);
      const OnePointQuantities q = one_point_quantities(Ta, s.U, s.V);
      const auto terms = p_terms(b, q, s.c);
      const BilinearValue v = combine_terms(terms);
      if (J) {
        const CVector g0 = T.grad();
        const CVector ga = Ta.grad();
        if (l_.U >= 0)
          J->row(i).segment(l_.U, l_.g) =
              (2.0 * q.th * T.grad(s.U) + 2.0 * b.th * Ta.grad(s.U) -
               2.0 * q.d1 * g0 - 2.0 * b.d1 * ga)
                  .transpose();
        if (l_.V >= 0)
          J->row(i).segment(l_.V, l_.g) = (q.th * g0 - b.th * ga).transpose();
        if (l_.c >= 0) (*J)(i, l_.c) = b.th * q.th;
        if (l_.a >= 0)
          J->row(i).segment(l_.a, l_.g) =
              ((b.d11 + b.d2 + s.c * b.th) * ga + b.th * Ta.grad(s.U, s.U) -
               b.th * Ta.grad(s.V) - 2.0 * b.d1 * Ta.grad(s.U))
                  .transpose();
      }
      set_row(e, J, i, v);
    }
  }

 private:
  std::vector<ThetaTensor> shifted(const CVector& a) const {
    std::vector<ThetaTensor> out;
    out.reserve(z_.size());
    for (const CVector& z : z_) out.push_back(theta_tensor(CVector(z + a), tau_, 3));
    return out;
  }

  Layout l_;
  State fixed_;
  std::vector<CVector> z_;
  std::vector<ThetaTensor> base_;
  std::vector<ThetaTensor> shifted_;
  const RiemannMatrix& tau_;
  bool renorm_;
};

// Free: zeta[1..nz] (coefficients of eps^2..eps^(nz+1)) and dcoef[0..nd).
class HierarchyModel final : public Model {
 public:
  HierarchyModel(int g, int nz, int nd, CVector U, CVector V,
                 std::vector<CVector> z, std::vector<ThetaTensor> base,
                 std::vector<double> eps, int weight_power,
                 const RiemannMatrix& tau)
      : g_(g),
        nz_(nz),
        nd_(nd),
        U_(std::move(U)),
        V_(std::move(V)),
        z_(std::move(z)),
        base_(std::move(base)),
        eps_(std::move(eps)),
        power_(weight_power),
        tau_(tau) {}

  int size() const override { return nz_ * g_ + nd_; }
  int rows() const override {
    return static_cast<int>(z_.size() * eps_.size());
  }
  std::vector<int> linear() const override {
    std::vector<int> out;
    for (int k = 0; k < nd_; ++k) out.push_back(nz_ * g_ + k);
    return out;
  }

  DirectionJet jet(const CVector& x) const {
    DirectionJet j;
    j.U = U_;
    j.V = V_;
    j.zeta.push_back(U_);
    for (int k = 0; k < nz_; ++k) j.zeta.push_back(x.segment(k * g_, g_));
    for (int k = 0; k < nd_; ++k) j.dcoef.push_back(x[nz_ * g_ + k]);
    return j;
  }

  void eval(const CVector& x, CVector& e, CMatrix* J) const override {
    const DirectionJet j = jet(x);
    const int m = rows();
    e.resize(m);
    if (J) J->setZero(m, size());
    int row = 0;
    for (double eps : eps_) {
      const CVector a = hierarchy_shift(j, eps);
      const Complex d = hierarchy_d(j, eps);
      const double w = std::pow(eps, -power_);
      for (std::size_t i = 0; i < z_.size(); ++i, ++row) {
        const ThetaTensor& T = base_[i];
        const ThetaTensor Ta = theta_tensor(CVector(z_[i] + a), tau_, 3);
        const OnePointQuantities b = one_point_quantities(T, U_, V_);
        const OnePointQuantities q = one_point_quantities(Ta, U_, V_);
        const auto terms = hierarchy_terms(b, q, eps, d);
        const BilinearValue v = combine_terms(terms);
        if (J) {
          const CVector ga = Ta.grad();
          const CVector gU = Ta.grad(U_);
          const CVector da =
              eps * ((b.d11 + b.d2) * ga + b.th * Ta.grad(U_, U_) -
                     b.th * Ta.grad(V_) - 2.0 * b.d1 * gU) -
              (b.th * gU - b.d1 * ga) + d * b.th * ga;
          double p = eps * eps;
          for (int k = 0; k < nz_; ++k, p *= eps)
            J->row(row).segment(k * g_, g_) = (2.0 * p * da).transpose();
          p = eps * eps * eps;
          for (int k = 0; k < nd_; ++k, p *= eps)
            (*J)(row, nz_ * g_ + k) = p * b.th * q.th;
        }
        set_row(e, J, row, v, w);
      }
    }
  }

 private:
  int g_, nz_, nd_;
  CVector U_, V_;
  std::vector<CVector> z_;
  std::vector<ThetaTensor> base_;
  std::vector<double> eps_;
  int power_;
  const RiemannMatrix& tau_;
};

struct LmOutcome {
  CVector x;
  double f = kInf;
  int iterations = 0;
  bool degenerate = false;
  std::vector<TraceRow> trace;
};

double objective(const Model& m, const CVector& x, CVector& e, CMatrix* J) {
  try {
    m.eval(x, e, J);
  } catch (const Error& err) {
    if (err.code() == ErrorCode::kDegenerateSample ||
        err.code() == ErrorCode::kPrecisionUnreachable)
      return kInf;
    throw;
  }
  const double f = e.squaredNorm() / std::max(1, m.rows());
  return std::isfinite(f) ? f : kInf;
}

// Solves the linear parameters by least squares (normalizers refreshed
// between passes).
void project_linear(const Model& m, CVector& x) {
  const std::vector<int> lin = m.linear();
  if (lin.empty()) return;
  CVector e;
  CMatrix J;
  for (int pass = 0; pass < 3; ++pass) {
    if (!std::isfinite(objective(m, x, e, &J))) return;
    CMatrix A(J.rows(), static_cast<Eigen::Index>(lin.size()));
    for (std::size_t k = 0; k < lin.size(); ++k) A.col(k) = J.col(lin[k]);
    const CVector delta = A.colPivHouseholderQr().solve(CVector(-e));
    if (!delta.allFinite()) return;
    for (std::size_t k = 0; k < lin.size(); ++k) x[lin[k]] += delta[k];
  }
}

LmOutcome levenberg_marquardt(const Model& m, CVector x, int iterations,
                              double target, int restart, bool trace) {
  LmOutcome out;
  try {
    m.project(x);
    project_linear(m, x);
    m.project(x);
  } catch (const GaugeCollapse&) {
    out.degenerate = true;
    out.x = x;
    return out;
  }
  CVector e, e_try;
  CMatrix J, J_try;
  double f = objective(m, x, e, &J);
  out.x = x;
  out.f = f;
  if (trace) out.trace.push_back({restart, 0, f});
  if (!std::isfinite(f)) return out;
  // Steps solve min |J d + e|^2 + mu |S d|^2 (S = column norms of J) by QR
  // on the augmented system; forming J^H J would square the column-scale
  // spread of the hierarchy fit.
  const Eigen::Index n = x.size();
  double mu = 1e-3;
  int stall = 0;
  for (int it = 0; it < iterations && f > target; ++it) {
    RVector scale = J.colwise().norm().transpose();
    const double floor = std::max(1e-14 * scale.maxCoeff(), 1e-300);
    for (Eigen::Index k = 0; k < n; ++k) scale[k] = std::max(scale[k], floor);
    CMatrix Js = J * scale.cwiseInverse().cast<Complex>().asDiagonal();
    bool accepted = false;
    while (!accepted) {
      CMatrix A(J.rows() + n, n);
      A << Js, CMatrix::Identity(n, n) * std::sqrt(mu);
      CVector rhs = CVector::Zero(J.rows() + n);
      rhs.head(J.rows()) = -e;
      const CVector y = A.householderQr().solve(rhs);
      const CVector step = y.cwiseQuotient(scale.cast<Complex>());
      CVector x_try = x + step;
      const bool ok = step.allFinite();
      if (ok) {
        try {
          m.project(x_try);
        } catch (const GaugeCollapse&) {
          out.degenerate = true;
          out.iterations = it;
          return out;
        }
      }
      const double f_try = ok ? objective(m, x_try, e_try, &J_try) : kInf;
      if (f_try < f) {
        stall = (f - f_try) < 1e-9 * f ? stall + 1 : 0;
        x = std::move(x_try);
        e.swap(e_try);
        J.swap(J_try);
        f = f_try;
        mu = std::max(mu / 3.0, 1e-20);
        accepted = true;
      } else {
        mu *= 4.0;
        if (mu > 1e20) break;
      }
    }
    out.iterations = it + 1;
    if (trace) out.trace.push_back({restart, it + 1, f});
    if (!accepted || stall >= 10) break;
  }
  out.x = x;
  out.f = f;
  return out;
}

std::vector<CVector> training_points(const SearchProblem& p, int count) {
  return sample_fundamental(p.tau, count, mix_seed(p.seed, kTrainStream));
}

std::vector<ThetaTensor> tensors_at(const std::vector<CVector>& z,
                                    const RiemannMatrix& tau, int order,
                                    unsigned threads) {
  return parallel_map(
      z.size(), [&](std::size_t i) { return theta_tensor(z[i], tau, order); },
      threads);
}

State fixed_state(const SearchProblem& p) {
  const int g = p.tau.genus();
  DirectionJet j = p.initial;
  if (!j.U) j.U = unit0(g);
  if (!p.free.U && !p.free_gauge) j = j.gauge_normalized();
  State s;
  s.U = *j.U;
  s.V = j.V.value_or(CVector(CVector::Zero(g)));
  s.W = j.W.value_or(CVector(CVector::Zero(g)));
  s.c = j.c_or_zero();
  s.d = j.d_or_zero();
  s.a = p.a_initial.value_or(CVector(CVector::Zero(g)));
  return s;
}

State restart_state(const SearchProblem& p, const State& fixed, int restart) {
  State s = fixed;
  if (restart == 0) return s;
  const int g = p.tau.genus();
  Rng rng(p.seed, static_cast<std::uint64_t>(restart));
  if (p.free.U) s.U = rng.unit_complex(g);
  if (p.free.V) s.V = rng.complex_box(g, 2.0);
  if (p.target == SearchTarget::kHirota) {
    if (p.free.W) s.W = CVector::Zero(g);
    if (p.free.d) s.d = 0.0;
  } else {
    if (p.free.a) s.a = random_fundamental(p.tau, rng);
    if (p.free.c) s.c = 0.0;
  }
  return s;
}

DirectionJet jet_from(const SearchProblem& p, const State& s) {
  DirectionJet j;
  j.U = s.U;
  j.V = s.V;
  if (p.target == SearchTarget::kHirota) {
    j.W = s.W;
    j.d = s.d;
  } else {
    j.c = s.c;
  }
  return j;
}

}  // namespace

int real_parameter_count(const SearchProblem& p) {
  const int g = p.tau.genus();
  if (p.target == SearchTarget::kHierarchy)
    return 2 * (p.jet_order - 1) * (g + 1);
  return 2 * make_layout(p).size;
}

void validate(const SearchProblem& p) {
  const int g = p.tau.genus();
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidInput, what);
  };
  const int dim = real_parameter_count(p);
  if (p.sample_count < 0 || (p.sample_count > 0 && p.sample_count < 10 * dim))
    bad("sample_count must be at least 10 x the number of real free parameters");
  if (p.holdout_count < 1) bad("holdout_count must be positive");
  if (p.budget.restarts < 1 || p.budget.iterations < 0) bad("invalid budget");
  if (p.batch < 1) bad("batch must be positive");
  if (!(p.tolerance > 0.0)) bad("tolerance must be positive");
  auto dims = [&](const std::optional<CVector>& v, const char* name) {
    if (v && v->size() != g) bad(std::string(name) + " has the wrong length");
    if (v && !v->allFinite()) bad(std::string(name) + " is not finite");
  };
  dims(p.initial.U, "U");
  dims(p.initial.V, "V");
  dims(p.initial.W, "W");
  dims(p.a_initial, "a");
  if (p.target == SearchTarget::kHierarchy) {
    if (p.jet_order < 1 || p.jet_order > 4) bad("jet order must be in 1..4");
    if (!p.initial.U || !p.initial.V) bad("hierarchy fit needs U and V");
    if (p.eps_grid.empty()) bad("empty epsilon grid");
    for (double e : p.eps_grid)
      if (!(e > 0.0 && e < 1.0)) bad("epsilon outside (0, 1)");
    if (!(p.eps_hi > 0.0 && p.eps_hi < 1.0 && p.eps_lo > 0.0 &&
          p.eps_lo < p.eps_hi))
      bad("invalid exponent epsilons");
  } else if (dim == 0) {
    bad("no free parameters");
  }
}

double holdout_residual(const SearchProblem& p, const DirectionJet& jet,
                        const std::optional<CVector>& a) {
  const std::uint64_t seed = mix_seed(p.seed, kHoldoutStream);
  std::function<double(const AbelianPoint&)> fn;
  if (p.target == SearchTarget::kOnePoint) {
    if (!a) throw Error(ErrorCode::kInvalidInput, "one-point holdout needs a");
    fn = [&](const AbelianPoint& z) { return p_residual(z, p.tau, jet, *a); };
  } else {
    fn = [&](const AbelianPoint& z) { return hirota_residual(z, p.tau, jet); };
  }
  return residual_sweep(p.tau, p.holdout_count, seed, p.tolerance, fn, p.threads)
      .max_residual;
}

SearchResult fit(const SearchProblem& problem) {
  if (problem.target == SearchTarget::kHierarchy) return fit_hierarchy(problem);
  validate(problem);
  const Layout layout = make_layout(problem);
  const int dim = 2 * layout.size;
  const int m = problem.sample_count > 0 ? problem.sample_count : 40 * dim;
  const bool renorm = layout.U >= 0 && !problem.free_gauge;
  const State fixed = fixed_state(problem);
  const auto z = training_points(problem, m);

  std::unique_ptr<Model> model;
  if (problem.target == SearchTarget::kHirota) {
    model = std::make_unique<HirotaModel>(
        layout, fixed, tensors_at(z, problem.tau, 4, problem.threads), renorm);
  } else {
    model = std::make_unique<OnePointModel>(
        layout, fixed, z,
        tensors_at(z, problem.tau, layout.U >= 0 ? 3 : 2, problem.threads),
        problem.tau, renorm);
  }

  SearchResult result;
  result.training_samples = m;
  result.real_parameters = dim;
  const double target = std::pow(1e-3 * problem.tolerance, 2);
  int best = -1;
  LmOutcome best_run;
  double best_holdout = kInf;
  int evaluated = -1;

  for (int start = 0; start < problem.budget.restarts; start += problem.batch) {
    const int n = std::min(problem.batch, problem.budget.restarts - start);
    auto runs = parallel_map(
        static_cast<std::size_t>(n),
        [&](std::size_t k) {
          const int r = start + static_cast<int>(k);
          const CVector x0 = pack(layout, restart_state(problem, fixed, r));
          return levenberg_marquardt(*model, x0, problem.budget.iterations,
                                     target, r, problem.record_trace);
        },
        problem.threads);
    for (int k = 0; k < n; ++k) {
      LmOutcome& run = runs[k];
      result.restarts_run++;
      result.history.push_back(run.f);
      if (run.degenerate) result.gauge_degenerate_restarts++;
      result.trace.insert(result.trace.end(), run.trace.begin(), run.trace.end());
      if (!run.degenerate && run.f < best_run.f) {
        best = start + k;
        best_run = std::move(run);
      }
    }
    if (best >= 0 && best != evaluated) {
      const State s = unpack(layout, fixed, best_run.x);
      best_holdout = holdout_residual(
          problem, jet_from(problem, s),
          problem.target == SearchTarget::kOnePoint ? std::optional<CVector>(s.a)
                                                    : std::nullopt);
      evaluated = best;
    }
    if (best_holdout <= problem.tolerance) break;
  }

  if (best < 0) {
    result.notes.push_back("no restart reached a finite objective");
    result.best_jet = jet_from(problem, fixed);
    result.best_residual = kInf;
    return result;
  }
  const State s = unpack(layout, fixed, best_run.x);
  result.best_jet = jet_from(problem, s);
  if (problem.target == SearchTarget::kOnePoint) result.a = s.a;
  result.best_residual = best_holdout;
  result.train_objective = best_run.f;
  result.converged = best_holdout <= problem.tolerance;
  result.notes.push_back("best restart " + std::to_string(best));
  if (!result.converged)
    result.notes.push_back(
        "no solution found within budget; this is not a proof that none "
        "exists");
  if (problem.target == SearchTarget::kOnePoint)
    result.notes.push_back("irreducibility of the subgroup generated by a is "
                           "assumed, not tested");
  if (result.gauge_degenerate_restarts > 0)
    result.notes.push_back(std::to_string(result.gauge_degenerate_restarts) +
                           " gauge-degenerate restarts");
  return result;
}

SearchResult fit_hierarchy(const SearchProblem& problem) {
  validate(problem);
  const int g = problem.tau.genus();
  const int K = problem.jet_order;
  const CVector U = *problem.initial.U;
  const CVector V = *problem.initial.V;

  SearchResult result;
  const int dim = real_parameter_count(problem);
  result.real_parameters = dim;

  DirectionJet jet;
  jet.U = U;
  jet.V = V;
  jet.zeta.push_back(U);

  auto exponent_of = [&](const DirectionJet& j) {
    const std::uint64_t seed = mix_seed(problem.seed, kHoldoutStream);
    auto sweep = [&](double eps) {
      return residual_sweep(
                 problem.tau, problem.holdout_count, seed, problem.tolerance,
                 [&](const AbelianPoint& z) {
                   return hierarchy_residual(z, problem.tau, j, eps);
                 },
                 problem.threads)
          .max_residual;
    };
    const double hi = sweep(problem.eps_hi), lo = sweep(problem.eps_lo);
    result.eps_residuals = {{problem.eps_hi, hi}, {problem.eps_lo, lo}};
    result.best_residual = lo;
    if (hi > 0.0 && lo > 0.0)
      result.eps_exponent =
          std::log(hi / lo) / std::log(problem.eps_hi / problem.eps_lo);
  };

  if (U.norm() == 0.0) {
    result.best_jet = jet;
    result.notes.push_back(
        "zero jet: a = 0 collapses the bilinear form; excluded from fitting");
    exponent_of(jet);
    return result;
  }

  if (K > 1) {
    // Two orders beyond K are fitted and then dropped, which keeps the kept
    // coefficients free of the truncation bias of the larger epsilons.
    const int nz = K + 1, nd = K + 1;
    const int m =
        problem.sample_count > 0 ? problem.sample_count : 40 * std::max(dim, 1);
    result.training_samples = m;
    const auto z = training_points(problem, m);
    HierarchyModel model(g, nz, nd, U, V, z,
                         tensors_at(z, problem.tau, 2, problem.threads),
                         problem.eps_grid, K + 1, problem.tau);
    const double target = 0.0;
    auto restart = [&](std::size_t r) {
      CVector x = CVector::Zero(model.size());
      for (int k = 0; k < nz && k < static_cast<int>(problem.initial.zeta.size()) - 1; ++k)
        x.segment(k * g, g) = problem.initial.zeta[k + 1];
      if (problem.initial.zeta.size() < 2) x.segment(0, g) = -V;
      if (r > 0) {
        Rng rng(problem.seed, r);
        for (int k = 0; k < nz; ++k)
          x.segment(k * g, g) += rng.complex_box(g, 0.5 * std::pow(2.0, k));
      }
      return levenberg_marquardt(model, x, problem.budget.iterations,
                                 target, static_cast<int>(r),
                                 problem.record_trace);
    };
    const std::size_t total = static_cast<std::size_t>(problem.budget.restarts);
    const std::size_t batch = static_cast<std::size_t>(std::max(problem.batch, 1));
    std::optional<LmOutcome> best;
    int best_index = 0;
    for (std::size_t first = 0; first < total; first += batch) {
      const std::size_t n = std::min(batch, total - first);
      std::vector<LmOutcome> runs = parallel_map(
          n, [&](std::size_t i) { return restart(first + i); }, problem.threads);
      for (std::size_t i = 0; i < n; ++i) {
        result.history.push_back(runs[i].f);
        result.trace.insert(result.trace.end(), runs[i].trace.begin(),
                            runs[i].trace.end());
        if (!best || runs[i].f < best->f) {
          best = runs[i];
          best_index = static_cast<int>(first + i);
        }
      }
      result.restarts_run = static_cast<int>(first + n);
      const DirectionJet full = model.jet(best->x);
      jet.zeta.assign(full.zeta.begin(), full.zeta.begin() + K);
      jet.dcoef.assign(full.dcoef.begin(), full.dcoef.begin() + (K - 1));
      exponent_of(jet);
      if (result.eps_exponent && *result.eps_exponent >= K + 0.5) break;
    }
    result.train_objective = best->f;
    result.notes.push_back("best restart " + std::to_string(best_index));
  } else {
    exponent_of(jet);
  }
  result.best_jet = jet;
  result.converged = result.eps_exponent && *result.eps_exponent >= K + 0.5;
  return result;
}

std::string trace_csv(const SearchResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "restart,iteration,objective\n";
  for (const auto& t : r.trace)
    os << t.restart << ',' << t.iteration << ',' << t.objective << '\n';
  return os.str();
}

}  // namespace thetalab
