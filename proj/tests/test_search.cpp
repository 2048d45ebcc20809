#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "thetalab/error.hpp"
#include "thetalab/search.hpp"

using namespace thetalab;

namespace {

RiemannMatrix tau_i() {
  CMatrix t(1, 1);
  t(0, 0) = kI;
  return RiemannMatrix(t);
}

CVector vec1(Complex x) {
  CVector v(1);
  v[0] = x;
  return v;
}

SearchResult kdv_fit() {
  SearchProblem p(tau_i());
  p.seed = 42;
  p.tolerance = 1e-9;
  return fit(p);
}

// (w, d) of the g = 1 reduction U = 1, V = 0 from two box-sum points.
std::pair<Complex, Complex> kdv_oracle(const RiemannMatrix& tau) {
  const CVector U = vec1(1.0);
  Eigen::Matrix2cd M;
  Eigen::Vector2cd rhs;
  const Complex pts[2] = {Complex(0.17, -0.12), Complex(-0.22, 0.19)};
  for (int r = 0; r < 2; ++r) {
    const CVector z = vec1(pts[r]);
    auto th = [&](std::vector<CVector> dirs) {
      return oracle::theta_box(z, tau.tau(), 14, dirs);
    };
    const Complex t0 = th({}), t1 = th({U}), t2 = th({U, U}),
                  t3 = th({U, U, U}), t4 = th({U, U, U, U});
    M(r, 0) = -3.0 * (t2 * t0 - t1 * t1);
    M(r, 1) = -t0 * t0;
    rhs[r] = -(t4 * t0 - 4.0 * t3 * t1 + 3.0 * t2 * t2);
  }
  const Eigen::Vector2cd s = M.partialPivLu().solve(rhs);
  return {s[0], s[1]};
}

}  // namespace

TEST_CASE("g = 1 KP search converges to the lattice-sum KdV reduction") {
  const SearchResult r = kdv_fit();
  CHECK(r.converged);
  CHECK(r.best_residual <= 1e-9);
  CHECK(r.training_samples >= 10 * r.real_parameters);
  REQUIRE(r.best_jet.V);
  CHECK(std::abs((*r.best_jet.V)[0]) < 1e-8);
  const auto [w, d] = kdv_oracle(tau_i());
  CHECK(std::abs((*r.best_jet.W)[0] - w) < 1e-7 * std::abs(w));
  CHECK(std::abs(*r.best_jet.d - d) < 1e-7 * std::abs(d));
}

TEST_CASE("gauge rescaling keeps the holdout residual of a converged fit") {
  const SearchResult r = kdv_fit();
  SearchProblem p(tau_i());
  p.seed = 42;
  const double base = holdout_residual(p, r.best_jet, std::nullopt);
  CHECK(base == doctest::Approx(r.best_residual).epsilon(1e-12));
  for (Complex lambda : {Complex(0.5, 0.0), std::polar(1.9, 2.1), Complex(0.0, 1.3)}) {
    const double scaled =
        holdout_residual(p, r.best_jet.gauge_scaled(lambda), std::nullopt);
    CHECK(std::abs(scaled - base) <= 1e-9);
  }
}

TEST_CASE("search is independent of the thread count") {
  SearchProblem p(RiemannMatrix::random(2, 2));
  p.budget = {5, 15};
  p.tolerance = 1e-30;  // never stop early
  p.record_trace = true;
  p.threads = 1;
  const SearchResult a = fit(p);
  p.threads = 3;
  const SearchResult b = fit(p);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i] == b.history[i]);
  CHECK(*a.best_jet.V == *b.best_jet.V);
  CHECK(*a.best_jet.W == *b.best_jet.W);
  CHECK(a.best_residual == b.best_residual);
  CHECK(trace_csv(a) == trace_csv(b));
  CHECK(!a.converged);
  CHECK(a.restarts_run == 5);
}

TEST_CASE("g = 2 searches converge on a generic period matrix") {
  const RiemannMatrix tau = RiemannMatrix::random(2, 2);
  SearchProblem kp(tau);
  const SearchResult k = fit(kp);
  CHECK(k.converged);
  CHECK(k.best_residual <= 1e-7);
  CHECK(std::abs((*k.best_jet.U)[0] - 1.0) < 1e-15);

  SearchProblem op(tau);
  op.target = SearchTarget::kOnePoint;
  const SearchResult o = fit(op);
  CHECK(o.converged);
  CHECK(o.best_residual <= 1e-7);
  REQUIRE(o.a);
  CHECK(o.a->norm() > 1e-3);
  CHECK(p_residual(CVector(CVector::Zero(2)), tau, o.best_jet, *o.a) <= 1e-7);
}

TEST_CASE("hierarchy fit: epsilon scaling") {
  const SearchResult kp = kdv_fit();
  SearchProblem h(tau_i());
  h.target = SearchTarget::kHierarchy;
  h.initial = kp.best_jet;
  h.budget.restarts = 2;

  h.jet_order = 1;
  const SearchResult k1 = fit_hierarchy(h);
  REQUIRE(k1.eps_exponent);
  CHECK(*k1.eps_exponent >= 1.5);

  h.jet_order = 3;
  const SearchResult k3 = fit(h);
  REQUIRE(k3.eps_exponent);
  CHECK(*k3.eps_exponent >= 3.5);
  CHECK(k3.converged);
  CHECK(k3.best_jet.zeta.size() == 3);
  CHECK(k3.best_jet.dcoef.size() == 2);
  // zeta_2 = -V to leading order.
  CHECK(std::abs(k3.best_jet.zeta[1][0] + (*kp.best_jet.V)[0]) < 1e-4);

  DirectionJet zero;
  zero.U = vec1(0.0);
  zero.V = vec1(0.0);
  h.initial = zero;
  const SearchResult z = fit_hierarchy(h);
  CHECK(!z.notes.empty());
  for (const auto& [eps, r] : z.eps_residuals) CHECK(r == 0.0);
}

TEST_CASE("search validation") {
  SearchProblem p(RiemannMatrix::random(2, 3));
  p.sample_count = 10;
  CHECK_THROWS_AS(fit(p), Error);
  p.sample_count = 0;
  p.tolerance = 0.0;
  CHECK_THROWS_AS(fit(p), Error);
  SearchProblem h(tau_i());
  h.target = SearchTarget::kHierarchy;
  CHECK_THROWS_AS(fit(h), Error);  // no prior U, V
  h.initial.U = vec1(1.0);
  h.initial.V = vec1(0.0);
  h.jet_order = 5;
  CHECK_THROWS_AS(fit(h), Error);
}

TEST_CASE("trace csv") {
  SearchProblem p(tau_i());
  p.budget = {2, 3};
  p.record_trace = true;
  const SearchResult r = fit(p);
  const std::string csv = trace_csv(r);
  CHECK(csv.rfind("restart,iteration,objective\n", 0) == 0);
  CHECK(!r.trace.empty());
}
