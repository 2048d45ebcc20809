// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
//   acceptance [criterion ...]    run a subset, e.g. `acceptance 1 4 10`

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "thetalab/bilinear.hpp"
#include "thetalab/divisor.hpp"
#include "thetalab/json_io.hpp"
#include "thetalab/kp_grid.hpp"
#include "thetalab/kummer.hpp"
#include "thetalab/random.hpp"
#include "thetalab/search.hpp"
#include "thetalab/theta.hpp"

using namespace thetalab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RiemannMatrix tau_i() {
  CMatrix t(1, 1);
  t(0, 0) = kI;
  return RiemannMatrix(t);
}

CVector random_point(const RiemannMatrix& tau, Rng& rng) {
  const int g = tau.genus();
  RVector a(g), b(g);
  for (int i = 0; i < g; ++i) {
    a[i] = rng.uniform(-0.5, 0.5);
    b[i] = rng.uniform(-0.5, 0.5);
  }
  return a.cast<Complex>() + tau.tau() * b.cast<Complex>();
}

// The seeded generic period matrix of the genus-2 chains.
RiemannMatrix generic_g2() { return RiemannMatrix::random(2, 2); }

SearchResult kp_fit(const RiemannMatrix& tau, double tol) {
  SearchProblem p(tau);
  p.target = SearchTarget::kHirota;
  p.tolerance = tol;
  return fit(p);
}

// ---------------------------------------------------------------------------

Outcome theta_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const RiemannMatrix tau = tau_i();
  Rng rng(1);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const CVector z = random_point(tau, rng);
    const Complex got = materialize(theta_eval(z, tau).value, theta_eval(z, tau).scale_exponent);
    const Complex want = oracle::theta_box(z, tau.tau(), 100);
    worst = std::max(worst, std::abs(got - want) / std::abs(want));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t < 1.0,
          fmt("max rel err %.2e (<= 1e-12), %.3f s (< 1 s)", worst, t)};
}

Outcome quasi_periodicity() {
  Rng rng(2);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int g = 1 + k % 3;
    const RiemannMatrix tau = RiemannMatrix::random(g, 1000 + k);
    const CVector z = random_point(tau, rng);
    IVector m(g), n(g);
    for (int i = 0; i < g; ++i) {
      m[i] = static_cast<int>(std::floor(rng.uniform(-3.0, 4.0)));
      n[i] = static_cast<int>(std::floor(rng.uniform(-3.0, 4.0)));
    }
    const CVector mc = m.cast<double>().cast<Complex>();
    const CVector w = z + tau.tau() * mc + n.cast<double>().cast<Complex>();
    const ThetaJet at_w = theta_eval(w, tau);
    const ThetaJet at_z = theta_eval(z, tau);
    // theta(z + tau m + n) = exp(-pi i m.tau.m - 2 pi i m.z) theta(z)
    const Complex log_mult = -kI * kPi * mc.dot(tau.tau() * mc) - 2.0 * kPi * kI * mc.dot(z);
    const Complex r = at_w.value / at_z.value *
                      std::exp(Complex(at_w.scale_exponent - at_z.scale_exponent) - log_mult);
    worst = std::max(worst, std::abs(r - 1.0));
  }
  return {worst <= 1e-10, fmt("max rel deviation %.2e over 100 cases (<= 1e-10)", worst)};
}

Outcome derivatives_vs_fd() {
  Rng rng(3);
  const double step = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int g = 1 + k % 3;
    const RiemannMatrix tau = RiemannMatrix::random(g, 2000 + k);
    const CVector z = random_point(tau, rng);
    std::vector<CVector> dirs;
    for (int l = 0; l < 5; ++l) dirs.push_back(rng.unit_complex(g));
    for (int order = 1; order <= 4; ++order) {
      const std::vector<DerivativeRequest> full{
          DerivativeRequest(dirs.begin(), dirs.begin() + order)};
      const std::vector<DerivativeRequest> lower{
          DerivativeRequest(dirs.begin(), dirs.begin() + order - 1)};
      const ThetaJet centre = theta_eval(z, tau, full);
      auto lower_at = [&](const CVector& p) {
        const ThetaJet j = theta_eval(p, tau, lower);
        return j.derivs[0] * std::exp(j.scale_exponent - centre.scale_exponent);
      };
      const Complex fd = oracle::central_difference(lower_at, z, dirs[order - 1], step);
      worst = std::max(worst, oracle::rel_err(centre.derivs[0], fd));
    }
    // Fifth order through the tensor.
    const ThetaTensor t5 = theta_tensor(z, tau, 5);
    std::vector<const CVector*> d5, d4;
    for (int l = 0; l < 5; ++l) d5.push_back(&dirs[l]);
    for (int l = 0; l < 4; ++l) d4.push_back(&dirs[l]);
    auto fourth_at = [&](const CVector& p) {
      const ThetaTensor t = theta_tensor(p, tau, 4);
      return t.contract(d4) * std::exp(t.scale_exponent() - t5.scale_exponent());
    };
    const Complex fd5 = oracle::central_difference(fourth_at, z, dirs[4], step);
    worst = std::max(worst, oracle::rel_err(t5.contract(d5), fd5));
  }
  return {worst <= 1e-6, fmt("orders 1-5, 50 cases, max rel err %.2e (<= 1e-6)", worst)};
}

Outcome kp_genus1() {
  const auto t0 = std::chrono::steady_clock::now();
  const SearchResult r = kp_fit(tau_i(), 1e-9);
  const double t = seconds_since(t0);
  return {r.converged && r.best_residual <= 1e-9 && t < 60.0,
          fmt("holdout residual %.2e (<= 1e-9), %.2f s (< 60 s)", r.best_residual, t)};
}

Outcome theorem1_chain() {
  const auto t0 = std::chrono::steady_clock::now();
  const RiemannMatrix tau = generic_g2();
  const double indicator = decomposability_indicator(tau);

  SearchProblem p(tau);
  p.target = SearchTarget::kOnePoint;
  p.tolerance = 1e-7;
  const SearchResult r = fit(p);
  if (!r.a) return {false, "one-point search returned no shift"};
  const CVector& U = r.best_jet.u();
  const CVector& V = r.best_jet.v();

  const FlexReport flex = flex_test_halves(*r.a, U, flex_direction_from_one_point(V), tau,
                                           FlexOrder::kSecond, std::nullopt, 1e-6);
  const double s31 = flex.sigma_ratios.size() >= 2 ? flex.sigma_ratios[1] : 1.0;

  SamplePlan plan;
  plan.count = 1;
  plan.starts = 100;
  const DivisorSample cap = sample_theta_cap_theta_a(tau, *r.a, plan);
  const ResidualReport w1 =
      weil_check(cap.raw_points, tau, r.best_jet, r.a, WeilRelation::kWeil1, 1e-6);
  const double t = seconds_since(t0);

  const bool pass = indicator >= 1e-2 && r.converged && r.best_residual <= 1e-7 &&
                    flex.pass && s31 <= 1e-6 && w1.pass && cap.raw_points.size() >= 20 &&
                    t < 600.0;
  return {pass, fmt("indicator %.2e; (a) %.2e; (b) sigma3/sigma1 %.2e; (c) weil1 max %.2e "
                    "on %zu points (%zu distinct); %.1f s",
                    indicator, r.best_residual, s31, w1.max_residual,
                    cap.raw_points.size(), cap.points.size(), t)};
}

Outcome kp_chain_genus2() {
  const RiemannMatrix tau = generic_g2();
  const SearchResult r = kp_fit(tau, 1e-7);

  SamplePlan d1;
  d1.count = 1;
  d1.starts = 100;
  const DivisorSample d1s = sample_D1_theta(tau, r.best_jet, d1);
  const ResidualReport weil =
      weil_check(d1s.raw_points, tau, r.best_jet, std::nullopt, WeilRelation::kWeil, 1e-6);

  SamplePlan th;
  th.count = 50;
  th.starts = 200;
  const DivisorSample ths = sample_theta_divisor(tau, th);
  const std::size_t used = std::min<std::size_t>(ths.points.size(), 50);
  double longeq = 0.0;
  for (std::size_t i = 0; i < used; ++i)
    longeq = std::max(longeq, longeq_residual(ths.points[i].z, tau, r.best_jet));

  const bool pass = r.converged && r.best_residual <= 1e-7 && !d1s.raw_points.empty() &&
                    weil.pass && used == 50 && longeq <= 1e-6;
  return {pass, fmt("kp %.2e; weil max %.2e on %zu D1Theta points; longeq max %.2e on %zu "
                    "Theta points",
                    r.best_residual, weil.max_residual, d1s.raw_points.size(), longeq,
                    used)};
}

Outcome hierarchy_scaling() {
  std::string detail;
  bool pass = true;
  for (const RiemannMatrix& tau : {tau_i(), generic_g2()}) {
    const SearchResult kp = kp_fit(tau, 1e-7);
    SearchProblem p(tau);
    p.target = SearchTarget::kHierarchy;
    p.initial = kp.best_jet;
    p.jet_order = 3;
    const SearchResult h = fit_hierarchy(p);
    const double e = h.eps_exponent.value_or(0.0);
    pass = pass && e >= 3.5;
    detail += fmt("%sg=%d exponent %.3f", detail.empty() ? "" : "; ", tau.genus(), e);
  }
  return {pass, detail + " (>= 3.5)"};
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(THETALAB_CLI) + " " + args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome pde_cross_check() {
  const fs::path dir = fs::temp_directory_path() / "thetalab_acceptance";
  fs::create_directories(dir);
  std::string detail;
  bool pass = true;
  for (const RiemannMatrix& tau : {tau_i(), generic_g2()}) {
    const std::string g = std::to_string(tau.genus());
    const fs::path tau_file = dir / ("tau" + g + ".json");
    const fs::path jet_file = dir / ("kp" + g + ".json");
    const fs::path csv_file = dir / ("grid" + g + ".csv");
    io::write_json_file(tau_file.string(), io::tau_to_json(tau));
    const int fit_code = run_cli("kp-search --tau " + tau_file.string() + " --out " +
                                 jet_file.string() + " --tol 1e-9");
    const int grid_code = run_cli("grid --tau " + tau_file.string() + " --jet " +
                                  jet_file.string() + " --out " + csv_file.string());
    if (fit_code != 0 || grid_code != 0) {
      pass = false;
      detail += fmt("%sg=%s: cli exit %d/%d", detail.empty() ? "" : "; ", g.c_str(),
                    fit_code, grid_code);
      continue;
    }
    std::ifstream in(csv_file);
    std::stringstream ss;
    ss << in.rdbuf();
    const KpGridCheck chk = kp_grid_check(parse_grid_csv(ss.str()));
    pass = pass && chk.checked > 0 && chk.max_residual <= 1e-4;
    detail += fmt("%sg=%s: max %.2e over %zu interior nodes", detail.empty() ? "" : "; ",
                  g.c_str(), chk.max_residual, chk.checked);
  }
  return {pass, detail + " (<= 1e-4)"};
}

Outcome negative_control() {
  const auto t0 = std::chrono::steady_clock::now();
  SearchProblem p(RiemannMatrix::random(4, 4));
  p.target = SearchTarget::kHirota;
  p.budget = {50, 500};
  const SearchResult r = fit(p);
  const double t = seconds_since(t0);
  return {!r.converged && r.best_residual >= 1e-3,
          fmt("best holdout %.3e over %d restarts (>= 1e-3, soft), %.0f s",
              r.best_residual, r.restarts_run, t)};
}

DirectionJet random_jet(int g, Rng& rng) {
  DirectionJet j;
  j.U = rng.complex_box(g, 1.0);
  j.V = rng.complex_box(g, 1.0);
  j.W = rng.complex_box(g, 1.0);
  j.c = rng.complex_normal();
  j.d = rng.complex_normal();
  j.A = rng.complex_normal();
  j.B = rng.complex_normal();
  return j;
}

Outcome equivalences() {
  Rng rng(10);
  double sub = 0.0, gauge = 0.0, proj = 0.0, parity = 0.0;
  for (int k = 0; k < 30; ++k) {
    const int g = 1 + k % 3;
    const RiemannMatrix tau = RiemannMatrix::random(g, 3000 + k);
    const DirectionJet jet = random_jet(g, rng);
    const CVector z = random_point(tau, rng);
    const CVector a = random_point(tau, rng);

    DirectionJet moved = jet;
    moved.V = *jet.V - 2.0 * *jet.A * *jet.U;
    moved.c = *jet.A * *jet.A - *jet.B;
    const BilinearValue lhs = p_ab_value(z, tau, jet, a);
    const BilinearValue rhs = p_value(z, tau, moved, a);
    sub = std::max(sub, std::abs(lhs.residual - rhs.residual) /
                            std::max(lhs.normalizer, rhs.normalizer));

    const Complex lambda =
        std::polar(std::exp(rng.uniform(-0.7, 0.7)), rng.uniform(0.0, 2 * kPi));
    const DirectionJet scaled = jet.gauge_scaled(lambda);
    gauge = std::max({gauge,
                      std::abs(hirota_residual(z, tau, jet) - hirota_residual(z, tau, scaled)),
                      std::abs(p_residual(z, tau, jet, a) - p_residual(z, tau, scaled, a)),
                      std::abs(p_ab_residual(z, tau, jet, a) -
                               p_ab_residual(z, tau, scaled, a))});

    parity = std::max(parity, std::abs(p_residual(z, tau, jet, a) -
                                       p_residual(CVector(-z - a), tau, jet, a)));

    if (g >= 2) {
      const CMatrix rows = flex_jet_rows(z, *jet.U, *jet.V, tau, FlexOrder::kSecond);
      const auto s0 = jet_singular_values(rows);
      const Complex mu =
          std::polar(std::exp(rng.uniform(-5.0, 5.0)), rng.uniform(0.0, 2 * kPi));
      const auto s1 = jet_singular_values(CMatrix(mu * rows));
      for (std::size_t i = 1; i < s0.size(); ++i)
        proj = std::max(proj, std::abs(s0[i] / s0[0] - s1[i] / s1[0]));
    }
  }
  const bool pass = sub <= 1e-12 && gauge <= 1e-9 && proj <= 1e-12 && parity <= 1e-10;
  return {pass, fmt("p.AB<->p %.1e (<= 1e-12); gauge %.1e (<= 1e-9); flex projective %.1e "
                    "(<= 1e-12); parity %.1e (<= 1e-10)",
                    sub, gauge, proj, parity)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "theta oracle", theta_oracle},
      {2, "quasi-periodicity", quasi_periodicity},
      {3, "derivatives vs finite differences", derivatives_vs_fd},
      {4, "g=1 KP search", kp_genus1},
      {5, "g=2 one-point / flex / weil1 chain", theorem1_chain},
      {6, "g=2 KP / weil / longeq chain", kp_chain_genus2},
      {7, "hierarchy epsilon scaling", hierarchy_scaling},
      {8, "KP stencil on emitted grids", pde_cross_check},
      {9, "g=4 negative control", negative_control},
      {10, "equivalence suite", equivalences},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << ": "
              << o.detail << fmt(" [%.1f s]", seconds_since(t0)) << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed"
                       : std::string("acceptance: all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
