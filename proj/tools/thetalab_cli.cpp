// thetalab command-line frontend.
//
// Exit codes: 0 pass / converged, 1 completed but not passing, 2 input error,
// 3 numerical failure. Errors are reported on stderr as
// {"error": {"code": ..., "message": ...}}.

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "thetalab/bilinear.hpp"
#include "thetalab/divisor.hpp"
#include "thetalab/error.hpp"
#include "thetalab/json_io.hpp"
#include "thetalab/kp_grid.hpp"
#include "thetalab/kummer.hpp"
#include "thetalab/parallel.hpp"
#include "thetalab/search.hpp"
#include "thetalab/theta.hpp"

using namespace thetalab;
using io::Json;

namespace {

enum Exit { kPass = 0, kFail = 1, kInputError = 2, kNumericalError = 3 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPrecisionUnreachable:
    case ErrorCode::kDegenerateSample:
    case ErrorCode::kPole:
    case ErrorCode::kDegenerateJet:
      return kNumericalError;
    default:
      return kInputError;
  }
}

struct Common {
  std::string tau_path;
  std::string jet_path;
  int samples = -1;  // -1: command default
  std::uint64_t seed = 0;
  double tol = -1.0;  // negative: command default
  unsigned threads = 0;
  std::string out = "-";

  int samples_or(int d) const { return samples >= 0 ? samples : d; }
  double tol_or(double d) const { return tol > 0.0 ? tol : d; }
};

void add_common(CLI::App* cmd, Common& c, bool needs_jet) {
  cmd->add_option("--tau", c.tau_path, "Riemann matrix JSON {g, tau_re, tau_im}")
      ->required();
  auto* jet = cmd->add_option("--jet", c.jet_path,
                              "Direction jet JSON (or a search result)");
  if (needs_jet) jet->required();
  cmd->add_option("--samples", c.samples, "Sample count");
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--tol", c.tol, "Pass tolerance");
  cmd->add_option("--threads", c.threads, "Worker threads (0: all cores)");
  cmd->add_option("--out", c.out, "Output path ('-' for stdout)")
      ->capture_default_str();
}

RiemannMatrix load_tau(const Common& c) {
  return io::tau_from_json(io::read_json_file(c.tau_path));
}

struct LoadedJet {
  DirectionJet jet;
  std::optional<CVector> a;
};

// A plain jet, {"jet": ..., "a": ...}, or a search result.
LoadedJet load_jet(const std::string& path) {
  const Json j = io::read_json_file(path);
  LoadedJet out;
  if (j.contains("schema") && j["schema"] == std::string(io::kSearchSchema)) {
    const SearchResult r = io::search_from_json(j);
    out.jet = r.best_jet;
    out.a = r.a;
    return out;
  }
  const Json& body = j.contains("jet") ? j["jet"] : j;
  out.jet = io::jet_from_json(body);
  if (j.contains("a") && !j["a"].is_null()) out.a = io::vector_from_json(j["a"], "a");
  return out;
}

const CVector& require_a(const LoadedJet& l) {
  if (!l.a)
    throw Error(ErrorCode::kInvalidInput,
                "this command needs a shift 'a' next to the jet");
  return *l.a;
}

// One-point data (V, c) without exponents reads as A = 0, B = -c.
DirectionJet with_ab(DirectionJet jet) {
  if (!jet.A && !jet.B && jet.c) {
    jet.A = Complex(0.0);
    jet.B = -*jet.c;
  }
  return jet;
}

int finish_report(const Common& c, const ResidualReport& r) {
  io::write_json_file(c.out, io::report_to_json(r));
  return r.pass ? kPass : kFail;
}

int residual_command(const Common& c, int default_samples, double default_tol,
                     const std::function<double(const AbelianPoint&,
                                                const RiemannMatrix&)>& fn) {
  const RiemannMatrix tau = load_tau(c);
  const ResidualReport r = residual_sweep(
      tau, c.samples_or(default_samples), c.seed, c.tol_or(default_tol),
      [&](const AbelianPoint& z) { return fn(z, tau); }, c.threads);
  return finish_report(c, r);
}

// --- theta-eval ---------------------------------------------------------

struct ThetaEvalArgs {
  std::string points_path;
};

int cmd_theta_eval(const Common& c, const ThetaEvalArgs& args) {
  const RiemannMatrix tau = load_tau(c);
  const Json in = io::read_json_file(args.points_path);
  const Json& pts = in.is_array() ? in : in.at("points");
  std::vector<DerivativeRequest> requests;
  if (in.is_object() && in.contains("requests")) {
    for (const Json& req : in["requests"]) {
      DerivativeRequest r;
      for (const Json& dir : req) r.push_back(io::vector_from_json(dir, "requests"));
      requests.push_back(std::move(r));
    }
  }
  Json out_pts = Json::array();
  for (const Json& p : pts) {
    const CVector z = io::vector_from_json(p, "points");
    const ThetaJet j = theta_eval(z, tau, requests);
    const double scale = std::exp(j.scale_exponent);
    Json derivs = Json::array(), scaled = Json::array();
    for (const Complex& d : j.derivs) {
      derivs.push_back(io::to_json(materialize(d, j.scale_exponent)));
      scaled.push_back(io::to_json(d));
    }
    out_pts.push_back({{"point", io::to_json(z)},
                       {"value", io::to_json(materialize(j.value, j.scale_exponent))},
                       {"derivs", std::move(derivs)},
                       {"error_bound", io::real_to_json(j.error_bound * scale)},
                       {"scaled_value", io::to_json(j.value)},
                       {"scaled_derivs", std::move(scaled)},
                       {"scaled_error_bound", io::real_to_json(j.error_bound)},
                       {"scale_exponent", j.scale_exponent}});
  }
  io::write_json_file(c.out, Json{{"schema", io::kThetaEvalSchema},
                                  {"points", std::move(out_pts)}});
  return kPass;
}

// --- search -------------------------------------------------------------

struct SearchArgs {
  int restarts = 16;
  int iterations = 200;
  int holdout = 200;
  bool free_u = false;
  bool free_gauge = false;
  std::string trace_path;
};

int cmd_search(const Common& c, const SearchArgs& args, SearchTarget target) {
  SearchProblem p(load_tau(c));
  p.target = target;
  if (!c.jet_path.empty()) {
    const LoadedJet l = load_jet(c.jet_path);
    p.initial = l.jet;
    p.a_initial = l.a;
  }
  p.free.U = args.free_u;
  p.free_gauge = args.free_gauge;
  p.sample_count = c.samples_or(0);
  p.holdout_count = args.holdout;
  p.seed = c.seed;
  p.budget = {args.restarts, args.iterations};
  p.tolerance = c.tol_or(1e-7);
  p.threads = c.threads;
  p.record_trace = !args.trace_path.empty();
  const SearchResult r = fit(p);
  if (p.record_trace) io::write_text_file(args.trace_path, trace_csv(r));
  io::write_json_file(c.out, io::search_to_json(r));
  return r.converged ? kPass : kFail;
}

// --- hierarchy ----------------------------------------------------------

struct HierarchyArgs {
  double eps = 1e-2;
  int fit_order = 0;
  int restarts = 4;
  int iterations = 200;
};

int cmd_hierarchy(const Common& c, const HierarchyArgs& args) {
  const LoadedJet l = load_jet(c.jet_path);
  if (args.fit_order > 0) {
    SearchProblem p(load_tau(c));
    p.target = SearchTarget::kHierarchy;
    p.initial = l.jet;
    p.jet_order = args.fit_order;
    p.sample_count = c.samples_or(0);
    p.seed = c.seed;
    p.budget = {args.restarts, args.iterations};
    p.tolerance = c.tol_or(1e-6);
    p.threads = c.threads;
    const SearchResult r = fit_hierarchy(p);
    io::write_json_file(c.out, io::search_to_json(r));
    return r.converged ? kPass : kFail;
  }
  return residual_command(c, 200, 1e-6, [&](const AbelianPoint& z, const RiemannMatrix& tau) {
    return hierarchy_residual(z, tau, l.jet, args.eps);
  });
}

// --- divisor-based commands ---------------------------------------------

int cmd_longeq(const Common& c) {
  const RiemannMatrix tau = load_tau(c);
  const LoadedJet l = load_jet(c.jet_path);
  SamplePlan plan;
  plan.count = c.samples_or(50);
  plan.starts = 4 * plan.count;
  plan.seed = c.seed;
  plan.threads = c.threads;
  const DivisorSample s = sample_theta_divisor(tau, plan);
  std::vector<AbelianPoint> pts;
  std::vector<double> res;
  for (const auto& p : s.points) {
    pts.push_back(p.z);
    res.push_back(longeq_residual(p.z, tau, l.jet));
  }
  ResidualReport r = make_report(std::move(pts), std::move(res), c.tol_or(1e-6));
  r.notes.insert(r.notes.end(), s.notes.begin(), s.notes.end());
  if (s.under_sampled) {
    r.notes.push_back("theta divisor under-sampled: " +
                      std::to_string(s.points.size()) + " of " +
                      std::to_string(plan.count) + " points");
    r.pass = false;
  }
  return finish_report(c, r);
}

struct WeilArgs {
  std::string which = "weil";
};

int cmd_weil(const Common& c, const WeilArgs& args) {
  const RiemannMatrix tau = load_tau(c);
  const LoadedJet l = load_jet(c.jet_path);
  WeilRelation which;
  if (args.which == "weil")
    which = WeilRelation::kWeil;
  else if (args.which == "weil1")
    which = WeilRelation::kWeil1;
  else if (args.which == "weil2")
    which = WeilRelation::kWeil2;
  else
    throw Error(ErrorCode::kInvalidInput, "unknown relation '" + args.which + "'");
  SamplePlan plan;
  plan.count = 1;
  plan.starts = c.samples_or(200);
  plan.seed = c.seed;
  plan.threads = c.threads;
  const DivisorSample s = which == WeilRelation::kWeil1
                              ? sample_theta_cap_theta_a(tau, require_a(l), plan)
                              : sample_D1_theta(tau, l.jet, plan);
  ResidualReport r = weil_check(s.raw_points, tau, l.jet, l.a, which, c.tol_or(1e-6));
  r.notes.insert(r.notes.end(), s.notes.begin(), s.notes.end());
  r.notes.push_back(std::to_string(s.raw_points.size()) + " sampled points, " +
                    std::to_string(s.points.size()) +
                    " distinct modulo the lattice (" + to_string(s.kind) + ")");
  return finish_report(c, r);
}

// --- flex ---------------------------------------------------------------

struct FlexArgs {
  int order = 2;
  std::string from = "one-point";
};

int cmd_flex(const Common& c, const FlexArgs& args) {
  const RiemannMatrix tau = load_tau(c);
  const LoadedJet l = load_jet(c.jet_path);
  if (args.order != 2 && args.order != 3)
    throw Error(ErrorCode::kInvalidInput, "--order must be 2 or 3");
  if (args.from != "one-point" && args.from != "germ")
    throw Error(ErrorCode::kInvalidInput, "--from must be one-point or germ");
  const CVector V = args.from == "germ" ? l.jet.v()
                                        : flex_direction_from_one_point(l.jet.v());
  // The halves of a = 0 are the half periods, where the Kummer map is even
  // and every jet drops rank; only genus 1, which passes anyway, may omit a.
  const CVector a = l.a || tau.genus() != 1 ? require_a(l) : CVector::Zero(1);
  if (tau.genus() > 1 && torus_distance(a, CVector::Zero(tau.genus()), tau) < 1e-8)
    throw Error(ErrorCode::kInvalidInput, "a must be nonzero on the torus");
  const FlexReport r = flex_test_halves(
      a, l.jet.u(), V, tau,
      args.order == 2 ? FlexOrder::kSecond : FlexOrder::kThird, l.jet.W,
      c.tol_or(1e-6), c.threads);
  Json j = io::flex_to_json(r);
  io::write_json_file(c.out, j);
  return r.pass ? kPass : kFail;
}

// --- decomp -------------------------------------------------------------

int cmd_decomp(const Common& c) {
  const RiemannMatrix tau = load_tau(c);
  const DecomposabilityReport d = decomposability(tau);
  const double tol = c.tol_or(1e-8);
  const bool decomposable = d.indicator <= tol;
  Json j = io::decomposability_to_json(d);
  j["threshold"] = tol;
  j["verdict"] = decomposable ? "DECOMPOSABLE" : "INDECOMPOSABLE";
  io::write_json_file(c.out, j);
  return decomposable ? kFail : kPass;
}

// --- grid ---------------------------------------------------------------

struct GridArgs {
  int nx = 25, ny = 21, nt = 9;
  double h = 1e-2;
  double x0 = 0.0, y0 = 0.0, t0 = 0.0;
  std::vector<double> base;
  double check = -1.0;
};

int cmd_grid(const Common& c, const GridArgs& args) {
  const RiemannMatrix tau = load_tau(c);
  const LoadedJet l = load_jet(c.jet_path);
  const int g = tau.genus();
  CVector z = CVector::Zero(g);
  if (!args.base.empty()) {
    if (static_cast<int>(args.base.size()) != 2 * g)
      throw Error(ErrorCode::kInvalidInput, "--base needs 2g numbers (re, im pairs)");
    for (int i = 0; i < g; ++i) z[i] = Complex(args.base[2 * i], args.base[2 * i + 1]);
  }
  if (args.nx < 0 || args.ny < 0 || args.nt < 0)
    throw Error(ErrorCode::kInvalidInput, "grid counts must be nonnegative");
  GridSpec spec;
  if (args.nx * args.ny * args.nt > 0) {
    spec = unit_step_grid(l.jet, args.nx, args.ny, args.nt, args.h, args.x0,
                          args.y0, args.t0);
  }
  const KpGrid grid = kp_field_grid(spec, z, tau, l.jet, c.threads);
  io::write_text_file(c.out, grid_csv(grid));
  if (args.check <= 0.0) return kPass;
  const KpGridCheck chk = kp_grid_check(grid);
  const bool pass = chk.checked > 0 && chk.max_residual <= args.check;
  if (c.out != "-")
    std::cout << Json{{"checked", chk.checked},
                      {"skipped", chk.skipped},
                      {"max_residual", chk.max_residual},
                      {"tolerance", args.check},
                      {"pass", pass}}
                     .dump()
              << "\n";
  return pass ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thetalab: theta-function tests of the Jacobian conditions"};
  app.require_subcommand(1);

  Common common;
  std::function<int()> run;

  ThetaEvalArgs te;
  auto* c_te = app.add_subcommand("theta-eval", "Evaluate theta and derivatives");
  add_common(c_te, common, false);
  c_te->add_option("--points", te.points_path,
                   "JSON: list of points or {points, requests}")
      ->required();
  c_te->callback([&] { run = [&] { return cmd_theta_eval(common, te); }; });

  auto simple = [&](const char* name, const char* help, int samples, double tol,
                    std::function<double(const AbelianPoint&, const RiemannMatrix&,
                                         const LoadedJet&)> fn) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common, true);
    cmd->callback([&, samples, tol, fn] {
      run = [&, samples, tol, fn] {
        const LoadedJet l = load_jet(common.jet_path);
        return residual_command(common, samples, tol,
                                [&](const AbelianPoint& z, const RiemannMatrix& tau) {
                                  return fn(z, tau, l);
                                });
      };
    });
  };
  simple("kp-residual", "Hirota (KP) residual sweep", 200, 1e-7,
         [](const AbelianPoint& z, const RiemannMatrix& tau, const LoadedJet& l) {
           return hirota_residual(z, tau, l.jet);
         });
  simple("one-point-residual", "One-point equation residual sweep", 200, 1e-7,
         [](const AbelianPoint& z, const RiemannMatrix& tau, const LoadedJet& l) {
           return p_residual(z, tau, l.jet, require_a(l));
         });
  simple("pab-residual", "One-point equation with (A, B) residual sweep", 200, 1e-7,
         [](const AbelianPoint& z, const RiemannMatrix& tau, const LoadedJet& l) {
           return p_ab_residual(z, tau, with_ab(l.jet), require_a(l));
         });

  auto* c_long = app.add_subcommand("longeq", "Divisor identity on sampled theta zeros");
  add_common(c_long, common, true);
  c_long->callback([&] { run = [&] { return cmd_longeq(common); }; });

  HierarchyArgs ha;
  auto* c_h = app.add_subcommand("hierarchy", "Hierarchy residual, or --fit K");
  add_common(c_h, common, true);
  c_h->add_option("--eps", ha.eps, "Epsilon of the residual sweep")->capture_default_str();
  c_h->add_option("--fit", ha.fit_order, "Fit a jet of this order (1..4) instead");
  c_h->add_option("--restarts", ha.restarts)->capture_default_str();
  c_h->add_option("--iterations", ha.iterations)->capture_default_str();
  c_h->callback([&] { run = [&] { return cmd_hierarchy(common, ha); }; });

  SearchArgs sa;
  for (auto [name, target] : {std::pair{"kp-search", SearchTarget::kHirota},
                              std::pair{"one-point-search", SearchTarget::kOnePoint}}) {
    auto* cmd = app.add_subcommand(name, target == SearchTarget::kHirota
                                             ? "Fit (V, W, d) to the Hirota equation"
                                             : "Fit (V, a, c) to the one-point equation");
    add_common(cmd, common, false);
    cmd->add_option("--restarts", sa.restarts)->capture_default_str();
    cmd->add_option("--iterations", sa.iterations)->capture_default_str();
    cmd->add_option("--holdout", sa.holdout, "Holdout sample count")->capture_default_str();
    cmd->add_flag("--free-U", sa.free_u, "Optimize U as well (renormalized each step)");
    cmd->add_flag("--free-gauge", sa.free_gauge, "Do not renormalize a free U");
    cmd->add_option("--trace", sa.trace_path, "CSV of (restart, iteration, objective)");
    const SearchTarget t = target;
    cmd->callback([&, t] { run = [&, t] { return cmd_search(common, sa, t); }; });
  }

  FlexArgs fa;
  auto* c_flex = app.add_subcommand("flex", "Flex test of the Kummer image at the halves of a");
  add_common(c_flex, common, true);
  c_flex->add_option("--order", fa.order, "2 (flex) or 3 (third-order germ)")
      ->capture_default_str();
  c_flex->add_option("--from", fa.from,
                     "one-point: jet V is one-point data; germ: jet V is the germ")
      ->capture_default_str();
  c_flex->callback([&] { run = [&] { return cmd_flex(common, fa); }; });

  WeilArgs wa;
  auto* c_weil = app.add_subcommand("weil", "Weil-type containments on sampled divisors");
  add_common(c_weil, common, true);
  c_weil->add_option("--which", wa.which, "weil, weil1 or weil2")->capture_default_str();
  c_weil->callback([&] { run = [&] { return cmd_weil(common, wa); }; });

  auto* c_dec = app.add_subcommand("decomp", "Decomposability indicator (g = 2)");
  add_common(c_dec, common, false);
  c_dec->callback([&] { run = [&] { return cmd_decomp(common); }; });

  GridArgs ga;
  auto* c_grid = app.add_subcommand("grid", "CSV of u(x, y, t) over a grid");
  add_common(c_grid, common, true);
  c_grid->add_option("--nx", ga.nx)->capture_default_str();
  c_grid->add_option("--ny", ga.ny)->capture_default_str();
  c_grid->add_option("--nt", ga.nt)->capture_default_str();
  c_grid->add_option("--step", ga.h, "Step along unit-normalized directions")
      ->capture_default_str();
  c_grid->add_option("--x0", ga.x0);
  c_grid->add_option("--y0", ga.y0);
  c_grid->add_option("--t0", ga.t0);
  c_grid->add_option("--base", ga.base, "Base point z as re,im pairs")->delimiter(',');
  c_grid->add_option("--check", ga.check,
                     "Also run the KP stencil check at this tolerance");
  c_grid->callback([&] { run = [&] { return cmd_grid(common, ga); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << Json{{"error", {{"code", "INVALID_ARGUMENTS"}, {"message", e.what()}}}}.dump()
              << "\n";
    return kInputError;
  }
  try {
    if (common.threads > 0) set_default_threads(common.threads);
    return run();
  } catch (const Error& e) {
    std::cerr << io::error_to_json(e).dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", {{"code", "INTERNAL"}, {"message", e.what()}}}}.dump()
              << "\n";
    return kNumericalError;
  }
}
