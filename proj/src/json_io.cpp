#include "thetalab/json_io.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace thetalab::io {

namespace {

[[noreturn]] void parse_fail(std::string_view field, const std::string& why) {
  throw Error(ErrorCode::kParseError,
              "field '" + std::string(field) + "': " + why);
}

const Json& member(const Json& j, const char* key) {
  if (!j.is_object()) parse_fail(key, "enclosing value is not an object");
  auto it = j.find(key);
  if (it == j.end()) parse_fail(key, "missing");
  return *it;
}

bool has(const Json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && !it->is_null();
}

void check_schema(const Json& j, std::string_view want) {
  const Json& s = member(j, "schema");
  if (!s.is_string() || s.get<std::string>() != want)
    parse_fail("schema", "expected " + std::string(want));
}

int int_from_json(const Json& j, std::string_view field) {
  if (!j.is_number_integer()) parse_fail(field, "expected an integer");
  return j.get<int>();
}

bool bool_from_json(const Json& j, std::string_view field) {
  if (!j.is_boolean()) parse_fail(field, "expected a boolean");
  return j.get<bool>();
}

std::string string_from_json(const Json& j, std::string_view field) {
  if (!j.is_string()) parse_fail(field, "expected a string");
  return j.get<std::string>();
}

Json reals_to_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(real_to_json(x));
  return a;
}

std::vector<double> reals_from_json(const Json& j, std::string_view field) {
  if (!j.is_array()) parse_fail(field, "expected an array");
  std::vector<double> out;
  for (const Json& x : j) out.push_back(real_from_json(x, field));
  return out;
}

Json strings_to_json(const std::vector<std::string>& v) { return Json(v); }

std::vector<std::string> strings_from_json(const Json& j, std::string_view field) {
  if (!j.is_array()) parse_fail(field, "expected an array");
  std::vector<std::string> out;
  for (const Json& x : j) out.push_back(string_from_json(x, field));
  return out;
}

Json opt_vector(const std::optional<CVector>& v) {
  return v ? to_json(*v) : Json(nullptr);
}

Json opt_complex(const std::optional<Complex>& v) {
  return v ? to_json(*v) : Json(nullptr);
}

std::optional<CVector> opt_vector_from(const Json& j, const char* key) {
  if (!has(j, key)) return std::nullopt;
  return vector_from_json(j.at(key), key);
}

std::optional<Complex> opt_complex_from(const Json& j, const char* key) {
  if (!has(j, key)) return std::nullopt;
  return complex_from_json(j.at(key), key);
}

Json rmatrix_to_json(const RMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

RMatrix rmatrix_from_json(const Json& j, int g, std::string_view field) {
  if (!j.is_array() || static_cast<int>(j.size()) != g)
    parse_fail(field, "expected " + std::to_string(g) + " rows");
  RMatrix m(g, g);
  for (int i = 0; i < g; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != g)
      parse_fail(field, "expected " + std::to_string(g) + " columns");
    for (int k = 0; k < g; ++k) {
      if (!j[i][k].is_number()) parse_fail(field, "expected a number");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

Json ivector_to_json(const IVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

IVector ivector_from_json(const Json& j, std::string_view field) {
  if (!j.is_array()) parse_fail(field, "expected an array");
  IVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = int_from_json(j[i], field);
  return v;
}

Json point_to_json(const AbelianPoint& p) {
  return Json{{"z", to_json(p.z)}, {"reduced", p.reduced}};
}

AbelianPoint point_from_json(const Json& j) {
  return AbelianPoint(vector_from_json(member(j, "z"), "z"),
                      bool_from_json(member(j, "reduced"), "reduced"));
}

std::string normalization_name(Normalization n) {
  return n == Normalization::kTermSum ? "term-sum" : "none";
}

DivisorKind kind_from(const std::string& s) {
  if (s == "Theta") return DivisorKind::kTheta;
  if (s == "D1Theta") return DivisorKind::kD1Theta;
  if (s == "ThetaCapThetaA") return DivisorKind::kThetaCapThetaA;
  parse_fail("kind", "unknown divisor kind '" + s + "'");
}

SearchTarget target_from(const std::string& s) {
  if (s == "hirota") return SearchTarget::kHirota;
  if (s == "one_point") return SearchTarget::kOnePoint;
  if (s == "hierarchy") return SearchTarget::kHierarchy;
  parse_fail("target", "unknown target '" + s + "'");
}

Json divisor_point_to_json(const DivisorPoint& p) {
  Json cons = Json::array();
  for (const auto& c : p.constraints_met)
    cons.push_back({{"id", c.id}, {"magnitude", real_to_json(c.magnitude)}});
  return Json{{"z", point_to_json(p.z)},
              {"kind", to_string(p.kind)},
              {"constraints_met", std::move(cons)},
              {"last_step_ratio", real_to_json(p.last_step_ratio)},
              {"iterations", p.iterations}};
}

DivisorPoint divisor_point_from_json(const Json& j) {
  DivisorPoint p;
  p.z = point_from_json(member(j, "z"));
  p.kind = kind_from(string_from_json(member(j, "kind"), "kind"));
  const Json& cons = member(j, "constraints_met");
  if (!cons.is_array()) parse_fail("constraints_met", "expected an array");
  for (const Json& c : cons)
    p.constraints_met.push_back(
        {string_from_json(member(c, "id"), "id"),
         real_from_json(member(c, "magnitude"), "magnitude")});
  p.last_step_ratio = real_from_json(member(j, "last_step_ratio"), "last_step_ratio");
  p.iterations = int_from_json(member(j, "iterations"), "iterations");
  return p;
}

Json flex_candidate_to_json(const FlexCandidate& c) {
  return Json{{"b", point_to_json(c.b)},
              {"m", ivector_to_json(c.m)},
              {"n", ivector_to_json(c.n)},
              {"singular_values", reals_to_json(c.singular_values)},
              {"sigma_ratios", reals_to_json(c.sigma_ratios)},
              {"pass", c.pass}};
}

FlexCandidate flex_candidate_from_json(const Json& j) {
  FlexCandidate c;
  c.b = point_from_json(member(j, "b"));
  c.m = ivector_from_json(member(j, "m"), "m");
  c.n = ivector_from_json(member(j, "n"), "n");
  c.singular_values = reals_from_json(member(j, "singular_values"), "singular_values");
  c.sigma_ratios = reals_from_json(member(j, "sigma_ratios"), "sigma_ratios");
  c.pass = bool_from_json(member(j, "pass"), "pass");
  return c;
}

}  // namespace

Json to_json(Complex x) {
  return Json{{"re", real_to_json(x.real())}, {"im", real_to_json(x.imag())}};
}

Json to_json(const CVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json(v[i]));
  return a;
}

Json real_to_json(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

double real_from_json(const Json& j, std::string_view field) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) parse_fail(field, "expected a number");
  return j.get<double>();
}

Complex complex_from_json(const Json& j, std::string_view field) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_object() || !j.contains("re") || !j.contains("im") ||
      !j["re"].is_number() || !j["im"].is_number())
    parse_fail(field, "expected {\"re\": number, \"im\": number}");
  return {j["re"].get<double>(), j["im"].get<double>()};
}

CVector vector_from_json(const Json& j, std::string_view field) {
  if (!j.is_array()) parse_fail(field, "expected an array of complex numbers");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = complex_from_json(j[i], field);
  return v;
}

Json tau_to_json(const RiemannMatrix& tau) {
  return Json{{"g", tau.genus()},
              {"tau_re", rmatrix_to_json(tau.re())},
              {"tau_im", rmatrix_to_json(tau.im())}};
}

RiemannMatrix tau_from_json(const Json& j) {
  const int g = int_from_json(member(j, "g"), "g");
  if (g < 1) parse_fail("g", "genus must be positive");
  const RMatrix re = rmatrix_from_json(member(j, "tau_re"), g, "tau_re");
  const RMatrix im = rmatrix_from_json(member(j, "tau_im"), g, "tau_im");
  return RiemannMatrix(re, im);
}

Json jet_to_json(const DirectionJet& jet) {
  Json zeta = Json::array();
  for (const auto& z : jet.zeta) zeta.push_back(to_json(z));
  Json dcoef = Json::array();
  for (const auto& d : jet.dcoef) dcoef.push_back(to_json(d));
  return Json{{"U", opt_vector(jet.U)},   {"V", opt_vector(jet.V)},
              {"W", opt_vector(jet.W)},   {"c", opt_complex(jet.c)},
              {"d", opt_complex(jet.d)},  {"A", opt_complex(jet.A)},
              {"B", opt_complex(jet.B)},  {"zeta", jet.zeta.empty() ? Json(nullptr) : zeta},
              {"dcoef", jet.dcoef.empty() ? Json(nullptr) : dcoef}};
}

DirectionJet jet_from_json(const Json& j) {
  if (!j.is_object()) parse_fail("jet", "expected an object");
  DirectionJet jet;
  jet.U = opt_vector_from(j, "U");
  jet.V = opt_vector_from(j, "V");
  jet.W = opt_vector_from(j, "W");
  jet.c = opt_complex_from(j, "c");
  jet.d = opt_complex_from(j, "d");
  jet.A = opt_complex_from(j, "A");
  jet.B = opt_complex_from(j, "B");
  if (has(j, "zeta")) {
    if (!j["zeta"].is_array()) parse_fail("zeta", "expected an array");
    for (const Json& z : j["zeta"]) jet.zeta.push_back(vector_from_json(z, "zeta"));
  }
  if (has(j, "dcoef")) {
    if (!j["dcoef"].is_array()) parse_fail("dcoef", "expected an array");
    for (const Json& d : j["dcoef"]) jet.dcoef.push_back(complex_from_json(d, "dcoef"));
  }
  return jet;
}

Json report_to_json(const ResidualReport& r) {
  Json pts = Json::array();
  for (const auto& p : r.sample_points) pts.push_back(point_to_json(p));
  return Json{{"schema", kResidualSchema},
              {"sample_points", std::move(pts)},
              {"residuals", reals_to_json(r.residuals)},
              {"normalization", normalization_name(r.normalization)},
              {"max_residual", real_to_json(r.max_residual)},
              {"mean_residual", real_to_json(r.mean_residual)},
              {"tolerance", real_to_json(r.tolerance)},
              {"pass", r.pass},
              {"vacuous", r.vacuous},
              {"notes", strings_to_json(r.notes)}};
}

ResidualReport report_from_json(const Json& j) {
  check_schema(j, kResidualSchema);
  ResidualReport r;
  const Json& pts = member(j, "sample_points");
  if (!pts.is_array()) parse_fail("sample_points", "expected an array");
  for (const Json& p : pts) r.sample_points.push_back(point_from_json(p));
  r.residuals = reals_from_json(member(j, "residuals"), "residuals");
  const std::string norm = string_from_json(member(j, "normalization"), "normalization");
  if (norm == "term-sum")
    r.normalization = Normalization::kTermSum;
  else if (norm == "none")
    r.normalization = Normalization::kNone;
  else
    parse_fail("normalization", "unknown value '" + norm + "'");
  r.max_residual = real_from_json(member(j, "max_residual"), "max_residual");
  r.mean_residual = real_from_json(member(j, "mean_residual"), "mean_residual");
  r.tolerance = real_from_json(member(j, "tolerance"), "tolerance");
  r.pass = bool_from_json(member(j, "pass"), "pass");
  r.vacuous = bool_from_json(member(j, "vacuous"), "vacuous");
  r.notes = strings_from_json(member(j, "notes"), "notes");
  return r;
}

Json flex_to_json(const FlexReport& r) {
  Json halves = Json::array();
  for (const auto& c : r.tested_halves) halves.push_back(flex_candidate_to_json(c));
  return Json{{"schema", kFlexSchema},
              {"b", point_to_json(r.b)},
              {"order", r.order == FlexOrder::kSecond ? "second" : "third"},
              {"singular_values", reals_to_json(r.singular_values)},
              {"sigma_ratios", reals_to_json(r.sigma_ratios)},
              {"tolerance", real_to_json(r.tolerance)},
              {"pass", r.pass},
              {"tested_halves", std::move(halves)},
              {"notes", strings_to_json(r.notes)}};
}

FlexReport flex_from_json(const Json& j) {
  check_schema(j, kFlexSchema);
  FlexReport r;
  r.b = point_from_json(member(j, "b"));
  const std::string order = string_from_json(member(j, "order"), "order");
  if (order == "second")
    r.order = FlexOrder::kSecond;
  else if (order == "third")
    r.order = FlexOrder::kThird;
  else
    parse_fail("order", "unknown value '" + order + "'");
  r.singular_values = reals_from_json(member(j, "singular_values"), "singular_values");
  r.sigma_ratios = reals_from_json(member(j, "sigma_ratios"), "sigma_ratios");
  r.tolerance = real_from_json(member(j, "tolerance"), "tolerance");
  r.pass = bool_from_json(member(j, "pass"), "pass");
  const Json& halves = member(j, "tested_halves");
  if (!halves.is_array()) parse_fail("tested_halves", "expected an array");
  for (const Json& c : halves) r.tested_halves.push_back(flex_candidate_from_json(c));
  r.notes = strings_from_json(member(j, "notes"), "notes");
  return r;
}

Json points_to_json(const DivisorSample& s) {
  Json pts = Json::array(), raw = Json::array();
  for (const auto& p : s.points) pts.push_back(divisor_point_to_json(p));
  for (const auto& p : s.raw_points) raw.push_back(divisor_point_to_json(p));
  return Json{{"schema", kPointsSchema},
              {"kind", to_string(s.kind)},
              {"points", std::move(pts)},
              {"raw_points", std::move(raw)},
              {"starts", s.starts},
              {"under_sampled", s.under_sampled},
              {"slice_based", s.slice_based},
              {"notes", strings_to_json(s.notes)}};
}

DivisorSample points_from_json(const Json& j) {
  check_schema(j, kPointsSchema);
  DivisorSample s;
  s.kind = kind_from(string_from_json(member(j, "kind"), "kind"));
  for (const char* key : {"points", "raw_points"}) {
    const Json& arr = member(j, key);
    if (!arr.is_array()) parse_fail(key, "expected an array");
    auto& out = std::string_view(key) == "points" ? s.points : s.raw_points;
    for (const Json& p : arr) out.push_back(divisor_point_from_json(p));
  }
  s.starts = int_from_json(member(j, "starts"), "starts");
  s.under_sampled = bool_from_json(member(j, "under_sampled"), "under_sampled");
  s.slice_based = bool_from_json(member(j, "slice_based"), "slice_based");
  s.notes = strings_from_json(member(j, "notes"), "notes");
  return s;
}

Json problem_to_json(const SearchProblem& p) {
  return Json{{"schema", kProblemSchema},
              {"tau", tau_to_json(p.tau)},
              {"target", to_string(p.target)},
              {"free_vars",
               {{"U", p.free.U},
                {"V", p.free.V},
                {"W", p.free.W},
                {"c", p.free.c},
                {"d", p.free.d},
                {"a", p.free.a}}},
              {"initial", jet_to_json(p.initial)},
              {"a_initial", opt_vector(p.a_initial)},
              {"sample_count", p.sample_count},
              {"holdout_count", p.holdout_count},
              {"seed", p.seed},
              {"budget",
               {{"restarts", p.budget.restarts},
                {"iterations", p.budget.iterations}}},
              {"tolerance", real_to_json(p.tolerance)},
              {"free_gauge", p.free_gauge},
              {"jet_order", p.jet_order},
              {"eps_grid", reals_to_json(p.eps_grid)}};
}

SearchProblem problem_from_json(const Json& j) {
  check_schema(j, kProblemSchema);
  SearchProblem p(tau_from_json(member(j, "tau")));
  p.target = target_from(string_from_json(member(j, "target"), "target"));
  const Json& f = member(j, "free_vars");
  p.free.U = bool_from_json(member(f, "U"), "free_vars.U");
  p.free.V = bool_from_json(member(f, "V"), "free_vars.V");
  p.free.W = bool_from_json(member(f, "W"), "free_vars.W");
  p.free.c = bool_from_json(member(f, "c"), "free_vars.c");
  p.free.d = bool_from_json(member(f, "d"), "free_vars.d");
  p.free.a = bool_from_json(member(f, "a"), "free_vars.a");
  p.initial = jet_from_json(member(j, "initial"));
  p.a_initial = opt_vector_from(j, "a_initial");
  p.sample_count = int_from_json(member(j, "sample_count"), "sample_count");
  p.holdout_count = int_from_json(member(j, "holdout_count"), "holdout_count");
  const Json& seed = member(j, "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer())
    parse_fail("seed", "expected an unsigned integer");
  p.seed = seed.get<std::uint64_t>();
  const Json& b = member(j, "budget");
  p.budget.restarts = int_from_json(member(b, "restarts"), "budget.restarts");
  p.budget.iterations = int_from_json(member(b, "iterations"), "budget.iterations");
  p.tolerance = real_from_json(member(j, "tolerance"), "tolerance");
  p.free_gauge = bool_from_json(member(j, "free_gauge"), "free_gauge");
  p.jet_order = int_from_json(member(j, "jet_order"), "jet_order");
  p.eps_grid = reals_from_json(member(j, "eps_grid"), "eps_grid");
  return p;
}

Json search_to_json(const SearchResult& r) {
  Json eps = Json::array();
  for (const auto& [e, v] : r.eps_residuals)
    eps.push_back({{"eps", e}, {"residual", real_to_json(v)}});
  return Json{{"schema", kSearchSchema},
              {"best_jet", jet_to_json(r.best_jet)},
              {"a", opt_vector(r.a)},
              {"best_residual", real_to_json(r.best_residual)},
              {"train_objective", real_to_json(r.train_objective)},
              {"history", reals_to_json(r.history)},
              {"converged", r.converged},
              {"restarts_run", r.restarts_run},
              {"gauge_degenerate_restarts", r.gauge_degenerate_restarts},
              {"training_samples", r.training_samples},
              {"real_parameters", r.real_parameters},
              {"eps_exponent", r.eps_exponent ? real_to_json(*r.eps_exponent)
                                              : Json(nullptr)},
              {"eps_residuals", std::move(eps)},
              {"notes", strings_to_json(r.notes)}};
}

SearchResult search_from_json(const Json& j) {
  check_schema(j, kSearchSchema);
  SearchResult r;
  r.best_jet = jet_from_json(member(j, "best_jet"));
  r.a = opt_vector_from(j, "a");
  r.best_residual = real_from_json(member(j, "best_residual"), "best_residual");
  r.train_objective = real_from_json(member(j, "train_objective"), "train_objective");
  r.history = reals_from_json(member(j, "history"), "history");
  r.converged = bool_from_json(member(j, "converged"), "converged");
  r.restarts_run = int_from_json(member(j, "restarts_run"), "restarts_run");
  r.gauge_degenerate_restarts =
      int_from_json(member(j, "gauge_degenerate_restarts"), "gauge_degenerate_restarts");
  r.training_samples = int_from_json(member(j, "training_samples"), "training_samples");
  r.real_parameters = int_from_json(member(j, "real_parameters"), "real_parameters");
  if (has(j, "eps_exponent"))
    r.eps_exponent = real_from_json(j["eps_exponent"], "eps_exponent");
  const Json& eps = member(j, "eps_residuals");
  if (!eps.is_array()) parse_fail("eps_residuals", "expected an array");
  for (const Json& e : eps)
    r.eps_residuals.emplace_back(real_from_json(member(e, "eps"), "eps"),
                                 real_from_json(member(e, "residual"), "residual"));
  r.notes = strings_from_json(member(j, "notes"), "notes");
  return r;
}

Json decomposability_to_json(const DecomposabilityReport& r) {
  Json chars = Json::array();
  for (const auto& c : r.characteristics) {
    std::vector<double> eps(c.eps.data(), c.eps.data() + c.eps.size());
    std::vector<double> delta(c.delta.data(), c.delta.data() + c.delta.size());
    chars.push_back({{"eps", eps}, {"delta", delta}});
  }
  return Json{{"schema", kDecompSchema},
              {"indicator", real_to_json(r.indicator)},
              {"moduli", reals_to_json(r.moduli)},
              {"characteristics", std::move(chars)}};
}

DecomposabilityReport decomposability_from_json(const Json& j) {
  check_schema(j, kDecompSchema);
  DecomposabilityReport r;
  r.indicator = real_from_json(member(j, "indicator"), "indicator");
  r.moduli = reals_from_json(member(j, "moduli"), "moduli");
  const Json& chars = member(j, "characteristics");
  if (!chars.is_array()) parse_fail("characteristics", "expected an array");
  for (const Json& c : chars) {
    const auto eps = reals_from_json(member(c, "eps"), "eps");
    const auto delta = reals_from_json(member(c, "delta"), "delta");
    Characteristic ch;
    ch.eps = Eigen::Map<const RVector>(eps.data(), static_cast<Eigen::Index>(eps.size()));
    ch.delta =
        Eigen::Map<const RVector>(delta.data(), static_cast<Eigen::Index>(delta.size()));
    r.characteristics.push_back(std::move(ch));
  }
  return r;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, "'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path + "'");
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json error_to_json(const Error& e) {
  return Json{{"error", {{"code", std::string(to_string(e.code()))},
                         {"message", e.what()}}}};
}

}  // namespace thetalab::io
