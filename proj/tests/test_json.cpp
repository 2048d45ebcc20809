#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "thetalab/json_io.hpp"
#include "thetalab/kp_grid.hpp"
#include "thetalab/random.hpp"

using namespace thetalab;
using io::Json;

namespace {

// Re-parse through text so the test covers the serializer, not only the tree.
Json reparse(const Json& j) { return Json::parse(j.dump()); }

}  // namespace

TEST_CASE("tau round trip and validation errors") {
  const RiemannMatrix tau = RiemannMatrix::random(3, 5);
  const RiemannMatrix back = io::tau_from_json(reparse(io::tau_to_json(tau)));
  CHECK(back.tau() == tau.tau());

  Json bad = io::tau_to_json(RiemannMatrix::random(2, 1));
  bad["tau_re"][0][1] = 0.25;
  bad["tau_re"][1][0] = -0.25;
  try {
    io::tau_from_json(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTauNotSymmetric);
    CHECK(io::error_to_json(e)["error"]["code"] == "TAU_NOT_SYMMETRIC");
  }
  Json missing = io::tau_to_json(tau);
  missing.erase("tau_im");
  CHECK_THROWS_AS(io::tau_from_json(missing), Error);
}

TEST_CASE("jet round trip keeps absent fields absent") {
  Rng rng(3);
  DirectionJet j;
  j.U = rng.complex_box(2, 1.0);
  j.W = rng.complex_box(2, 1.0);
  j.d = Complex(1.5, -0.25);
  j.zeta = {rng.complex_box(2, 1.0), rng.complex_box(2, 1.0)};
  j.dcoef = {Complex(0.1, 0.2)};
  const Json enc = reparse(io::jet_to_json(j));
  CHECK(enc["V"].is_null());
  CHECK(enc["c"].is_null());
  CHECK(enc["U"][0].contains("re"));
  const DirectionJet k = io::jet_from_json(enc);
  CHECK(*k.U == *j.U);
  CHECK(!k.V);
  CHECK(*k.W == *j.W);
  CHECK(!k.c);
  CHECK(*k.d == *j.d);
  REQUIRE(k.zeta.size() == 2);
  CHECK(k.zeta[1] == j.zeta[1]);
  CHECK(k.dcoef == j.dcoef);
  CHECK_THROWS_AS(io::jet_from_json(Json{{"U", "oops"}}), Error);
}

TEST_CASE("report round trips carry their schema") {
  const RiemannMatrix tau = RiemannMatrix::random(2, 2);
  ResidualReport r = make_report({AbelianPoint(CVector(CVector::Ones(2)), true)},
                                 {1e-12}, 1e-6);
  r.notes.push_back("note");
  const Json enc = reparse(io::report_to_json(r));
  CHECK(enc["schema"] == std::string(io::kResidualSchema));
  const ResidualReport back = io::report_from_json(enc);
  CHECK(back.residuals == r.residuals);
  CHECK(back.pass == r.pass);
  CHECK(back.sample_points[0].z == r.sample_points[0].z);
  CHECK(back.notes == r.notes);

  Json wrong = enc;
  wrong["schema"] = "thetalab.flex_report/1";
  CHECK_THROWS_AS(io::report_from_json(wrong), Error);

  Rng rng(7);
  const FlexReport f = flex_test_halves(CVector(rng.complex_box(2, 0.3)),
                                        rng.unit_complex(2), rng.complex_box(2, 1.0),
                                        tau, FlexOrder::kSecond);
  const FlexReport fb = io::flex_from_json(reparse(io::flex_to_json(f)));
  CHECK(fb.tested_halves.size() == 16);
  CHECK(fb.sigma_ratios == f.sigma_ratios);
  CHECK(fb.tested_halves[5].m == f.tested_halves[5].m);
  CHECK(fb.pass == f.pass);

  SamplePlan plan;
  plan.count = 3;
  plan.starts = 10;
  const DivisorSample s = sample_theta_divisor(tau, plan);
  const DivisorSample sb = io::points_from_json(reparse(io::points_to_json(s)));
  REQUIRE(sb.points.size() == s.points.size());
  CHECK(sb.points[0].z.z == s.points[0].z.z);
  CHECK(sb.points[0].constraints_met[0].magnitude ==
        s.points[0].constraints_met[0].magnitude);

  const DecomposabilityReport d = decomposability(tau);
  const DecomposabilityReport db =
      io::decomposability_from_json(reparse(io::decomposability_to_json(d)));
  CHECK(db.indicator == d.indicator);
  CHECK(db.characteristics.size() == 10);
  CHECK(db.characteristics[3].delta == d.characteristics[3].delta);
}

TEST_CASE("search problem and result round trips") {
  SearchProblem p(RiemannMatrix::random(2, 2));
  p.target = SearchTarget::kOnePoint;
  p.seed = 0xfeedbeefcafeULL;
  p.budget = {3, 7};
  const SearchProblem pb = io::problem_from_json(reparse(io::problem_to_json(p)));
  CHECK(pb.seed == p.seed);
  CHECK(pb.target == p.target);
  CHECK(pb.budget.iterations == 7);
  CHECK(pb.tau.tau() == p.tau.tau());

  SearchResult r;
  r.best_jet.U = CVector::Ones(2);
  r.a = CVector::Zero(2);
  r.best_residual = std::numeric_limits<double>::infinity();
  r.history = {1.0, 0.5};
  r.eps_exponent = 3.9;
  r.eps_residuals = {{1e-2, 1e-6}, {1e-3, 1e-10}};
  const Json enc = reparse(io::search_to_json(r));
  CHECK(enc["best_residual"].is_null());
  const SearchResult rb = io::search_from_json(enc);
  CHECK(std::isinf(rb.best_residual));
  CHECK(rb.history == r.history);
  CHECK(*rb.eps_exponent == 3.9);
  CHECK(rb.eps_residuals == r.eps_residuals);
}

TEST_CASE("file io errors") {
  CHECK_THROWS_AS(io::read_json_file("/nonexistent/x.json"), Error);
  const auto path = std::filesystem::temp_directory_path() / "thetalab_bad.json";
  io::write_text_file(path.string(), "{ not json");
  try {
    io::read_json_file(path.string());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("grid csv round trip keeps poles and axes") {
  GridSpec spec;
  spec.x = {-0.5, 0.25, 3};
  spec.y = {1.0, 0.1, 2};
  spec.t = {0.0, 1e-3, 2};
  KpGrid grid{spec, {}};
  for (std::size_t n = 0; n < spec.nodes(); ++n)
    grid.u.push_back(Complex(0.1 * n, -1.0 / (n + 3.0)));
  grid.u[4] = std::nullopt;
  const std::string csv = grid_csv(grid);
  CHECK(csv.rfind("x,y,t,re_u,im_u\n", 0) == 0);
  CHECK(csv.find("pole,pole") != std::string::npos);
  const KpGrid back = parse_grid_csv(csv);
  CHECK(back.spec.x.count == 3);
  CHECK(back.spec.y.count == 2);
  CHECK(back.spec.t.count == 2);
  CHECK(back.spec.x.step == doctest::Approx(0.25));
  CHECK(back.u == grid.u);
  CHECK(parse_grid_csv("x,y,t,re_u,im_u\n").u.empty());
  CHECK_THROWS_AS(parse_grid_csv("x,y,t,re_u,im_u\n0,0,0,1\n"), Error);
  CHECK_THROWS_AS(parse_grid_csv("a,b\n"), Error);
}
