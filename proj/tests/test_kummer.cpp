#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "thetalab/error.hpp"
#include "thetalab/kummer.hpp"
#include "thetalab/random.hpp"

using namespace thetalab;

namespace {

RiemannMatrix tau_i() {
  CMatrix t(1, 1);
  t(0, 0) = kI;
  return RiemannMatrix(t);
}

CVector random_point(const RiemannMatrix& tau, Rng& rng, double w = 0.5) {
  const int g = tau.genus();
  RVector a(g), b(g);
  for (int i = 0; i < g; ++i) a[i] = rng.uniform(-w, w);
  for (int i = 0; i < g; ++i) b[i] = rng.uniform(-w, w);
  return a.cast<Complex>() + tau.tau() * b.cast<Complex>();
}

CVector materialized(const KummerPoint& k) {
  return k.coords * std::exp(k.scale_exponent);
}

// Lattice distance between two points after reduction.
double torus_distance(const CVector& x, const CVector& y,
                      const RiemannMatrix& tau) {
  auto [a, b] = lattice_coordinates(CVector(x - y), tau);
  for (int i = 0; i < a.size(); ++i) {
    a[i] -= std::round(a[i]);
    b[i] -= std::round(b[i]);
  }
  return (a.cast<Complex>() + tau.tau() * b.cast<Complex>()).norm();
}

}  // namespace

TEST_CASE("kummer coordinates match shifted lattice sums") {
  const RiemannMatrix tau = tau_i();
  const KummerPoint k = kummer_map(CVector(CVector::Zero(1)), tau);
  REQUIRE(k.coords.size() == 2);
  const CMatrix tau2 = 2.0 * tau.tau();
  const CVector z2 = CVector::Zero(1);
  const Complex k0 = oracle::theta_box(z2, tau2, 100, {}, {0.0});
  const Complex k1 = oracle::theta_box(z2, tau2, 100, {}, {0.5});
  const CVector got = materialized(k);
  CHECK(oracle::rel_err(got[0], k0) < 1e-12);
  CHECK(oracle::rel_err(got[1], k1) < 1e-12);

  Rng rng(5);
  const RiemannMatrix t2 = RiemannMatrix::random(2, 21);
  for (int i = 0; i < 5; ++i) {
    const CVector z = random_point(t2, rng);
    const CVector got2 = materialized(kummer_map(z, t2));
    for (unsigned s = 0; s < 4; ++s) {
      const std::vector<double> eps{(s & 2u) ? 0.5 : 0.0, (s & 1u) ? 0.5 : 0.0};
      const Complex want =
          oracle::theta_box(CVector(2.0 * z), CMatrix(2.0 * t2.tau()), 12, {}, eps);
      CHECK(oracle::rel_err(got2[s], want) < 1e-11);
    }
  }
}

TEST_CASE("addition formula theta(z+b) theta(z-b) = sum K_s(z) K_s(b)") {
  Rng rng(9);
  for (int g = 1; g <= 3; ++g) {
    const RiemannMatrix tau = RiemannMatrix::random(g, 30 + g);
    for (int i = 0; i < 5; ++i) {
      const CVector z = random_point(tau, rng, 0.3);
      const CVector b = random_point(tau, rng, 0.3);
      const Complex lhs = oracle::theta_box(CVector(z + b), tau.tau(), 10) *
                          oracle::theta_box(CVector(z - b), tau.tau(), 10);
      const Complex rhs =
          materialized(kummer_map(z, tau)).cwiseProduct(materialized(kummer_map(b, tau))).sum();
      CHECK(oracle::rel_err(lhs, rhs) < 1e-11);
    }
  }
}

TEST_CASE("kummer map is even and projectively periodic") {
  Rng rng(13);
  for (int g = 1; g <= 2; ++g) {
    const RiemannMatrix tau = RiemannMatrix::random(g, 40 + g);
    for (int i = 0; i < 50; ++i) {
      const CVector z = random_point(tau, rng);
      const KummerPoint kp = kummer_map(z, tau);
      const KummerPoint km = kummer_map(CVector(-z), tau);
      CHECK(projective_distance(kp.coords, km.coords) < 1e-12);

      IVector m(g), n(g);
      for (int j = 0; j < g; ++j) {
        m[j] = static_cast<int>(rng.uniform(-2.0, 3.0));
        n[j] = static_cast<int>(rng.uniform(-2.0, 3.0));
      }
      const CVector shifted = z + tau.tau() * m.cast<Complex>() + n.cast<Complex>();
      const KummerPoint ks = kummer_map(shifted, tau);
      CHECK(projective_distance(kp.coords, ks.coords) < 1e-12);
    }
  }
}

TEST_CASE("kummer derivatives follow the factor-2 chain rule") {
  Rng rng(17);
  const RiemannMatrix tau = RiemannMatrix::random(2, 50);
  for (int i = 0; i < 5; ++i) {
    const CVector z = random_point(tau, rng, 0.3);
    const CVector h = rng.unit_complex(2);
    const std::vector<DerivativeRequest> req{{h}};
    const KummerPoint k = kummer_map(z, tau, req);
    const double s = 1e-5;
    const CVector fd = (materialized(kummer_map(CVector(z + s * h), tau)) -
                        materialized(kummer_map(CVector(z - s * h), tau))) /
                       (2 * s);
    const CVector an = k.derivs[0] * std::exp(k.scale_exponent);
    CHECK((fd - an).norm() / an.norm() < 1e-7);
  }
}

TEST_CASE("flex jet rows match finite differences of the germ") {
  Rng rng(19);
  const RiemannMatrix tau = RiemannMatrix::random(2, 60);
  const CVector b = random_point(tau, rng, 0.3);
  const CVector U = rng.unit_complex(2), V = rng.complex_box(2, 0.5),
                W = rng.complex_box(2, 0.5);
  const CMatrix rows = flex_jet_rows(b, U, V, tau, FlexOrder::kThird, W);
  const double scale = std::exp(kummer_map(b, tau).scale_exponent);
  auto F = [&](double e) {
    const CVector p = b + 2.0 * e * U + 2.0 * e * e * V + 2.0 * e * e * e * W;
    return materialized(kummer_map(p, tau));
  };
  const double e0 = 1e-5, e1 = 1e-4, e3 = 5e-4;
  const CVector f1 = (F(e0) - F(-e0)) / (2 * e0);
  const CVector f2 = (F(e1) - 2.0 * F(0) + F(-e1)) / (e1 * e1);
  const CVector f3 =
      (F(2 * e3) - 2.0 * F(e3) + 2.0 * F(-e3) - F(-2 * e3)) / (2 * e3 * e3 * e3);
  auto rel = [](const CVector& x, const CVector& y) {
    return (x - y).norm() / y.norm();
  };
  CHECK(rel(f1, CVector(rows.row(1).transpose() * scale)) < 1e-7);
  CHECK(rel(f2, CVector(rows.row(2).transpose() * scale)) < 1e-5);
  CHECK(rel(f3, CVector(rows.row(3).transpose() * scale)) < 1e-4);
}

TEST_CASE("flex test: ambient g = 1 and generic g = 2") {
  Rng rng(23);
  const RiemannMatrix t1 = tau_i();
  for (int i = 0; i < 10; ++i) {
    const FlexReport r = flex_test(random_point(t1, rng), rng.unit_complex(1),
                                   rng.complex_box(1, 1.0), t1, FlexOrder::kSecond);
    CHECK(r.pass);
    CHECK(!r.notes.empty());
  }
  const RiemannMatrix t2 = RiemannMatrix::random(2, 70);
  const FlexReport r = flex_test(random_point(t2, rng), rng.unit_complex(2),
                                 rng.complex_box(2, 1.0), t2, FlexOrder::kSecond);
  CHECK(r.sigma_ratios[1] >= 1e-2);
  CHECK(!r.pass);
  CHECK_THROWS_AS(flex_test(CVector(CVector::Zero(2)), CVector(CVector::Zero(2)),
                            CVector(CVector::Zero(2)), t2, FlexOrder::kSecond),
                  Error);
}

TEST_CASE("flex verdict is projectively stable") {
  Rng rng(29);
  const RiemannMatrix tau = RiemannMatrix::random(2, 80);
  for (int i = 0; i < 10; ++i) {
    const CMatrix rows =
        flex_jet_rows(random_point(tau, rng), rng.unit_complex(2),
                      rng.complex_box(2, 1.0), tau, FlexOrder::kSecond);
    const auto s0 = jet_singular_values(rows);
    const Complex lambda = std::polar(std::exp(rng.uniform(-5.0, 5.0)),
                                      rng.uniform(0.0, 2 * kPi));
    const auto s1 = jet_singular_values(CMatrix(lambda * rows));
    for (std::size_t k = 1; k < s0.size(); ++k)
      CHECK(std::abs(s0[k] / s0[0] - s1[k] / s1[0]) < 1e-12);
  }
}

TEST_CASE("half points") {
  const RiemannMatrix t1 = tau_i();
  const auto torsion = half_points(CVector(CVector::Zero(1)), t1);
  REQUIRE(torsion.size() == 4);
  const Complex expected[4] = {0.0, Complex(0, 0.5), 0.5, Complex(0.5, 0.5)};
  for (int i = 0; i < 4; ++i) {
    CVector e(1);
    e[0] = expected[i];
    CHECK(torus_distance(torsion[i].z, e, t1) < 1e-14);
    CHECK(torsion[i].reduced);
  }

  Rng rng(31);
  const RiemannMatrix t2 = RiemannMatrix::random(2, 90);
  const CVector a = random_point(t2, rng);
  const auto halves = half_points(a, t2);
  REQUIRE(halves.size() == 16);
  for (std::size_t i = 0; i < halves.size(); ++i) {
    CHECK(torus_distance(CVector(2.0 * halves[i].z), a, t2) < 1e-12);
    for (std::size_t j = 0; j < i; ++j)
      CHECK(torus_distance(halves[i].z, halves[j].z, t2) > 1e-3);
  }
}

TEST_CASE("decomposability indicator") {
  CMatrix prod = CMatrix::Zero(2, 2);
  prod(0, 0) = kI;
  prod(1, 1) = 2.0 * kI;
  CHECK(decomposability_indicator(RiemannMatrix(prod)) <= 1e-10);

  const RiemannMatrix generic = RiemannMatrix::random(2, 2);
  const double ind = decomposability_indicator(generic);
  CHECK(ind >= 1e-2);
  CHECK(std::abs(decomposability_indicator(generic, 2 * kDefaultTargetAbsErr) -
                 ind) < 1e-8);
  CHECK(decomposability(generic).characteristics.size() == 10);

  CHECK_THROWS_AS(decomposability_indicator(RiemannMatrix::random(3, 1)), Error);
}

TEST_CASE("one-point data recovered from an exact flex relation") {
  // Any (b, U) with V_flex chosen so that (D_U^2 + D_Vflex) K lies in the span
  // of K and D_U K: the converse map must reproduce V and c exactly. Build it
  // in g = 1, where every jet is degenerate, and check the fit is exact.
  const RiemannMatrix tau = tau_i();
  Rng rng(37);
  const CVector b = random_point(tau, rng, 0.3);
  const CVector U = rng.unit_complex(1);
  const CVector Vf = rng.complex_box(1, 1.0);
  const OnePointFromFlex r = one_point_from_flex(b, U, Vf, tau);
  CHECK(r.fit_residual < 1e-12);
  CHECK((r.a - 2.0 * b).norm() < 1e-15);
}
