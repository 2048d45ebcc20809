#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "thetalab/bilinear.hpp"
#include "thetalab/divisor.hpp"
#include "thetalab/json_io.hpp"
#include "thetalab/kp_grid.hpp"
#include "thetalab/kummer.hpp"
#include "thetalab/search.hpp"
#include "thetalab/theta.hpp"

namespace py = pybind11;
using namespace thetalab;
using io::Json;

namespace {

// Reports cross the boundary in their JSON encoding, as plain dicts.
py::object to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json from_py(const py::object& o) {
  return Json::parse(
      py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

SearchTarget parse_target(const std::string& s) {
  if (s == "hirota") return SearchTarget::kHirota;
  if (s == "one_point") return SearchTarget::kOnePoint;
  if (s == "hierarchy") return SearchTarget::kHierarchy;
  throw Error(ErrorCode::kInvalidInput, "unknown target '" + s + "'");
}

WeilRelation parse_relation(const std::string& s) {
  if (s == "weil") return WeilRelation::kWeil;
  if (s == "weil1") return WeilRelation::kWeil1;
  if (s == "weil2") return WeilRelation::kWeil2;
  throw Error(ErrorCode::kInvalidInput, "unknown relation '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Riemann theta functions and numerical tests of the Jacobian conditions";

  // Kept alive for the life of the process; the module holds it as well.
  static PyObject* error =
      py::exception<Error>(m, "ThetaLabError", PyExc_RuntimeError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // args = (code, message)
      PyErr_SetObject(error,
                      py::make_tuple(std::string(to_string(e.code())), e.what()).ptr());
    }
  });

  py::class_<RiemannMatrix>(m, "RiemannMatrix")
      .def(py::init<const CMatrix&>(), py::arg("tau"))
      .def_static("random", &RiemannMatrix::random, py::arg("g"), py::arg("seed"))
      .def_property_readonly("genus", &RiemannMatrix::genus)
      .def_property_readonly("tau", [](const RiemannMatrix& t) { return CMatrix(t.tau()); })
      .def("__repr__", [](const RiemannMatrix& t) {
        return "RiemannMatrix(g=" + std::to_string(t.genus()) + ")";
      });

  py::class_<DirectionJet>(m, "DirectionJet")
      .def(py::init<>())
      .def_readwrite("U", &DirectionJet::U)
      .def_readwrite("V", &DirectionJet::V)
      .def_readwrite("W", &DirectionJet::W)
      .def_readwrite("c", &DirectionJet::c)
      .def_readwrite("d", &DirectionJet::d)
      .def_readwrite("A", &DirectionJet::A)
      .def_readwrite("B", &DirectionJet::B)
      .def_readwrite("zeta", &DirectionJet::zeta)
      .def_readwrite("dcoef", &DirectionJet::dcoef)
      .def("gauge_normalized", &DirectionJet::gauge_normalized)
      .def("gauge_scaled", &DirectionJet::gauge_scaled, py::arg("lam"))
      .def("to_dict", [](const DirectionJet& j) { return to_py(io::jet_to_json(j)); })
      .def_static("from_dict",
                  [](const py::object& o) { return io::jet_from_json(from_py(o)); });

  m.def(
      "theta",
      [](const CVector& z, const RiemannMatrix& tau,
         const std::vector<std::vector<CVector>>& requests) {
        const ThetaJet j = theta_eval(z, tau, requests);
        std::vector<Complex> derivs;
        for (const Complex& d : j.derivs) derivs.push_back(materialize(d, j.scale_exponent));
        py::dict out;
        out["value"] = materialize(j.value, j.scale_exponent);
        out["derivs"] = derivs;
        out["scaled_value"] = j.value;
        out["scale_exponent"] = j.scale_exponent;
        out["error_bound"] = j.error_bound;
        return out;
      },
      py::arg("z"), py::arg("tau"), py::arg("requests") = std::vector<std::vector<CVector>>{},
      "Theta and directional derivatives at z; `requests` lists direction tuples.");

  m.def("hirota_residual",
        [](const CVector& z, const RiemannMatrix& tau, const DirectionJet& jet) {
          return hirota_residual(z, tau, jet);
        },
        py::arg("z"), py::arg("tau"), py::arg("jet"));
  m.def("p_residual",
        [](const CVector& z, const RiemannMatrix& tau, const DirectionJet& jet,
           const CVector& a) { return p_residual(z, tau, jet, a); },
        py::arg("z"), py::arg("tau"), py::arg("jet"), py::arg("a"));
  m.def("p_ab_residual",
        [](const CVector& z, const RiemannMatrix& tau, const DirectionJet& jet,
           const CVector& a) { return p_ab_residual(z, tau, jet, a); },
        py::arg("z"), py::arg("tau"), py::arg("jet"), py::arg("a"));
  m.def("longeq_residual",
        [](const CVector& z, const RiemannMatrix& tau, const DirectionJet& jet) {
          return longeq_residual(z, tau, jet);
        },
        py::arg("z"), py::arg("tau"), py::arg("jet"));
  m.def("hierarchy_residual",
        [](const CVector& z, const RiemannMatrix& tau, const DirectionJet& jet,
           Complex eps) { return hierarchy_residual(z, tau, jet, eps); },
        py::arg("z"), py::arg("tau"), py::arg("jet"), py::arg("eps"));
  m.def("kp_field_u",
        [](double x, double y, double t, const CVector& z, const RiemannMatrix& tau,
           const DirectionJet& jet) { return kp_field_u(x, y, t, z, tau, jet); },
        py::arg("x"), py::arg("y"), py::arg("t"), py::arg("z"), py::arg("tau"),
        py::arg("jet"));

  m.def(
      "search",
      [](const RiemannMatrix& tau, const std::string& target,
         const std::optional<DirectionJet>& initial, const std::optional<CVector>& a,
         std::uint64_t seed, double tolerance, int restarts, int iterations,
         bool free_U, bool free_gauge, int jet_order, unsigned threads) {
        SearchProblem p(tau);
        p.target = parse_target(target);
        if (initial) p.initial = *initial;
        p.a_initial = a;
        p.seed = seed;
        p.tolerance = tolerance;
        p.budget = {restarts, iterations};
        p.free.U = free_U;
        p.free_gauge = free_gauge;
        p.jet_order = jet_order;
        p.threads = threads;
        SearchResult r;
        {
          py::gil_scoped_release release;
          r = fit(p);
        }
        return to_py(io::search_to_json(r));
      },
      py::arg("tau"), py::arg("target") = "hirota", py::arg("initial") = std::nullopt,
      py::arg("a") = std::nullopt, py::arg("seed") = 0, py::arg("tolerance") = 1e-7,
      py::arg("restarts") = 16, py::arg("iterations") = 200, py::arg("free_U") = false,
      py::arg("free_gauge") = false, py::arg("jet_order") = 3, py::arg("threads") = 0,
      "Multi-start fit; returns the search result as a dict.");

  m.def(
      "flex_test",
      [](const CVector& a, const CVector& U, const CVector& V, const RiemannMatrix& tau,
         int order, double tolerance) {
        if (order != 2 && order != 3)
          throw Error(ErrorCode::kInvalidInput, "order must be 2 or 3");
        return to_py(io::flex_to_json(flex_test_halves(
            a, U, V, tau, order == 2 ? FlexOrder::kSecond : FlexOrder::kThird,
            std::nullopt, tolerance)));
      },
      py::arg("a"), py::arg("U"), py::arg("V"), py::arg("tau"), py::arg("order") = 2,
      py::arg("tolerance") = 1e-6, "Flex test at every half of a.");
  m.def("flex_direction_from_one_point", &flex_direction_from_one_point, py::arg("V"));

  m.def(
      "decomposability",
      [](const RiemannMatrix& tau) {
        return to_py(io::decomposability_to_json(decomposability(tau)));
      },
      py::arg("tau"));

  m.def(
      "sample_theta_divisor",
      [](const RiemannMatrix& tau, int count, int starts, std::uint64_t seed) {
        SamplePlan plan;
        plan.count = count;
        plan.starts = starts;
        plan.seed = seed;
        return to_py(io::points_to_json(sample_theta_divisor(tau, plan)));
      },
      py::arg("tau"), py::arg("count") = 50, py::arg("starts") = 200, py::arg("seed") = 0);

  m.def(
      "weil",
      [](const RiemannMatrix& tau, const DirectionJet& jet, const std::string& which,
         const std::optional<CVector>& a, int starts, std::uint64_t seed,
         double tolerance) {
        const WeilRelation rel = parse_relation(which);
        SamplePlan plan;
        plan.count = 1;
        plan.starts = starts;
        plan.seed = seed;
        if (rel == WeilRelation::kWeil1 && !a)
          throw Error(ErrorCode::kInvalidInput, "weil1 needs a");
        const DivisorSample s = rel == WeilRelation::kWeil1
                                    ? sample_theta_cap_theta_a(tau, *a, plan)
                                    : sample_D1_theta(tau, jet, plan);
        return to_py(io::report_to_json(
            weil_check(s.raw_points, tau, jet, a, rel, tolerance)));
      },
      py::arg("tau"), py::arg("jet"), py::arg("which") = "weil", py::arg("a") = std::nullopt,
      py::arg("starts") = 200, py::arg("seed") = 0, py::arg("tolerance") = 1e-6,
      "Weil-type check on sampled divisor points.");

  m.def(
      "kp_grid",
      [](const RiemannMatrix& tau, const DirectionJet& jet, int nx, int ny, int nt,
         double h, const std::optional<CVector>& z) {
        const KpGrid grid = kp_field_grid(unit_step_grid(jet, nx, ny, nt, h),
                                          z.value_or(CVector::Zero(tau.genus())), tau, jet);
        const KpGridCheck chk = kp_grid_check(grid);
        py::dict out;
        out["csv"] = grid_csv(grid);
        out["checked"] = chk.checked;
        out["max_residual"] = chk.max_residual;
        return out;
      },
      py::arg("tau"), py::arg("jet"), py::arg("nx") = 25, py::arg("ny") = 21,
      py::arg("nt") = 9, py::arg("h") = 1e-2, py::arg("z") = std::nullopt,
      "Grid of u as CSV together with its KP stencil check.");
}
