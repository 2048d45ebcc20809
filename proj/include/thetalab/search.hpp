#pragma once

// Direction search: fits (U, V, W, d) to the Hirota equation, (U, V, a, c) to
// the one-point equation, and the hierarchy jet (zeta_2.., d_3..) to the
// truncated hierarchy.
//
// Method: multi-start Levenberg-Marquardt on the term-normalized residuals
// r_i / N_i with analytic Jacobians. Theta and its partials at the training
// points are cached as tensors, so every direction set is evaluated by
// contraction; only shifted points (z + a) are re-evaluated when a moves.
// Normalizers N_i are frozen inside each Jacobian evaluation. The parameters
// that enter linearly ((W, d) for Hirota, (V, c) for one-point) are solved by
// weighted least squares to initialize every restart.
//
// Restarts run in fixed batches; restart k draws from the stream
// (seed, k), so results do not depend on the thread count. The search stops
// after the first batch whose best holdout residual meets the tolerance.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thetalab/bilinear.hpp"
#include "thetalab/riemann_matrix.hpp"

namespace thetalab {

enum class SearchTarget { kHirota, kOnePoint, kHierarchy };

std::string to_string(SearchTarget t);

struct FreeMask {
  bool U = false;
  bool V = true;
  bool W = true;
  bool c = true;
  bool d = true;
  bool a = true;
};

struct SearchBudget {
  int restarts = 16;
  int iterations = 200;
};

struct SearchProblem {
  explicit SearchProblem(RiemannMatrix t) : tau(std::move(t)) {}

  RiemannMatrix tau;
  SearchTarget target = SearchTarget::kHirota;
  FreeMask free;
  // Fixed values and (for the hierarchy) the prior fit. A missing U means
  // the first unit vector.
  DirectionJet initial;
  std::optional<CVector> a_initial;
  int sample_count = 0;  // 0: 40 x (number of real free parameters)
  int holdout_count = 200;
  std::uint64_t seed = 0;
  SearchBudget budget;
  double tolerance = 1e-7;
  // With U free: false renormalizes U after every step, true leaves the
  // gauge open (a collapsing U then aborts the restart).
  bool free_gauge = false;
  unsigned threads = 0;
  int batch = 4;
  // Hierarchy: jet order K and the epsilon grid used for fitting.
  int jet_order = 3;
  std::vector<double> eps_grid{1e-3, 3.16227766016838e-3, 1e-2,
                               3.16227766016838e-2, 1e-1};
  // Hierarchy: the two epsilons of the reported scaling exponent.
  double eps_hi = 1e-2, eps_lo = 1e-3;
  bool record_trace = false;
};

struct TraceRow {
  int restart = 0;
  int iteration = 0;
  double objective = 0.0;
};

struct SearchResult {
  DirectionJet best_jet;
  std::optional<CVector> a;
  double best_residual = 1.0;  // max over the holdout set
  double train_objective = 0.0;
  std::vector<double> history;  // best training objective per restart
  std::vector<TraceRow> trace;
  bool converged = false;
  int restarts_run = 0;
  int gauge_degenerate_restarts = 0;
  int training_samples = 0;
  int real_parameters = 0;
  // Hierarchy only.
  std::optional<double> eps_exponent;
  std::vector<std::pair<double, double>> eps_residuals;
  std::vector<std::string> notes;
};

// Number of real free parameters of the problem.
int real_parameter_count(const SearchProblem& p);

// Throws kInvalidInput for malformed problems (e.g. too few samples).
void validate(const SearchProblem& p);

SearchResult fit(const SearchProblem& problem);

// K = problem.jet_order; fits zeta_2..zeta_K and d_3..d_(K+1) with
// zeta_1 = U and D2 along V from problem.initial. converged iff the fitted
// scaling exponent is at least K + 0.5.
SearchResult fit_hierarchy(const SearchProblem& problem);

// Max over the holdout set of the problem's residual for a given jet.
double holdout_residual(const SearchProblem& problem, const DirectionJet& jet,
                        const std::optional<CVector>& a);

// CSV lines "restart,iteration,objective" with header.
std::string trace_csv(const SearchResult& r);

}  // namespace thetalab
