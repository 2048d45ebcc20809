#pragma once

// Rectangular (x, y, t) grids of the KP field u and the finite-difference
// check of the KP equation 3 u_yy = (4 u_t - 6 u u_x - u_xxx)_x on them.
//
// The stencils are fourth-order accurate central differences: node spacing is
// the step, so a check is only as good as the grid it reads. With step h along
// a direction of length L the displacement on the torus is h L; callers pick
// h = 1e-2 / L to get unit-normalized steps.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thetalab/bilinear.hpp"

namespace thetalab {

struct GridAxis {
  double start = 0.0;
  double step = 0.0;
  int count = 0;
  double at(int i) const { return start + step * i; }
};

struct GridSpec {
  GridAxis x, y, t;
  std::size_t nodes() const {
    return static_cast<std::size_t>(x.count) * y.count * t.count;
  }
};

// Node values in x-fastest order; nullopt marks a pole.
struct KpGrid {
  GridSpec spec;
  std::vector<std::optional<Complex>> u;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * spec.y.count + j) * spec.x.count + i;
  }
  const std::optional<Complex>& at(int i, int j, int k) const {
    return u[index(i, j, k)];
  }
};

// Axes with counts (nx, ny, nt) and steps h / |U|, h / |V|, h / |T| (T the KP
// time direction); a zero direction gets step h.
GridSpec unit_step_grid(const DirectionJet& jet, int nx, int ny, int nt,
                        double h = 1e-2, double x0 = 0.0, double y0 = 0.0,
                        double t0 = 0.0);

KpGrid kp_field_grid(const GridSpec& spec, const AbelianPoint& z,
                     const RiemannMatrix& tau, const DirectionJet& jet,
                     unsigned threads = 0);

// Stencil reach: 3 nodes in x, 2 in y and t.
inline constexpr int kStencilReachX = 3;
inline constexpr int kStencilReachYT = 2;

// |3u_yy - 4u_xt + 6u_x^2 + 6u u_xx + u_xxxx| / (sum of the five |terms|) at
// node (i, j, k). Returns nullopt when the stencil touches a pole or leaves
// the grid.
std::optional<double> kp_stencil_residual(const KpGrid& grid, int i, int j,
                                          int k);

struct KpGridCheck {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // stencils touching a pole
  double max_residual = 0.0;
};

// Every node whose stencil fits inside the grid.
KpGridCheck kp_grid_check(const KpGrid& grid);

// CSV with header x,y,t,re_u,im_u, one row per node in x-fastest order; a
// pole row carries "pole" in both value columns.
std::string grid_csv(const KpGrid& grid);

// Inverse of grid_csv. Axes are recovered from the distinct coordinates;
// throws kParseError on malformed or non-rectangular input.
KpGrid parse_grid_csv(std::string_view csv);

}  // namespace thetalab
