#pragma once

// Test-only reference computations. Deliberately naive: box-truncated lattice
// sums evaluated at the unreduced argument in long double, and central finite
// differences. Nothing here calls into the library's summation path.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "thetalab/types.hpp"

namespace oracle {

using thetalab::CMatrix;
using thetalab::CVector;
using thetalab::Complex;
using LComplex = std::complex<long double>;

// sum_{|n_i| <= box} prod_l (2 pi i (n+eps).h_l) exp(pi i (n+eps) tau (n+eps)
//   + 2 pi i (n+eps).(z+delta))
inline Complex theta_box(const CVector& z, const CMatrix& tau, int box,
                         const std::vector<CVector>& dirs = {},
                         const std::vector<double>& eps = {},
                         const std::vector<double>& delta = {}) {
  const int g = static_cast<int>(z.size());
  const long double pi = 3.141592653589793238462643383279502884L;
  const LComplex ii(0.0L, 1.0L);
  std::vector<int> n(g, -box);
  LComplex total(0.0L, 0.0L);
  while (true) {
    std::vector<long double> q(g);
    for (int i = 0; i < g; ++i)
      q[i] = n[i] + (eps.empty() ? 0.0L : static_cast<long double>(eps[i]));
    LComplex quad(0.0L, 0.0L), lin(0.0L, 0.0L);
    for (int i = 0; i < g; ++i) {
      for (int k = 0; k < g; ++k)
        quad += q[i] * LComplex(tau(i, k).real(), tau(i, k).imag()) * q[k];
      const long double d = delta.empty() ? 0.0L : delta[i];
      lin += q[i] * (LComplex(z[i].real(), z[i].imag()) + d);
    }
    LComplex term = std::exp(pi * ii * quad + 2.0L * pi * ii * lin);
    for (const auto& h : dirs) {
      LComplex dot(0.0L, 0.0L);
      for (int i = 0; i < g; ++i) dot += q[i] * LComplex(h[i].real(), h[i].imag());
      term *= 2.0L * pi * ii * dot;
    }
    total += term;
    int i = 0;
    while (i < g && n[i] == box) n[i++] = -box;
    if (i == g) break;
    ++n[i];
  }
  return {static_cast<double>(total.real()), static_cast<double>(total.imag())};
}

// Central difference of f along h at z with step s.
inline Complex central_difference(const std::function<Complex(const CVector&)>& f,
                                  const CVector& z, const CVector& h, double s) {
  return (f(z + s * h) - f(z - s * h)) / (2.0 * s);
}

inline double rel_err(Complex a, Complex b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace oracle
