#pragma once
// Shared fixtures for the unit suites: seeded random fields (rough and
// band-limited smooth), O(n^2)-per-query brute-force c-transforms used as
// oracles for the fast envelope code, and small inner-product helpers.

#include <cmath>
#include <limits>
#include <random>

#include "bfm/grid.hpp"

namespace testutil {

inline bfm::ScalarField rough_field(const bfm::Grid& g, std::mt19937& rng, double lo, double hi,
                                    bfm::FieldRole role = bfm::FieldRole::dual_phi) {
  std::uniform_real_distribution<double> U(lo, hi);
  bfm::ScalarField f(g, role);
  for (double& x : f.v) x = U(rng);
  return f;
}

// Low-frequency cosine combination, zero-Neumann compatible, |f| <~ amp.
inline bfm::ScalarField smooth_field(const bfm::Grid& g, std::mt19937& rng, double amp, int kmax,
                                     bfm::FieldRole role = bfm::FieldRole::dual_phi) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  bfm::ScalarField f(g, role, 0.0);
  for (int k1 = 0; k1 <= kmax; ++k1)
    for (int k2 = 0; k2 <= kmax; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      double c = U(rng) * amp / (1.0 + k1 * k1 + k2 * k2);
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
          f.v[g.idx(ix, iy)] += c * std::cos(k1 * M_PI * (g.x(ix) + 0.5)) *
                                std::cos(k2 * M_PI * (g.y(iy) + 0.5));
    }
  return f;
}

inline double dot_l2(const bfm::ScalarField& a, const bfm::ScalarField& b) {
  double s = 0.0;
  for (int i = 0; i < a.grid.size(); ++i) s += a.v[i] * b.v[i];
  return s * a.grid.h * a.grid.h;
}

// min over all grid cells of phi(y) + |x-y|^2/(2 tau), O(n^2) per query.
inline bfm::ScalarField brute_backward(const bfm::ScalarField& phi, double tau) {
  const bfm::Grid& g = phi.grid;
  const double eta = g.h * g.h / (2.0 * tau);
  bfm::ScalarField out(g, bfm::FieldRole::dual_psi);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      double best = std::numeric_limits<double>::infinity();
      for (int jy = 0; jy < g.n; ++jy)
        for (int jx = 0; jx < g.n; ++jx) {
          double dx = ix - jx, dy = iy - jy;
          double c = phi(jx, jy) + (dx * dx + dy * dy) * eta;
          if (c < best) best = c;
        }
      out(ix, iy) = best;
    }
  return out;
}

// max over all grid cells of psi(x) - |x-y|^2/(2 tau).
inline bfm::ScalarField brute_forward(const bfm::ScalarField& psi, double tau) {
  const bfm::Grid& g = psi.grid;
  const double eta = g.h * g.h / (2.0 * tau);
  bfm::ScalarField out(g, bfm::FieldRole::dual_phi);
  for (int jy = 0; jy < g.n; ++jy)
    for (int jx = 0; jx < g.n; ++jx) {
      double best = -std::numeric_limits<double>::infinity();
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) {
          double dx = ix - jx, dy = iy - jy;
          double c = psi(ix, iy) - (dx * dx + dy * dy) * eta;
          if (c > best) best = c;
        }
      out(jx, jy) = best;
    }
  return out;
}

inline double max_abs_diff(const bfm::ScalarField& a, const bfm::ScalarField& b) {
  double m = 0.0;
  for (int i = 0; i < a.grid.size(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
  return m;
}

} // namespace testutil
