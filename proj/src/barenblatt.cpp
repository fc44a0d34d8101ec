#include "bfm/barenblatt.hpp"

#include <cmath>
#include <stdexcept>

namespace bfm {

static void validate(const BarenblattSpec& s) {
  if (!(s.m > 1.0)) throw std::invalid_argument("barenblatt: m must be > 1");
  if (!(s.gamma > 0.0) || !(s.mass > 0.0))
    throw std::invalid_argument("barenblatt: gamma and mass must be positive");
}

double barenblatt_peak(const BarenblattSpec& s, double t) {
  validate(s);
  if (!(t > 0.0)) throw std::invalid_argument("barenblatt: t must be positive");
  return std::pow(s.mass / (4.0 * M_PI * s.m * t * s.gamma), 1.0 / s.m);
}

double barenblatt_peak_time(const BarenblattSpec& s, double h0) {
  validate(s);
  if (!(h0 > 0.0)) throw std::invalid_argument("barenblatt: h0 must be positive");
  return s.mass / (4.0 * M_PI * s.m * s.gamma * std::pow(h0, s.m));
}

double barenblatt_tc(const BarenblattSpec& s) {
  validate(s);
  return (s.m - 1.0) / (16.0 * s.m * s.m * s.gamma) *
         std::pow(M_PI * (s.m - 1.0) / (4.0 * s.m * s.mass), s.m - 1.0);
}

ScalarField barenblatt_density(const Grid& g, const BarenblattSpec& s, double t) {
  validate(s);
  if (!(t > 0.0)) throw std::invalid_argument("barenblatt_density: t must be positive");
  if (t >= barenblatt_tc(s))
    throw std::invalid_argument("barenblatt_density: support reaches the boundary at this t");
  const double A = std::pow(s.mass / (4.0 * M_PI * s.m * t * s.gamma), (s.m - 1.0) / s.m);
  const double B = (s.m - 1.0) / (4.0 * s.m * s.m * t * s.gamma);
  ScalarField rho(g, FieldRole::density);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      double X = g.x(ix), Y = g.y(iy);
      double val = A - B * (X * X + Y * Y);
      rho.v[g.idx(ix, iy)] = val > 0.0 ? std::pow(val, 1.0 / (s.m - 1.0)) : 0.0;
    }
  return rho;
}

double l1_error_trace(const std::vector<ScalarField>& rho, const BarenblattSpec& s, double tau,
                      double t0) {
  validate(s);
  if (!(tau > 0.0)) throw std::invalid_argument("l1_error_trace: tau must be positive");
  const int N = (int)std::floor(2.0 / tau + 1e-12);
  if ((int)rho.size() < N + 1)
    throw std::invalid_argument("l1_error_trace: need densities for steps 0.." +
                                std::to_string(N));
  double sum = 0.0;
  for (int k = 0; k <= N; ++k)
    sum += l1_diff(barenblatt_density(rho[k].grid, s, t0 + k * tau), rho[k]);
  return sum / N;
}

} // namespace bfm
