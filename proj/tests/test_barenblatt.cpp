#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "bfm/barenblatt.hpp"
#include "bfm/grid.hpp"
#include "test_helpers.hpp"

using namespace bfm;

namespace {
// direct evaluation of the self-similar profile, kept independent of the
// library's internal factoring
double profile_at(const BarenblattSpec& s, double t, double x, double y) {
  double A = std::pow(s.mass / (4.0 * M_PI * s.m * t * s.gamma), (s.m - 1.0) / s.m);
  double B = (s.m - 1.0) / (4.0 * s.m * s.m * t * s.gamma);
  double val = A - B * (x * x + y * y);
  if (val <= 0.0) return 0.0;
  return std::pow(val, 1.0 / (s.m - 1.0));
}
} // namespace

TEST_CASE("density matches the closed form cell by cell") {
  std::mt19937 rng(61);
  for (double m : {2.0, 4.0, 6.0}) {
    BarenblattSpec s{m, 1e-3, 0.5};
    double t0 = barenblatt_peak_time(s, 15.0);
    Grid g(128);
    ScalarField rho = barenblatt_density(g, s, t0);
    std::uniform_int_distribution<int> pick(0, g.n - 1);
    for (int k = 0; k < 200; ++k) {
      int ix = pick(rng), iy = pick(rng);
      double want = profile_at(s, t0, g.x(ix), g.y(iy));
      CHECK(rho(ix, iy) == doctest::Approx(want).epsilon(1e-12));
    }
    // exact zero strictly outside the support radius
    double A = std::pow(s.mass / (4.0 * M_PI * s.m * t0 * s.gamma), (s.m - 1.0) / s.m);
    double B = (s.m - 1.0) / (4.0 * s.m * s.m * t0 * s.gamma);
    double r2 = A / B;
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        double d2 = g.x(ix) * g.x(ix) + g.y(iy) * g.y(iy);
        if (d2 > r2) CHECK(rho(ix, iy) == 0.0);
      }
  }
}

TEST_CASE("peak value and peak-time inversion") {
  BarenblattSpec s{2.0, 1e-3, 0.5};
  double t = 0.3;
  CHECK(barenblatt_peak(s, t) ==
        doctest::Approx(std::sqrt(s.mass / (8.0 * M_PI * t * s.gamma))).epsilon(1e-12));

  // peak(peak_time(h0)) == h0, and the m = 2 closed form t0 = M/(8 pi gamma h0^2)
  for (double h0 : {5.0, 15.0, 40.0}) {
    double t0 = barenblatt_peak_time(s, h0);
    CHECK(barenblatt_peak(s, t0) == doctest::Approx(h0).epsilon(1e-10));
    CHECK(t0 == doctest::Approx(s.mass / (8.0 * M_PI * s.gamma * h0 * h0)).epsilon(1e-12));
  }
  CHECK(barenblatt_peak_time(s, 15.0) ==
        doctest::Approx(0.5 / (8.0 * M_PI * 1e-3 * 225.0)).epsilon(1e-12));

  // peak decays in time, start time decreases as the requested height grows
  CHECK(barenblatt_peak(s, 0.2) > barenblatt_peak(s, 0.4));
  CHECK(barenblatt_peak_time(s, 30.0) < barenblatt_peak_time(s, 15.0));
}

TEST_CASE("mass is preserved on a fine grid") {
  for (double m : {2.0, 4.0}) {
    BarenblattSpec s{m, 1e-3, 0.5};
    double t0 = barenblatt_peak_time(s, 15.0);
    Grid g(512);
    // mid-horizon profile is well resolved; midpoint quadrature of the
    // compact profile converges fast enough for a 1e-3 check here
    CHECK(integrate(barenblatt_density(g, s, t0 + 1.0)) == doctest::Approx(s.mass).epsilon(1e-3));
  }
}

TEST_CASE("boundary-contact time and validity window") {
  BarenblattSpec s{2.0, 1e-3, 0.5};
  double tc = barenblatt_tc(s);
  double want = (s.m - 1.0) / (16.0 * s.m * s.m * s.gamma) *
                std::pow(M_PI * (s.m - 1.0) / (4.0 * s.m * s.mass), s.m - 1.0);
  CHECK(tc == doctest::Approx(want).epsilon(1e-12));
  CHECK(tc == doctest::Approx(12.271846303085129).epsilon(1e-10));

  // the benchmark window [t0, t0 + 2] must fit inside (0, tc) for every m used
  for (double m : {2.0, 4.0, 6.0}) {
    BarenblattSpec sm{m, 1e-3, 0.5};
    double t0 = barenblatt_peak_time(sm, 15.0);
    CHECK(t0 > 0.0);
    CHECK(t0 + 2.0 < barenblatt_tc(sm));
  }

  Grid g(32);
  CHECK_THROWS_AS(barenblatt_density(g, s, 0.0), std::domain_error);
  CHECK_THROWS_AS(barenblatt_density(g, s, -1.0), std::domain_error);
  CHECK_THROWS_AS(barenblatt_density(g, s, tc), std::domain_error);
  BarenblattSpec bad{1.0, 1e-3, 0.5};
  CHECK_THROWS_AS(barenblatt_density(g, bad, 0.1), std::domain_error);
  CHECK_THROWS_AS(barenblatt_peak(bad, 0.1), std::domain_error);
}

TEST_CASE("l1_error_trace: exact trace scores zero, perturbations obey the triangle bound") {
  BarenblattSpec s{2.0, 1e-3, 0.5};
  double t0 = barenblatt_peak_time(s, 15.0);
  double tau = 0.5;
  int N = static_cast<int>(std::floor(2.0 / tau + 1e-12));
  Grid g(64);

  std::vector<ScalarField> exact;
  for (int k = 0; k <= N; ++k) exact.push_back(barenblatt_density(g, s, t0 + k * tau));
  CHECK(l1_error_trace(exact, s, tau, t0) <= 1e-12);

  // perturbed trace: error equals the mean L1 distance of the perturbations
  std::mt19937 rng(62);
  std::vector<ScalarField> noisy = exact;
  double mean_l1 = 0.0;
  for (int k = 0; k <= N; ++k) {
    ScalarField bump = testutil::smooth_field(g, rng, 0.05, 2, FieldRole::density);
    for (int i = 0; i < g.size(); ++i) noisy[k].v[i] += bump.v[i];
    mean_l1 += l1_diff(noisy[k], exact[k]);
  }
  mean_l1 /= N;
  double err = l1_error_trace(noisy, s, tau, t0);
  CHECK(err == doctest::Approx(mean_l1).epsilon(1e-10));
  CHECK(err >= 0.0);

  std::vector<ScalarField> short_trace(exact.begin(), exact.end() - 1);
  CHECK_THROWS_AS(l1_error_trace(short_trace, s, tau, t0), std::invalid_argument);
}
