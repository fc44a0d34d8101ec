#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "bfm/grid.hpp"
#include "test_helpers.hpp"

using namespace bfm;

TEST_CASE("grid geometry: cell centers, indexing, equality") {
  Grid g(8);
  CHECK(g.h == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(g.size() == 64);
  CHECK(g.x(0) == doctest::Approx(-0.4375).epsilon(1e-15));
  CHECK(g.x(7) == doctest::Approx(0.4375).epsilon(1e-15));
  for (int i = 0; i < 8; ++i) {
    CHECK(g.x(i) == doctest::Approx(-g.x(7 - i)).epsilon(1e-14));
    CHECK(g.y(i) == doctest::Approx(g.x(i)).epsilon(1e-15));
  }
  CHECK(g.idx(3, 5) == 5 * 8 + 3);
  CHECK(Grid(8) == Grid(8));
  CHECK(Grid(8) != Grid(16));
  CHECK_THROWS_AS(Grid(1), std::invalid_argument);
}

TEST_CASE("field storage round trip through operator()") {
  Grid g(8);
  ScalarField f(g, FieldRole::density, 0.0);
  f(3, 5) = 2.5;
  CHECK(f.v[g.idx(3, 5)] == 2.5);
  CHECK(f(3, 5) == 2.5);
}

TEST_CASE("integrate: linear, exact on constants, Kahan-stable at 256^2") {
  std::mt19937 rng(42);
  Grid g(64);
  ScalarField f = testutil::rough_field(g, rng, -3.0, 3.0);
  ScalarField w = testutil::rough_field(g, rng, -1.0, 5.0);
  const double a = 1.7, b = -2.3;
  ScalarField combo(g, FieldRole::density);
  for (int i = 0; i < g.size(); ++i) combo.v[i] = a * f.v[i] + b * w.v[i];
  CHECK(integrate(combo) ==
        doctest::Approx(a * integrate(f) + b * integrate(w)).epsilon(1e-13));

  ScalarField c(g, FieldRole::density, 0.731);
  CHECK(integrate(c) == doctest::Approx(0.731).epsilon(1e-14));

  Grid big(256);
  ScalarField ones(big, FieldRole::density, 1.0);
  CHECK(integrate(ones) == doctest::Approx(1.0).epsilon(1e-14));

  // compensated sum tracks a long-double reference on noisy data
  ScalarField noisy = testutil::rough_field(big, rng, -1.0, 1.0);
  long double ref = 0.0L;
  for (double x : noisy.v) ref += (long double)x;
  ref *= (long double)(big.h * big.h);
  CHECK(integrate(noisy) == doctest::Approx((double)ref).epsilon(1e-12));
}

TEST_CASE("gradient: zero on constants, exact on affine fields everywhere") {
  Grid g(16);
  ScalarField c(g, FieldRole::potential, 4.2);
  auto [cx, cy] = gradient(c);
  CHECK(max_abs(cx) == 0.0);
  CHECK(max_abs(cy) == 0.0);

  const double b1 = 1.3, b2 = -0.7;
  ScalarField affine(g, FieldRole::potential);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) affine(ix, iy) = 0.5 + b1 * g.x(ix) + b2 * g.y(iy);
  auto [ax, ay] = gradient(affine);
  for (int i = 0; i < g.size(); ++i) {
    CHECK(ax.v[i] == doctest::Approx(b1).epsilon(1e-12));
    CHECK(ay.v[i] == doctest::Approx(b2).epsilon(1e-12));
  }
}

TEST_CASE("hessian: zero on affine, exact on quadratics, symmetric cross term") {
  Grid g(16);
  ScalarField affine(g, FieldRole::potential);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) affine(ix, iy) = 1.0 - 2.0 * g.x(ix) + 0.3 * g.y(iy);
  HessianField Ha = hessian(affine);
  CHECK(max_abs(Ha.fxx) < 1e-11);
  CHECK(max_abs(Ha.fxy) < 1e-11);
  CHECK(max_abs(Ha.fyy) < 1e-11);

  const double a = 0.8, b = -1.1, c = 2.4;
  ScalarField quad(g, FieldRole::potential);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      double X = g.x(ix), Y = g.y(iy);
      quad(ix, iy) = a * X * X + b * X * Y + c * Y * Y + 0.2 * X - Y;
    }
  HessianField Hq = hessian(quad);
  for (int i = 0; i < g.size(); ++i) {
    CHECK(Hq.fxx.v[i] == doctest::Approx(2 * a).epsilon(1e-10));
    CHECK(Hq.fxy.v[i] == doctest::Approx(b).epsilon(1e-10));
    CHECK(Hq.fyy.v[i] == doctest::Approx(2 * c).epsilon(1e-10));
  }

  std::mt19937 rng(7);
  ScalarField noisy = testutil::rough_field(g, rng, -1.0, 1.0);
  HessianField Hn = hessian(noisy);
  // the cross derivative is built from commuting 1-D operators
  ScalarField hyx = gradient(gradient(noisy).second).first;
  CHECK(testutil::max_abs_diff(Hn.fxy, hyx) == 0.0);
}

TEST_CASE("sample_bilinear: exact at centers, averages midpoints, clamps outside") {
  Grid g(16);
  std::mt19937 rng(11);
  ScalarField f = testutil::rough_field(g, rng, -2.0, 2.0);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      CHECK(sample_bilinear(f, g.x(ix), g.y(iy)) == f(ix, iy));

  double mid = sample_bilinear(f, 0.5 * (g.x(3) + g.x(4)), g.y(5));
  CHECK(mid == doctest::Approx(0.5 * (f(3, 5) + f(4, 5))).epsilon(1e-14));

  CHECK(sample_bilinear(f, -10.0, -10.0) == f(0, 0));
  CHECK(sample_bilinear(f, 10.0, g.y(9)) == f(g.n - 1, 9));
}

TEST_CASE("check_finite names the offending cell") {
  Grid g(8);
  ScalarField f(g, FieldRole::density, 1.0);
  CHECK_NOTHROW(check_finite(f, "ctx"));
  f(2, 6) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(check_finite(f, "ctx"), doctest::Contains("ctx"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(check_finite(f, "ctx"), doctest::Contains("(2,6)"), std::invalid_argument);
  f(2, 6) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(check_finite(f, "ctx"), std::invalid_argument);
}

TEST_CASE("norms agree with direct reductions") {
  Grid g(8);
  std::mt19937 rng(3);
  ScalarField a = testutil::rough_field(g, rng, -2.0, 2.0);
  ScalarField b = testutil::rough_field(g, rng, -2.0, 2.0);
  double l1 = 0.0, l1d = 0.0, ma = 0.0, mv = -1e300;
  for (int i = 0; i < g.size(); ++i) {
    l1 += std::fabs(a.v[i]);
    l1d += std::fabs(a.v[i] - b.v[i]);
    ma = std::max(ma, std::fabs(a.v[i]));
    mv = std::max(mv, a.v[i]);
  }
  CHECK(l1_norm(a) == doctest::Approx(l1 * g.h * g.h).epsilon(1e-13));
  CHECK(l1_diff(a, b) == doctest::Approx(l1d * g.h * g.h).epsilon(1e-13));
  CHECK(max_abs(a) == ma);
  CHECK(max_value(a) == mv);
}
