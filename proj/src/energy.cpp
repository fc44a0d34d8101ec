#include "bfm/energy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bfm {

static const double kInf = std::numeric_limits<double>::infinity();

EnergySpec make_energy(const Grid& g, double m, double gamma) {
  EnergySpec spec;
  spec.m = m;
  spec.gamma = gamma;
  spec.potential = ScalarField(g, FieldRole::potential, 0.0);
  spec.obstacle.assign(g.size(), 0);
  validate_energy(spec);
  return spec;
}

void validate_energy(const EnergySpec& spec) {
  if (!(spec.m >= 1.0)) throw std::invalid_argument("EnergySpec: m must be >= 1");
  if (!(spec.gamma > 0.0) || !std::isfinite(spec.gamma))
    throw std::invalid_argument("EnergySpec: gamma must be positive and finite");
  if ((int)spec.obstacle.size() != spec.potential.grid.size())
    throw std::invalid_argument("EnergySpec: obstacle mask size mismatch");
  for (int i = 0; i < spec.potential.grid.size(); ++i) {
    if (spec.obstacle[i]) continue;
    double V = spec.potential.v[i];
    if (!(V >= 0.0) || !std::isfinite(V))
      throw std::invalid_argument("EnergySpec: potential must be >= 0 and finite on free cells");
  }
}

bool is_incompressible(const EnergySpec& spec) { return std::isinf(spec.m); }

SplitShift zero_shift(const Grid& g) {
  return SplitShift{ScalarField(g, FieldRole::potential, 0.0), 0.0};
}

double u_value(double rho, const EnergySpec& spec) {
  if (rho < 0.0) return kInf;
  if (is_incompressible(spec)) return rho <= 1.0 + 1e-9 ? 0.0 : kInf;
  if (spec.m == 1.0) return rho == 0.0 ? 0.0 : spec.gamma * rho * std::log(rho);
  return spec.gamma * (std::pow(rho, spec.m) - rho) / (spec.m - 1.0);
}

double u_prime(double rho, const EnergySpec& spec) {
  if (is_incompressible(spec))
    throw std::domain_error("u_prime: undefined for the incompressible energy");
  if (spec.m == 1.0) return spec.gamma * (std::log(std::max(rho, 1e-12)) + 1.0);
  return spec.gamma * (spec.m * std::pow(rho, spec.m - 1.0) - 1.0) / (spec.m - 1.0);
}

double u_star(double p, const EnergySpec& spec) {
  if (is_incompressible(spec)) return p > 0.0 ? p : 0.0;
  const double m = spec.m, g = spec.gamma;
  if (m == 1.0) return g * std::exp(p / g - 1.0);
  double q = ((m - 1.0) * p + g) / m;
  if (q <= 0.0) return 0.0;
  return std::pow(g, -1.0 / (m - 1.0)) * std::pow(q, m / (m - 1.0));
}

double u_star_prime(double p, const EnergySpec& spec) {
  if (is_incompressible(spec)) return p > 0.0 ? 1.0 : 0.0;
  const double m = spec.m, g = spec.gamma;
  if (m == 1.0) return std::exp(p / g - 1.0);
  double q = ((m - 1.0) * p + g) / m;
  if (q <= 0.0) return 0.0;
  return std::pow(q / g, 1.0 / (m - 1.0));
}

double u_star_second(double p, const EnergySpec& spec) {
  if (is_incompressible(spec))
    throw std::domain_error("u_star_second: undefined for the incompressible energy");
  const double m = spec.m, g = spec.gamma;
  if (m == 1.0) return std::exp(p / g - 1.0) / g;
  double q = ((m - 1.0) * p + g) / m;
  if (q < 0.0) return 0.0;
  if (q == 0.0 && m > 2.0)
    throw std::domain_error("u_star_second: singular at the conjugate kink for m > 2");
  return std::pow(g, -1.0 / (m - 1.0)) / m * std::pow(q, (2.0 - m) / (m - 1.0));
}

ScalarField density_from_dual(const ScalarField& phi, const EnergySpec& spec,
                              const SplitShift& shift) {
  const Grid& g = phi.grid;
  if (g != spec.potential.grid || g != shift.field.grid)
    throw std::invalid_argument("density_from_dual: grid mismatch");
  ScalarField rho(g, FieldRole::density);
  for (int i = 0; i < g.size(); ++i) {
    if (spec.obstacle[i]) {
      rho.v[i] = 0.0;
      continue;
    }
    rho.v[i] = u_star_prime(phi.v[i] - spec.potential.v[i] - shift.field.v[i], spec);
  }
  return rho;
}

double U_star_value(const ScalarField& phi, const EnergySpec& spec, const SplitShift& shift) {
  const Grid& g = phi.grid;
  double s = 0.0, c = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    if (spec.obstacle[i]) continue;
    double y = u_star(phi.v[i] - spec.potential.v[i] - shift.field.v[i], spec) - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return g.h * g.h * s;
}

struct Moments {
  double m0 = 0.0;       // mass
  double m1x = 0.0, m1y = 0.0; // first moments
  double m2 = 0.0;       // second moment of |x|^2
};

static Moments compute_moments(const ScalarField& rho) {
  const Grid& g = rho.grid;
  Moments mo;
  double c0 = 0, cx = 0, cy = 0, c2 = 0;
  auto acc = [](double& s, double& c, double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  };
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      double r = rho.v[g.idx(ix, iy)];
      double X = g.x(ix), Y = g.y(iy);
      acc(mo.m0, c0, r);
      acc(mo.m1x, cx, r * X);
      acc(mo.m1y, cy, r * Y);
      acc(mo.m2, c2, r * (X * X + Y * Y));
    }
  double h2 = g.h * g.h;
  mo.m0 *= h2;
  mo.m1x *= h2;
  mo.m1y *= h2;
  mo.m2 *= h2;
  return mo;
}

double U_value(const ScalarField& rho, const EnergySpec& spec) {
  const Grid& g = rho.grid;
  if (g != spec.potential.grid) throw std::invalid_argument("U_value: grid mismatch");
  double s = 0.0, c = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    double r = rho.v[i];
    if (spec.obstacle[i]) {
      if (r > 0.0) return kInf;
      continue;
    }
    double val = u_value(r, spec);
    if (val == kInf) return kInf;
    double y = val + spec.potential.v[i] * r - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double total = g.h * g.h * s;
  if (spec.has_interaction) {
    Moments mo = compute_moments(rho);
    total += spec.interaction_weight * (mo.m0 * mo.m2 - mo.m1x * mo.m1x - mo.m1y * mo.m1y);
  }
  return total;
}

ScalarField interaction_first_variation(const ScalarField& rho, double weight) {
  const Grid& g = rho.grid;
  Moments mo = compute_moments(rho);
  ScalarField out(g, FieldRole::potential);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      double X = g.x(ix), Y = g.y(iy);
      out.v[g.idx(ix, iy)] =
          weight * ((X * X + Y * Y) * mo.m0 + mo.m2 - 2.0 * (X * mo.m1x + Y * mo.m1y));
    }
  return out;
}

SplitShift build_split_shift(const ScalarField& rho_n, const EnergySpec& spec) {
  if (!spec.has_interaction) return zero_shift(rho_n.grid);
  SplitShift s;
  s.field = interaction_first_variation(rho_n, spec.interaction_weight);
  // (deltaU0(rho), rho) = 2 U0(rho) for the quadratic kernel, so the
  // correction constant is U0(rho) itself.
  Moments mo = compute_moments(rho_n);
  s.constant =
      spec.interaction_weight * (mo.m0 * mo.m2 - mo.m1x * mo.m1x - mo.m1y * mo.m1y);
  return s;
}

ScalarField initial_dual(const ScalarField& rho0, const EnergySpec& spec) {
  const Grid& g = rho0.grid;
  if (g != spec.potential.grid) throw std::invalid_argument("initial_dual: grid mismatch");
  ScalarField phi(g, FieldRole::dual_phi, 0.0);
  if (is_incompressible(spec)) return phi;
  double free_max = -kInf;
  for (int i = 0; i < g.size(); ++i) {
    if (spec.obstacle[i]) continue;
    phi.v[i] = u_prime(rho0.v[i], spec) + spec.potential.v[i];
    free_max = std::max(free_max, phi.v[i]);
  }
  if (free_max == -kInf) throw std::invalid_argument("initial_dual: no free cells");
  for (int i = 0; i < g.size(); ++i)
    if (spec.obstacle[i]) phi.v[i] = free_max;
  return phi;
}

} // namespace bfm
