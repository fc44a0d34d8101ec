#include "bfm/step_bounds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bfm/c_transform.hpp"

namespace bfm {

static const double kInf = std::numeric_limits<double>::infinity();

double estimate_lambda(const ScalarField& dual, double tau, bool minus_sign) {
  HessianField H = hessian(dual);
  const int sz = dual.grid.size();
  const double sgn = minus_sign ? -1.0 : 1.0;
  double lam = 0.0;
  for (int i = 0; i < sz; ++i) {
    double a = 1.0 + sgn * tau * H.fxx.v[i];
    double c = 1.0 + sgn * tau * H.fyy.v[i];
    double b = tau * H.fxy.v[i];
    double eig = 0.5 * (a + c + std::sqrt((a - c) * (a - c) + 4.0 * b * b));
    if (eig > lam) lam = eig;
  }
  if (lam < 1.0) lam = 1.0;
  if (lam > 10.0) lam = 10.0;
  return lam;
}

double compute_rho_max(const ScalarField& mu, const EnergySpec& spec, const SplitShift* shift) {
  if (is_incompressible(spec)) return 1.0;
  const Grid& g = mu.grid;
  double M = -kInf;
  for (int i = 0; i < g.size(); ++i) {
    if (spec.obstacle[i]) continue;
    double d = u_prime(mu.v[i], spec) + spec.potential.v[i];
    if (shift) d += shift->field.v[i];
    if (d > M) M = d;
  }
  if (M == -kInf) throw std::invalid_argument("compute_rho_max: no free cells");
  return u_star_prime(M, spec);
}

// Free cells where s - alpha vanishes or changes sign against a free
// 4-neighbour. This is the discrete carrier of the level set.
static std::vector<std::uint8_t> level_set_mask(const ScalarField& s, double alpha,
                                                const std::vector<std::uint8_t>* excluded) {
  const Grid& g = s.grid;
  const int n = g.n;
  std::vector<std::uint8_t> mask(g.size(), 0);
  auto ok = [&](int id) { return !excluded || !(*excluded)[id]; };
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      int id = g.idx(ix, iy);
      if (!ok(id)) continue;
      double a = s.v[id] - alpha;
      if (a == 0.0) {
        mask[id] = 1;
        continue;
      }
      const int nb[4][2] = {{ix - 1, iy}, {ix + 1, iy}, {ix, iy - 1}, {ix, iy + 1}};
      for (auto& p : nb) {
        if (p[0] < 0 || p[0] >= n || p[1] < 0 || p[1] >= n) continue;
        int jd = g.idx(p[0], p[1]);
        if (!ok(jd)) continue;
        if (a * (s.v[jd] - alpha) < 0.0) {
          mask[id] = 1;
          break;
        }
      }
    }
  return mask;
}

std::optional<ScalarField> level_set_distance(const ScalarField& s, double alpha,
                                              const std::vector<std::uint8_t>* excluded) {
  const Grid& g = s.grid;
  std::vector<std::uint8_t> mask = level_set_mask(s, alpha, excluded);
  bool any = false;
  for (auto m : mask)
    if (m) {
      any = true;
      break;
    }
  if (!any) return std::nullopt;
  ScalarField u = squared_distance_transform(g, mask);
  for (int i = 0; i < g.size(); ++i) {
    double d = std::sqrt(u.v[i]);
    u.v[i] = s.v[i] < alpha ? d : (s.v[i] > alpha ? -d : 0.0);
  }
  return u;
}

std::optional<TraceConstants> trace_constants(const ScalarField& s, double alpha,
                                              const std::vector<std::uint8_t>* excluded) {
  auto u_opt = level_set_distance(s, alpha, excluded);
  if (!u_opt) return std::nullopt;
  const ScalarField& u = *u_opt;
  const Grid& g = s.grid;
  HessianField H = hessian(u);
  const double diam = std::sqrt(2.0);
  double best = kInf;
  for (int side = 0; side < 2; ++side) {
    const double sgn = side == 0 ? 1.0 : -1.0; // u_1 = -u_0
    for (double r = g.h;; r *= 2.0) {
      if (r > diam) r = diam;
      double sup = -kInf;
      for (int i = 0; i < g.size(); ++i) {
        if (excluded && (*excluded)[i]) continue;
        double ui = sgn * u.v[i];
        if (ui <= 0.0 || ui >= r) continue;
        double lap = sgn * (H.fxx.v[i] + H.fyy.v[i]);
        if (lap > sup) sup = lap;
      }
      if (sup != -kInf) {
        double cand = 1.0 / r + std::max(sup, 0.0);
        if (cand < best) best = cand;
      }
      if (r == diam) break;
    }
  }
  double C = best == kInf ? 1.0 : std::max(1.0, best);
  return TraceConstants{2.0 * C, 1.0 / C};
}

GammaResult compute_gamma_lambda(const ScalarField& s, double lambda,
                                 const std::vector<std::uint8_t>* excluded) {
  const Grid& g = s.grid;
  std::vector<std::uint8_t> band = level_set_mask(s, 0.0, excluded);
  for (int i = 0; i < g.size(); ++i) {
    if (excluded && (*excluded)[i]) continue;
    if (s.v[i] >= 0.0 && s.v[i] <= lambda) band[i] = 1;
  }
  auto [gx, gy] = gradient(s);
  double min_slope = kInf;
  for (int i = 0; i < g.size(); ++i) {
    if (!band[i]) continue;
    double sl = std::hypot(gx.v[i], gy.v[i]);
    if (sl < min_slope) min_slope = sl;
  }
  GammaResult res;
  if (min_slope == kInf) {
    res.empty = true;
    return res;
  }
  res.degenerate = min_slope < 1e-6;
  res.value = std::min(1.0 / std::max(min_slope, 1e-6), 1e6);
  return res;
}

double select_lambda_star(double m, double gamma, double c1_at_zero,
                          const std::function<double(double)>& gamma_of_lambda) {
  if (!(m > 2.0) || std::isinf(m))
    throw std::invalid_argument("select_lambda_star: only meaningful for finite m > 2");
  const double mp = m / (m - 1.0);
  const double coef = std::pow(gamma * mp, 1.0 - mp);
  double best_lambda = 1e-4, best_val = kInf;
  for (int j = 0; j <= 60; ++j) {
    double lam = std::pow(10.0, -4.0 + j / 10.0);
    double val = coef * (std::pow(lam, mp - 1.0) * gamma_of_lambda(lam) * c1_at_zero +
                         (mp - 1.0) * std::pow(lam, mp - 2.0));
    if (val < best_val) {
      best_val = val;
      best_lambda = lam;
    }
  }
  return best_lambda;
}

// Shared singular-row logic for m > 2 and m = inf: given the band field s on
// the relevant side, add the interface terms to theta (already holding the
// transport part of theta2), scaled by `volume` (1 on the J side, Lambda^2 on
// the I side).
static void add_interface_terms(ThetaPair& theta, const ScalarField& s, const EnergySpec& spec,
                                double volume, const std::vector<std::uint8_t>* excluded) {
  auto tc0 = trace_constants(s, 0.0, excluded);
  if (!tc0) {
    // No zero level set: either the pressure is positive everywhere (bound
    // the decreasing (u*)'' at the smallest attained argument) or the region
    // is empty of mass. The ascent safeguard covers any underestimate.
    double smin = kInf;
    for (int i = 0; i < s.grid.size(); ++i) {
      if (excluded && (*excluded)[i]) continue;
      smin = std::min(smin, s.v[i]);
    }
    if (is_incompressible(spec))
      theta.theta1 = volume * 1.0;
    else if (smin > 0.0)
      theta.theta1 = volume * u_star_second(smin, spec);
    else
      theta.theta1 = volume * spec.gamma;
    return;
  }
  if (is_incompressible(spec)) {
    GammaResult g0 = compute_gamma_lambda(s, 0.0, excluded);
    theta.theta1 = volume * tc0->c1 * g0.value;
    theta.theta2 += volume * tc0->c2 * g0.value;
    return;
  }
  const double m = spec.m, gam = spec.gamma;
  const double mp = m / (m - 1.0);
  const double coef = std::pow(gam * mp, 1.0 - mp);
  auto gamma_fn = [&](double lam) { return compute_gamma_lambda(s, lam, excluded).value; };
  double lam = select_lambda_star(m, gam, tc0->c1, gamma_fn);
  auto tcl = trace_constants(s, lam, excluded);
  double C1 = tcl ? std::max(tc0->c1, tcl->c1) : tc0->c1;
  double C2 = tcl ? std::max(tc0->c2, tcl->c2) : tc0->c2;
  double G = gamma_fn(lam);
  theta.theta1 =
      volume * coef * (std::pow(lam, mp - 1.0) * C1 * G + (mp - 1.0) * std::pow(lam, mp - 2.0));
  theta.theta2 += volume * coef * C2 * G;
}

ThetaPair theta_for_J(const ScalarField& phi, const ScalarField& mu, const EnergySpec& spec,
                      double tau, const SplitShift& shift) {
  const Grid& g = phi.grid;
  if (g != mu.grid || g != spec.potential.grid)
    throw std::invalid_argument("theta_for_J: grid mismatch");
  const double lambda_map = estimate_lambda(phi, tau, false);
  ThetaPair theta;
  theta.theta2 = tau * lambda_map * max_value(mu); // d = 2: Lambda^{d-1} = Lambda
  const double m = spec.m;
  if (!std::isinf(m) && m <= 2.0) {
    double rho_max = compute_rho_max(mu, spec, &shift);
    if (m == 1.0)
      theta.theta1 = rho_max / spec.gamma;
    else if (m < 2.0)
      theta.theta1 = std::pow(rho_max, 2.0 - m) / (spec.gamma * m);
    else
      theta.theta1 = 1.0 / (2.0 * spec.gamma);
  } else {
    ScalarField s(g, FieldRole::potential);
    for (int i = 0; i < g.size(); ++i)
      s.v[i] = phi.v[i] - spec.potential.v[i] - shift.field.v[i];
    add_interface_terms(theta, s, spec, 1.0, &spec.obstacle);
  }
  validate_theta(theta);
  return theta;
}

ThetaPair theta_for_I_with_conjugate(const ScalarField& psi, const ScalarField& psi_cbar,
                                     const ScalarField& mu, const EnergySpec& spec, double tau,
                                     const SplitShift& shift) {
  const Grid& g = psi.grid;
  if (g != psi_cbar.grid || g != mu.grid || g != spec.potential.grid)
    throw std::invalid_argument("theta_for_I: grid mismatch");
  const double lambda_map = estimate_lambda(psi, tau, true);
  const double vol = lambda_map * lambda_map; // Lambda^d, d = 2
  const double rho_max = compute_rho_max(mu, spec, &shift);
  ThetaPair theta;
  theta.theta2 = tau * lambda_map * rho_max;
  const double m = spec.m;
  if (!std::isinf(m) && m <= 2.0) {
    if (m == 1.0)
      theta.theta1 = vol * rho_max / spec.gamma;
    else if (m < 2.0)
      theta.theta1 = vol * std::pow(rho_max, 2.0 - m) / (spec.gamma * m);
    else
      theta.theta1 = vol / (2.0 * spec.gamma);
  } else {
    // Pull the dual height field back through the inverse map x - tau grad psi
    // so the bands live on the same side as the psi update.
    ScalarField w(g, FieldRole::potential);
    for (int i = 0; i < g.size(); ++i)
      w.v[i] = psi_cbar.v[i] - spec.potential.v[i] - shift.field.v[i];
    auto [gx, gy] = gradient(psi);
    ScalarField p(g, FieldRole::potential);
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        int id = g.idx(ix, iy);
        p.v[id] = sample_bilinear(w, g.x(ix) - tau * gx.v[id], g.y(iy) - tau * gy.v[id]);
      }
    add_interface_terms(theta, p, spec, vol, &spec.obstacle);
  }
  validate_theta(theta);
  return theta;
}

ThetaPair theta_for_I(const ScalarField& psi, const ScalarField& mu, const EnergySpec& spec,
                      double tau, const SplitShift& shift) {
  ScalarField psi_cbar = forward_c_transform(psi, tau);
  return theta_for_I_with_conjugate(psi, psi_cbar, mu, spec, tau, shift);
}

} // namespace bfm
