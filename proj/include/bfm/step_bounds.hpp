#pragma once
// Data-driven step-size bounds for the preconditioned dual ascent. Each half
// step solves (Theta1 I - Theta2 Lap)^{-1} against the residual; the Theta
// pair is recomputed from the current iterate so the ascent inequality holds
// without line search. For m <= 2 the bounds are closed-form; for m > 2 and
// m = inf they come from interface geometry: a trace inequality on the free
// boundary (constants from a signed distance field) and the inverse of the
// smallest pressure slope in a band around it.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bfm/energy.hpp"
#include "bfm/grid.hpp"
#include "bfm/helmholtz.hpp"

namespace bfm {

// Largest eigenvalue of I + tau D^2(dual) (or I - tau D^2 for the backward
// map), maximized over cells and clamped to [1, 10].
double estimate_lambda(const ScalarField& dual, double tau, bool minus_sign);

// (u*)'(M) with M = max over free cells of u'(mu) + V (+ shift when the
// splitting is active); equals max(mu) when V = 0 by the inverse-function
// identity. m = inf always gives 1.
double compute_rho_max(const ScalarField& mu, const EnergySpec& spec,
                       const SplitShift* shift = nullptr);

// Signed distance to the discrete level set {s = alpha}: positive where
// s < alpha, negative where s > alpha. The level set is the set of free cells
// where s - alpha changes sign against a free 4-neighbour (or hits alpha
// exactly). Returns nothing when that set is empty. free_mask: 1 = excluded.
std::optional<ScalarField> level_set_distance(const ScalarField& s, double alpha,
                                              const std::vector<std::uint8_t>* excluded = nullptr);

struct TraceConstants {
  double c1 = 0.0; // coefficient on ||h||_L2^2
  double c2 = 0.0; // coefficient on ||grad h||_L2^2
};

// Constants for the boundary-trace inequality
//   int_{s=alpha} |h|^2 <= c2 ||grad h||^2 + c1 ||h||^2,
// from sweeping bands {0 < u_i < r'} on both sides of the interface,
// r' in {h, 2h, 4h, ..., diam}, scoring 1/r' + sup_band (Lap u_i)_+ and
// taking C = max(1, best); c1 = 2C, c2 = 1/C.
std::optional<TraceConstants> trace_constants(const ScalarField& s, double alpha,
                                              const std::vector<std::uint8_t>* excluded = nullptr);

struct GammaResult {
  double value = 0.0;      // 1 / min |grad s| over the band, clamped to [0, 1e6]
  bool degenerate = false; // min slope below 1e-6 (value clamped)
  bool empty = false;      // no band cells at all: no interface anywhere
};

// Band = {0 <= s <= lambda} union the zero-crossing cells of s. The union
// keeps lambda = 0 (incompressible row) and steep interfaces meaningful: a
// sharp interface can step over [0, lambda] entirely without any cell
// landing inside it.
GammaResult compute_gamma_lambda(const ScalarField& s, double lambda,
                                 const std::vector<std::uint8_t>* excluded = nullptr);

// argmin over a log-spaced probe grid (10 per decade on [1e-4, 1e2]) of
//   (gamma m')^(1-m') * (lambda^(m'-1) Gamma(lambda) C1(0) + (m'-1) lambda^(m'-2)).
double select_lambda_star(double m, double gamma, double c1_at_zero,
                          const std::function<double(double)>& gamma_of_lambda);

// Theta for the half step in phi. mu is the source measure of the step.
ThetaPair theta_for_J(const ScalarField& phi, const ScalarField& mu, const EnergySpec& spec,
                      double tau, const SplitShift& shift);

// Theta for the half step in psi. The band field here is the pull-back
// p(x) = (psi^cbar - V - shift)(x - tau grad psi(x)), sampled bilinearly, and
// the closed-form rows gain the Lambda^2 volume factor of the backward map.
ThetaPair theta_for_I(const ScalarField& psi, const ScalarField& mu, const EnergySpec& spec,
                      double tau, const SplitShift& shift);

// Same, reusing an already computed forward transform psi^cbar.
ThetaPair theta_for_I_with_conjugate(const ScalarField& psi, const ScalarField& psi_cbar,
                                     const ScalarField& mu, const EnergySpec& spec, double tau,
                                     const SplitShift& shift);

} // namespace bfm
