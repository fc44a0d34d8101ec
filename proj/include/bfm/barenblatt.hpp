#pragma once
// Closed-form self-similar solution of the porous-medium flow with energy
// density gamma/(m-1) rho^m, used as the accuracy benchmark: the run starts
// on the exact profile at t0 (chosen so the initial peak height is h0) and
// the reported error is the time-averaged L1 gap against the exact profile.

#include <vector>

#include "bfm/grid.hpp"

namespace bfm {

struct BarenblattSpec {
  double m = 2.0;
  double gamma = 1e-3;
  double mass = 0.5;
};

// rho(t,x) = ( (M/(4 pi m t gamma))^((m-1)/m) - (m-1)/(4 m^2 t gamma) |x|^2 )_+^(1/(m-1))
// valid on the unit square until the support reaches the boundary at t_c.
ScalarField barenblatt_density(const Grid& g, const BarenblattSpec& spec, double t);

double barenblatt_peak(const BarenblattSpec& spec, double t);
double barenblatt_peak_time(const BarenblattSpec& spec, double h0); // peak(t0) = h0
double barenblatt_tc(const BarenblattSpec& spec); // support radius hits 1/2

// (1/N) sum_{k=0}^{N} || exact(t0 + k tau) - rho_k ||_L1 with N = floor(2/tau);
// rho must hold the step-k densities for k = 0..N.
double l1_error_trace(const std::vector<ScalarField>& rho, const BarenblattSpec& spec, double tau,
                      double t0);

} // namespace bfm
