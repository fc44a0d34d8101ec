#pragma once
// The internal-energy family driving the flow and its convex-conjugate
// calculus. Densities are recovered from duals through (u*)' (duality, no
// derivatives of the dual needed). m=1 is the entropy limit, finite m>1 the
// power law, m=+inf the hard constraint rho<=1. A quadratic interaction
// energy (non-convex along general directions) is handled by convexity
// splitting: it is frozen at the previous density and enters each step as a
// potential-like shift plus a constant.

#include <cstdint>
#include <vector>

#include "bfm/grid.hpp"

namespace bfm {

// Obstacle cells carry this value in the potential; solver code treats them
// as hard walls (density forced to zero, excluded from band estimates).
constexpr double kObstaclePotential = 1e9;

struct EnergySpec {
  double m = 2.0;     // exponent in [1, +inf]; +inf = incompressible
  double gamma = 1.0; // diffusion strength, > 0
  ScalarField potential;              // V >= 0; kObstaclePotential on obstacle cells
  std::vector<std::uint8_t> obstacle; // 1 = obstacle cell
  bool has_interaction = false;
  double interaction_weight = 0.0; // w in w * int int |x-y|^2 rho rho / ... see U_value
};

EnergySpec make_energy(const Grid& g, double m, double gamma); // V = 0, no obstacle
void validate_energy(const EnergySpec& spec);
bool is_incompressible(const EnergySpec& spec);

// Shift from convexity splitting: the concave part's first variation at the
// previous density, plus the constant making the relaxed functional agree.
struct SplitShift {
  ScalarField field;     // deltaU0(rho_n); zero field when splitting is off
  double constant = 0.0; // (deltaU0(rho_n), rho_n) - U0(rho_n)
};
SplitShift zero_shift(const Grid& g);

// Pointwise energy density and conjugate calculus.
double u_value(double rho, const EnergySpec& spec);       // +inf outside the domain
double u_prime(double rho, const EnergySpec& spec);       // m=1 regularized at 1e-12
double u_star(double p, const EnergySpec& spec);
double u_star_prime(double p, const EnergySpec& spec);    // = 0 at exact p=0 when m=inf
double u_star_second(double p, const EnergySpec& spec);   // throws for m=inf and at the kink for m>2

// rho(x) = (u*)'(phi - V - shift) on free cells, 0 on obstacle cells.
ScalarField density_from_dual(const ScalarField& phi, const EnergySpec& spec,
                              const SplitShift& shift);

// integral of u*(phi - V - shift) over free cells. The splitting constant is
// deliberately omitted: it offsets J and I equally and cancels everywhere it
// could matter (ascent tests, sandwich ordering, argmax).
double U_star_value(const ScalarField& phi, const EnergySpec& spec, const SplitShift& shift);

// Full energy of a density: internal + potential + interaction. +inf if rho
// sits on an obstacle cell or violates the m=inf height constraint.
double U_value(const ScalarField& rho, const EnergySpec& spec);

// deltaU0 for the quadratic interaction, by exact moments:
//   w * (|x|^2 M0 + M2 - 2 x . M1),  Mk = moments of rho.
ScalarField interaction_first_variation(const ScalarField& rho, double weight);

SplitShift build_split_shift(const ScalarField& rho_n, const EnergySpec& spec);

// Warm start for the very first step: u'(rho0) + V on free cells (m=inf: 0).
// Obstacle cells get the max over free cells, not the 1e9 sentinel, so the
// first pushforward never differences across a cliff.
ScalarField initial_dual(const ScalarField& rho0, const EnergySpec& spec);

} // namespace bfm
