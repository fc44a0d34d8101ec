#pragma once
// Exact grid c-transforms for the quadratic cost |x-y|^2/(2 tau), computed in
// O(n^2) by the Felzenszwalb-Huttenlocher lower-envelope transform applied
// separately along each axis, plus the two transport-map pushforwards that
// feed the dual-ascent residuals. The min/max in the transforms ranges over
// grid points only.

#include <cstdint>
#include <vector>

#include "bfm/grid.hpp"

namespace bfm {

// Lower envelope of the parabolas i -> f[j] + (i-j)^2 sampled at the integers
// i = 0..n-1. Entries with f[j] = +inf are treated as absent; output entries
// are +inf iff every input is. Exact ties resolve to the smaller j. v_buf and
// z_buf are caller-provided workspaces of size n and n+1.
void lower_envelope_1d(const double* f, int n, double* out, int* v_buf, double* z_buf);

// phi^c(x) = min_y phi(y) + |x-y|^2/(2 tau)
ScalarField backward_c_transform(const ScalarField& phi, double tau);

// psi^cbar(y) = max_x psi(x) - |x-y|^2/(2 tau)  (= -backward(-psi))
ScalarField forward_c_transform(const ScalarField& psi, double tau);

// Density of the pushforward of mu under the map with inverse
// T^{-1}(y) = y + tau grad phi(y):  mu(y + tau grad phi) det(I + tau D^2 phi),
// Jacobian clamped at zero. Maps are always built from difference-quotient
// gradients, never from envelope argmin indices.
ScalarField pushforward_T(const ScalarField& mu, const ScalarField& phi, double tau);

// Same with inverse S^{-1}(x) = x - tau grad psi(x) and det(I - tau D^2 psi).
ScalarField pushforward_S(const ScalarField& eta, const ScalarField& psi, double tau);

// Pushforwards evaluated at the exact lattice minimizers: every source cell's
// density is deposited whole into the cell attaining its envelope minimum
// (T: argmin_y phi(y) + |x-y|^2/(2 tau); S: argmax_x psi(x) - |x-y|^2/(2 tau)).
// Mass-conserving to roundoff and equal to the exact first variation of the
// discrete dual functionals even where the iterates are piecewise quadratic
// with cell-scale pieces and difference-quotient maps systematically miss the
// minimizers. Single-cell deposits make these grainier in L1 than the
// Jacobian forms above, so they serve as derivative-exact diagnostics; the
// Jacobian forms remain the solver residual and the reported densities.
ScalarField pushforward_T_minimizers(const ScalarField& mu, const ScalarField& phi, double tau);
ScalarField pushforward_S_minimizers(const ScalarField& eta, const ScalarField& psi, double tau);

// int phi^c dmu with the envelope refined below lattice resolution: each
// query cell's lattice minimum gets a closed-form correction from the
// quadratic model of phi around the winning cell (kept only when the model is
// convex, the sub-cell minimizer stays inside the patch, and the correction
// is negative). Always <= the integral of backward_c_transform(phi) against
// mu. The solver checks its phi half steps against this value: the lattice
// number can rank a kinked iterate above a better smooth one and wedge the
// ascent at a false maximizer.
double transport_integral_refined(const ScalarField& phi, const ScalarField& mu, double tau);

// Squared Euclidean distance (physical units) to the set of marked cells,
// +inf everywhere if the mask is empty. Shared envelope machinery with the
// c-transforms; used for the interface distance fields in the step bounds.
ScalarField squared_distance_transform(const Grid& g, const std::vector<std::uint8_t>& mask);

} // namespace bfm
