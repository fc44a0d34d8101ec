#pragma once
// One implicit step of the flow is a maximization of two equivalent dual
// functionals,
//   J(phi) = int phi^c dmu - int u*(phi - V - shift),
//   I(psi) = int psi  dmu - int u*(psi^cbar - V - shift),
// alternated ("back and forth") with an exact c-transform conjugation after
// each preconditioned half step. The preconditioner is the weighted H^1
// inverse with data-driven Theta, and every half step is guarded by a value
// check that doubles Theta on failure, so accepted iterates never decrease
// the dual value beyond roundoff slack.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfm/energy.hpp"
#include "bfm/grid.hpp"
#include "bfm/helmholtz.hpp"

namespace bfm {

struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverConfig {
  double tau = 0.1;
  int num_steps = 1;
  double residual_tol = 1e-3;   // epsilon on ||T#mu - deltaU*(phi)||_L1
  int max_inner_iters = 500;
  double backtrack_factor = 0.5; // step scale per safeguard hit: Theta /= factor (doubling)
  int max_backtracks = 20;
  double ascent_slack = 1e-12;   // accepted if value >= before - slack*(1+|before|)
  int stall_window = 40;         // iterations without residual improvement before flagging
  bool record_half_steps = false;
};

struct HalfStepRecord {
  char side = 'J';    // which functional the step ascended
  double before = 0;  // its value before the step
  double after = 0;   // accepted value after the step
  double partner = 0; // the other functional at the conjugate of the accepted iterate
  int backtracks = 0;
};

struct InnerResult {
  ScalarField phi, psi;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  ThetaPair theta_J, theta_I; // last accepted values (after any doubling)
  std::vector<double> residual_trace;
  std::vector<HalfStepRecord> half_steps; // filled when record_half_steps
};

struct StepDiagnostics {
  int step = 0;
  double time = 0.0;
  double energy = 0.0;
  double mass = 0.0;
  double residual = 0.0;
  int inner_iters = 0;
  ThetaPair theta_J, theta_I;
  double wall_ms = 0.0;
  bool converged = true;
};

double J_value(const ScalarField& phi, const ScalarField& mu, const EnergySpec& spec, double tau,
               const SplitShift& shift);
double I_value(const ScalarField& psi, const ScalarField& mu, const EnergySpec& spec, double tau,
               const SplitShift& shift);

// Preconditioned ascent directions: solve(residual, theta) with
//   residual_J = T#mu - deltaU*(phi),  residual_I = mu - S#(deltaU*(psi^cbar)).
ScalarField grad_J(const ScalarField& phi, const ScalarField& mu, const EnergySpec& spec,
                   double tau, const SplitShift& shift, const ThetaPair& theta,
                   HelmholtzSolver& helmholtz);
ScalarField grad_I(const ScalarField& psi, const ScalarField& mu, const EnergySpec& spec,
                   double tau, const SplitShift& shift, const ThetaPair& theta,
                   HelmholtzSolver& helmholtz);

// Runs the alternating ascent from phi_init until the residual drops under
// config.residual_tol or an iteration/stall limit hits. A half step whose
// safeguard exhausts max_backtracks is skipped (the conjugation still feeds
// the other side); if both halves exhaust in the same pass the solve returns
// flagged, except on the very first pass, which throws SolverError. Running
// out of iterations just returns converged = false.
InnerResult bfm_inner_solve(const ScalarField& mu, const EnergySpec& spec,
                            const SolverConfig& config, const SplitShift& shift,
                            const ScalarField& phi_init, HelmholtzSolver& helmholtz);

using StepCallback = std::function<void(int step, const ScalarField& rho, const StepDiagnostics&)>;

// Outer driver: warm-started implicit steps from rho0. The density after each
// step is recovered by duality, rho = (u*)'(phi - V - shift), never by
// pushing mass forward. Returns the final density and per-step diagnostics.
std::pair<ScalarField, std::vector<StepDiagnostics>> jko_run(
    const ScalarField& rho0, const EnergySpec& spec, const SolverConfig& config,
    const StepCallback& callback = {}, std::vector<InnerResult>* inner_log = nullptr);

} // namespace bfm
