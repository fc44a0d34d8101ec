#pragma once
// Exact inverse of (theta1 I - theta2 Lap_h) with the cell-centered
// zero-Neumann 5-point Laplacian, diagonalized by DCT-II/DCT-III (FFTW
// REDFT10/REDFT01). Mode (k1,k2) has symbol
//   lambda_k = (2 - 2 cos(pi k1/n))/h^2 + (2 - 2 cos(pi k2/n))/h^2,
// and the DCT round trip carries a factor 4 n^2. Plans use FFTW_ESTIMATE:
// measured planning may pick different algorithms run to run, which would
// break the bit-identical reproducibility contract.

#include <vector>

#include "bfm/grid.hpp"

struct fftw_plan_s; // avoid pulling fftw3.h into every consumer

namespace bfm {

struct ThetaPair {
  double theta1 = 0.0; // weight on the identity part, must be > 0
  double theta2 = 0.0; // weight on -Laplacian, must be >= 0
};

void validate_theta(const ThetaPair& t); // throws std::invalid_argument

class HelmholtzSolver {
public:
  explicit HelmholtzSolver(const Grid& g);
  ~HelmholtzSolver();
  HelmholtzSolver(const HelmholtzSolver&) = delete;
  HelmholtzSolver& operator=(const HelmholtzSolver&) = delete;

  // (theta1 I - theta2 Lap_h)^{-1} f; theta2 = 0 degenerates to f/theta1.
  ScalarField solve(const ScalarField& f, const ThetaPair& theta);

  const Grid& grid() const { return g_; }

private:
  Grid g_;
  double* buf_ = nullptr; // fftw-aligned n^2 workspace
  fftw_plan_s* fwd_ = nullptr;
  fftw_plan_s* bwd_ = nullptr;
  std::vector<double> sym_; // per-mode Laplacian symbol, sym_[k] >= 0
};

// theta1 f - theta2 Lap_h f with the same discrete Laplacian (even reflection
// across cell faces at the boundary). Exposed so tests can verify the
// apply-then-solve round trip is the identity.
ScalarField apply_helmholtz_operator(const ScalarField& f, const ThetaPair& theta);

} // namespace bfm
