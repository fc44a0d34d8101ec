#include "bfm/helmholtz.hpp"

#include <fftw3.h>

#include <cmath>
#include <stdexcept>

namespace bfm {

void validate_theta(const ThetaPair& t) {
  if (!(t.theta1 > 0.0) || !std::isfinite(t.theta1))
    throw std::invalid_argument("ThetaPair: theta1 must be positive and finite");
  if (!(t.theta2 >= 0.0) || !std::isfinite(t.theta2))
    throw std::invalid_argument("ThetaPair: theta2 must be nonnegative and finite");
}

HelmholtzSolver::HelmholtzSolver(const Grid& g) : g_(g) {
  const int n = g_.n;
  buf_ = fftw_alloc_real((size_t)n * n);
  if (!buf_) throw std::bad_alloc();
  fwd_ = fftw_plan_r2r_2d(n, n, buf_, buf_, FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
  bwd_ = fftw_plan_r2r_2d(n, n, buf_, buf_, FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
  if (!fwd_ || !bwd_) throw std::runtime_error("HelmholtzSolver: fftw plan creation failed");
  sym_.resize((size_t)n * n);
  const double inv_h2 = (double)n * n;
  for (int ky = 0; ky < n; ++ky) {
    double ly = (2.0 - 2.0 * std::cos(M_PI * ky / n)) * inv_h2;
    for (int kx = 0; kx < n; ++kx) {
      double lx = (2.0 - 2.0 * std::cos(M_PI * kx / n)) * inv_h2;
      sym_[(size_t)ky * n + kx] = lx + ly;
    }
  }
}

HelmholtzSolver::~HelmholtzSolver() {
  if (fwd_) fftw_destroy_plan(fwd_);
  if (bwd_) fftw_destroy_plan(bwd_);
  if (buf_) fftw_free(buf_);
}

ScalarField HelmholtzSolver::solve(const ScalarField& f, const ThetaPair& theta) {
  if (f.grid != g_) throw std::invalid_argument("HelmholtzSolver::solve: grid mismatch");
  validate_theta(theta);
  check_finite(f, "HelmholtzSolver::solve");
  const int n = g_.n;
  const size_t nn = (size_t)n * n;
  for (size_t i = 0; i < nn; ++i) buf_[i] = f.v[i];
  fftw_execute(fwd_);
  const double norm = 1.0 / (4.0 * nn);
  for (size_t i = 0; i < nn; ++i) buf_[i] *= norm / (theta.theta1 + theta.theta2 * sym_[i]);
  fftw_execute(bwd_);
  ScalarField out(g_, f.role);
  for (size_t i = 0; i < nn; ++i) out.v[i] = buf_[i];
  return out;
}

ScalarField apply_helmholtz_operator(const ScalarField& f, const ThetaPair& theta) {
  validate_theta(theta);
  const Grid& g = f.grid;
  const int n = g.n;
  const double inv_h2 = 1.0 / (g.h * g.h);
  ScalarField out(g, f.role);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      int id = g.idx(ix, iy);
      double c = f.v[id];
      double lap = 0.0;
      if (ix > 0) lap += f.v[g.idx(ix - 1, iy)] - c;
      if (ix < n - 1) lap += f.v[g.idx(ix + 1, iy)] - c;
      if (iy > 0) lap += f.v[g.idx(ix, iy - 1)] - c;
      if (iy < n - 1) lap += f.v[g.idx(ix, iy + 1)] - c;
      out.v[id] = theta.theta1 * c - theta.theta2 * lap * inv_h2;
    }
  return out;
}

} // namespace bfm
