#pragma once
// Cell-centered uniform grid on the unit square [-1/2,1/2]^2 and the small
// set of field operations everything else is built from. Cell (ix,iy) has
// center (-1/2+(ix+1/2)h, -1/2+(iy+1/2)h), h = 1/n, stored row-major with y
// as the slow index.

#include <string>
#include <utility>
#include <vector>

namespace bfm {

enum class FieldRole { density, potential, dual_phi, dual_psi, distance };

struct Grid {
  int n = 0;      // cells per side
  double h = 0.0; // cell width = 1/n

  Grid() = default;
  explicit Grid(int n_);

  int size() const { return n * n; }
  int idx(int ix, int iy) const { return iy * n + ix; }
  double x(int ix) const { return -0.5 + (ix + 0.5) * h; }
  double y(int iy) const { return -0.5 + (iy + 0.5) * h; }
  bool operator==(const Grid& o) const { return n == o.n; }
  bool operator!=(const Grid& o) const { return n != o.n; }
};

struct ScalarField {
  Grid grid;
  FieldRole role = FieldRole::potential;
  std::vector<double> v;

  ScalarField() = default;
  ScalarField(const Grid& g, FieldRole r, double fill = 0.0)
      : grid(g), role(r), v(g.size(), fill) {}

  double& operator()(int ix, int iy) { return v[grid.idx(ix, iy)]; }
  double operator()(int ix, int iy) const { return v[grid.idx(ix, iy)]; }
};

struct HessianField {
  ScalarField fxx, fxy, fyy; // fxy == fyx by construction
};

// Throws std::invalid_argument naming `where` and the first bad cell if the
// field contains a NaN or Inf.
void check_finite(const ScalarField& f, const std::string& where);

// Centered differences in the interior, one-sided at boundary cells (exact
// for affine fields everywhere, which the transport-map tests rely on).
std::pair<ScalarField, ScalarField> gradient(const ScalarField& f);

// Diagonal entries: 3-point second differences, shifted one cell inward at
// the boundary (exact for quadratics everywhere). Cross derivative: the two
// 1-D gradient operators composed; they commute, so fxy == fyx exactly.
HessianField hessian(const ScalarField& f);

// Bilinear interpolation at a physical point, clamped to the cell-center hull
// (constant extension outside). Exact at cell centers.
double sample_bilinear(const ScalarField& f, double px, double py);

// h^2 * sum with Kahan compensation: the dual-ascent safeguard compares
// values to a 1e-12 slack, which naive summation noise would swamp at 256^2.
double integrate(const ScalarField& f);

double l1_norm(const ScalarField& f);       // integrate(|f|)
double l1_diff(const ScalarField& a, const ScalarField& b);
double max_abs(const ScalarField& f);
double max_value(const ScalarField& f);

} // namespace bfm
