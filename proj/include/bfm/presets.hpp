#pragma once
// Experiment presets, flat key=value configuration, and file emission for the
// command-line driver. A preset fully determines grid, tau, m, gamma, step
// count, potential, obstacles, and the initial density; any key can be
// overridden from a config file or a --key=value flag (flags win).

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfm/energy.hpp"
#include "bfm/solver.hpp"

namespace bfm {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IOError : std::runtime_error {
  explicit IOError(const std::string& msg) : std::runtime_error(msg) {}
};

using KeyValues = std::map<std::string, std::string>;

// '#' comments and blank lines allowed; everything else must be key=value.
KeyValues parse_config_file(const std::string& path);

struct ResolvedConfig {
  std::string preset;
  int grid_n = 0;
  double tau = 0.0;
  double m = 2.0; // +inf for the incompressible presets
  double gamma = 1.0;
  int steps = 0;
  double residual_tol = 1e-3;
  int frame_stride = 1;
  std::string out_dir = "out";
  EnergySpec energy;
  ScalarField rho0;
};

// Preset defaults overridden by kv. Unknown keys, unknown preset names, and
// inconsistent settings (mass on obstacle cells, interaction with m = inf,
// nonpositive tau/gamma, ...) throw ConfigError.
ResolvedConfig resolve_config(const KeyValues& kv);

// Echo of every setting needed to reproduce the run bit for bit (out_dir
// excluded); parses back through resolve_config.
std::string serialize_config(const ResolvedConfig& cfg);

// kinds: star (pentagram, outer radius 0.3, mass 1), square (side 0.2 at
// (-0.3,-0.3), mass 1), four-squares (side 0.2 at (+-0.3,+-0.3), total mass
// 1), ball (indicator of radius 0.15 at (-0.3,-0.3), height 1).
ScalarField build_initial_density(const std::string& kind, const Grid& g);

// Raw frame: row-major float64 (y slow, little-endian) named rho_%04d.f64,
// plus a rho_%04d.hdr text sidecar with n, tau, step, time, layout.
void write_frame_raw(const std::string& dir, int step, const ScalarField& rho, double tau,
                     double time);
ScalarField read_frame_raw(const std::string& dir, int step, const Grid& g);

// 8-bit preview rho_%04d.pgm: 0..run_max mapped to 0..255 (all zero when
// run_max = 0), obstacle cells forced to 255, top image row = largest y.
void write_frame_pgm(const std::string& dir, int step, const ScalarField& rho, double run_max,
                     const std::vector<std::uint8_t>& obstacle);

void write_diagnostics_csv(const std::string& path, const std::vector<StepDiagnostics>& diags);

// Full preset run: frames (step 0, every frame_stride-th step, final step),
// previews, diagnostics.csv, resolved.cfg. Returns the number of
// non-converged steps (flagged, not fatal).
int run_command(const ResolvedConfig& cfg, std::ostream& log);

struct ValidateResult {
  double error = 0.0;   // time-averaged L1 gap against the closed form
  double seconds = 0.0; // wall time of the solver loop
  int nonconverged = 0;
  int steps = 0;
};

// Accuracy benchmark: start on the exact self-similar profile and march to
// horizon 2 with the given tau.
ValidateResult run_barenblatt_benchmark(double m, double tau, int grid_n, double residual_tol);

int validate_command(double m, double tau, int grid_n, double residual_tol, std::ostream& log);

} // namespace bfm
