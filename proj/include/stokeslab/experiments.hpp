#pragma once

#include "stokeslab/cauchy.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stokeslab {

enum class ObstacleFamily { translation, dilation, radial_mode };
std::string to_string(ObstacleFamily family);
ObstacleFamily parse_obstacle_family(const std::string& name);

/// Boundary data on Gamma. `bump` is the smooth tangential bump on the middle
/// half of Gamma; `random_modes` multiplies it by a seeded random Fourier series.
struct DataSpec {
  std::string kind = "bump";
  double amplitude = 1.0;
  int modes = 4;
};

struct ExperimentConfig {
  /// Outer domain, Gamma and a-priori constants; the obstacle is the t = 0 member.
  DomainSpec domain{BoundaryCurve::circle(Point::Zero(), 1.0), std::nullopt, ArcInterval{}, 0.0, 1.0, 1.0, 1.0, 1.0};
  Point obstacle_center = Point::Zero();
  double obstacle_radius = 0.3;
  ObstacleFamily family = ObstacleFamily::translation;
  Vec2 direction = Vec2(1.0, 0.0);
  int mode = 3;
  std::vector<double> t_grid;
  DataSpec data;
  double h_target = 0.15;
  int level = 1;
  /// Interior nodes follow the obstacle up to this distance from it.
  double falloff = 0.6;
  std::uint64_t seed = 1;
  int jobs = 1;
  /// Records whose solver residual exceeds this are excluded from fits.
  double residual_tolerance = 1e-8;
  int max_depth = 5;
};

BoundaryCurve obstacle_at(const ExperimentConfig& config, double t);
DomainSpec domain_at(const ExperimentConfig& config, double t);

/// Checks the grid and every member obstacle; throws ErrorKind::config.
void validate_config(const ExperimentConfig& config);

/// Dirichlet data on a space, flux removed.
DirichletData boundary_data(const ExperimentConfig& config, const P2Space& space);

struct StabilityRecord {
  double t = 0.0;
  double d_H = 0.0;
  double epsilon = 0.0;
  double energy_12 = 0.0;
  double energy_21 = 0.0;
  double F = 0.0;
  int level = 0;
  double g_norm = 0.0;
  double residual = 0.0;
  /// Residual above tolerance: written out but excluded from fits.
  bool flagged = false;
  /// The record could not be computed; not written to the CSV.
  bool failed = false;
  std::string reason;
};

/// One record per t, in grid order. Deterministic for a given config.
std::vector<StabilityRecord> run_stability_sweep(const ExperimentConfig& config);

enum class ModulusFamily { loglog, log };
std::string to_string(ModulusFamily family);
ModulusFamily parse_modulus_family(const std::string& name);

/// loglog: omega(t) = C (log|log t|)^{-beta}; log: omega(t) = C |log t|^{-gamma}.
/// Fitted on x = epsilon / |g|_{1/2}, y = d_H / rho0 by least squares in
/// (log-transformed) coordinates. For loglog, beta is clamped to
/// [beta_min, 1 - beta_min] and C refitted.
struct ModulusFit {
  ModulusFamily family = ModulusFamily::log;
  double C = 0.0;
  double exponent = 0.0;
  double unconstrained_exponent = 0.0;
  bool clamped = false;
  double r_squared = 0.0;
  int points = 0;
  /// d_H <= rho0 omega(epsilon / |g|) on every record with the fitted C.
  bool envelope = false;
  /// Smallest C for which the envelope holds at the fitted exponent.
  double envelope_C = 0.0;
};

struct FitOptions {
  double beta_min = 0.01;
};

ModulusFit fit_modulus(const std::vector<StabilityRecord>& records, ModulusFamily family, double rho0,
                       const FitOptions& options = {});
double evaluate_modulus(const ModulusFit& fit, double t);

struct ContinuationReport {
  std::vector<double> normalized_12;
  std::vector<double> normalized_21;
  bool monotone_12 = true;
  bool monotone_21 = true;
  /// Both energies <= tolerance on every record with d_H = 0.
  bool vanishes_at_zero = true;
  double zero_tolerance = 1e-10;
};

/// Energies over |g|^2, checked for monotonicity along increasing epsilon.
ContinuationReport continuation_consistency(const std::vector<StabilityRecord>& records, double zero_tolerance = 1e-10);

/// t,d_H,epsilon,energy_12,energy_21,F,level with 17 significant digits.
void write_records_csv(std::ostream& out, const std::vector<StabilityRecord>& records);
void write_records_csv(const std::filesystem::path& path, const std::vector<StabilityRecord>& records);
std::vector<StabilityRecord> read_records_csv(const std::filesystem::path& path);
/// JSON text block with both fits.
std::string fit_summary(const std::vector<ModulusFit>& fits, const ContinuationReport& continuation);
/// `x y` plot data: d_H against epsilon / |g|.
void write_plot_data(const std::filesystem::path& path, const std::vector<StabilityRecord>& records);

}  // namespace stokeslab
