#include "stokeslab/experiments.hpp"
#include "stokeslab/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stokeslab;

namespace {

// Unit disk, Gamma the upper arc, disk obstacle moving towards Gamma.
ExperimentConfig translation_config() {
  ExperimentConfig c;
  c.domain = {BoundaryCurve::circle({0, 0}, 1.0), std::nullopt, ArcInterval{0.05, 0.45}, 0.25, 0.5, 3.0, 20.0, 1.0};
  c.obstacle_radius = 0.25;
  c.direction = {0.0, 1.0};
  c.t_grid = {0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08};
  c.level = 1;
  return c;
}

const std::vector<StabilityRecord>& translation_sweep() {
  static const std::vector<StabilityRecord> records = run_stability_sweep(translation_config());
  return records;
}

std::string csv_text(const std::vector<StabilityRecord>& r) {
  std::ostringstream out;
  write_records_csv(out, r);
  return out.str();
}

// Records generated exactly from omega; d_H = rho0 omega(eps / g).
std::vector<StabilityRecord> synthetic(const ModulusFit& model, double rho0) {
  std::vector<StabilityRecord> out;
  for (int i = 0; i < 12; ++i) {
    StabilityRecord r;
    r.g_norm = 3.0;
    r.epsilon = r.g_norm * std::pow(10.0, -2.0 - 0.5 * i);
    r.d_H = rho0 * evaluate_modulus(model, r.epsilon / r.g_norm);
    r.t = r.d_H;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(FitModulus, RecoversSyntheticLogLog) {
  ModulusFit model;
  model.family = ModulusFamily::loglog;
  model.C = 2.0;
  model.exponent = 0.5;
  const ModulusFit fit = fit_modulus(synthetic(model, 0.5), ModulusFamily::loglog, 0.5);
  EXPECT_NEAR(fit.C, 2.0, 1e-6);
  EXPECT_NEAR(fit.exponent, 0.5, 1e-6);
  EXPECT_FALSE(fit.clamped);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(fit.envelope_C, 2.0, 1e-9);
  EXPECT_EQ(fit.points, 12);
}

TEST(FitModulus, RecoversSyntheticLog) {
  ModulusFit model;
  model.family = ModulusFamily::log;
  model.C = 0.7;
  model.exponent = 1.5;
  const ModulusFit fit = fit_modulus(synthetic(model, 2.0), ModulusFamily::log, 2.0);
  EXPECT_NEAR(fit.C, 0.7, 1e-9);
  EXPECT_NEAR(fit.exponent, 1.5, 1e-9);
}

TEST(FitModulus, EnvelopeIsTheMinimalConstant) {
  ModulusFit model;
  model.family = ModulusFamily::loglog;
  model.C = 1.0;
  model.exponent = 0.3;
  auto records = synthetic(model, 1.0);
  for (size_t i = 0; i < records.size(); ++i) records[i].d_H *= 1.0 + 0.2 * std::sin(3.0 * i);
  ModulusFit fit = fit_modulus(records, ModulusFamily::loglog, 1.0);
  double tight = 0.0;
  ModulusFit unit = fit;
  unit.C = 1.0;
  for (const auto& r : records) tight = std::max(tight, r.d_H / evaluate_modulus(unit, r.epsilon / r.g_norm));
  EXPECT_NEAR(fit.envelope_C, tight, 1e-12 * tight);
  fit.C = fit.envelope_C;
  for (const auto& r : records) EXPECT_LE(r.d_H, evaluate_modulus(fit, r.epsilon / r.g_norm) * (1 + 1e-12));
}

TEST(FitModulus, ClampsBetaAndRejectsTooFewRecords) {
  ModulusFit model;
  model.family = ModulusFamily::loglog;
  model.C = 1.0;
  model.exponent = 3.0;
  const ModulusFit fit = fit_modulus(synthetic(model, 1.0), ModulusFamily::loglog, 1.0);
  EXPECT_TRUE(fit.clamped);
  EXPECT_NEAR(fit.unconstrained_exponent, 3.0, 1e-9);
  EXPECT_GT(fit.exponent, 0.0);
  EXPECT_LT(fit.exponent, 1.0);

  auto few = synthetic(model, 1.0);
  few.resize(4);
  EXPECT_THROW(fit_modulus(few, ModulusFamily::loglog, 1.0), Error);
  // Records outside the domain of omega do not count.
  auto outside = synthetic(model, 1.0);
  for (auto& r : outside) r.epsilon = 0.5 * r.g_norm;
  EXPECT_THROW(fit_modulus(outside, ModulusFamily::loglog, 1.0), Error);
  auto flagged = synthetic(model, 1.0);
  for (size_t i = 0; i < 8; ++i) flagged[i].flagged = true;
  EXPECT_THROW(fit_modulus(flagged, ModulusFamily::loglog, 1.0), Error);
}

TEST(Config, ValidationErrors) {
  auto c = translation_config();
  EXPECT_NO_THROW(validate_config(c));
  c.t_grid = {0.0, 0.02, 0.02};
  EXPECT_THROW(validate_config(c), Error);
  c = translation_config();
  c.obstacle_radius = 0.6;
  try {
    validate_config(c);
    FAIL() << "expected a config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("obstacle_clearance"), std::string::npos);
  }
  c = translation_config();
  c.data.kind = "spline";
  EXPECT_THROW(validate_config(c), Error);
  c = translation_config();
  c.t_grid.clear();
  EXPECT_THROW(validate_config(c), Error);
  EXPECT_EQ(parse_obstacle_family("radial_mode"), ObstacleFamily::radial_mode);
  EXPECT_THROW(parse_obstacle_family("shear"), Error);
  EXPECT_EQ(parse_modulus_family("log"), ModulusFamily::log);
}

TEST(BoundaryData, TangentialBumpWithoutFlux) {
  auto c = translation_config();
  auto space = std::make_shared<const P2Space>(
      std::make_shared<const Mesh>(triangulate(domain_at(c, 0.0), c.h_target)));
  const DirichletData g = boundary_data(c, *space);
  EXPECT_LE(boundary_flux(*space, g).relative(), 1e-12);
  double peak = 0.0;
  for (const auto& e : space->boundary_edges()) {
    for (int d : e.dofs) {
      const double s = c.domain.outer.project(space->dof_point(d)).param;
      const double f = (s - 0.05) / 0.4;
      const Vec2 v(g.gx[d], g.gy[d]);
      peak = std::max(peak, v.norm());
      if (e.tag != BoundaryTag::gamma || f <= 0.25 || f >= 0.75) EXPECT_EQ(v.norm(), 0.0);
    }
  }
  EXPECT_NEAR(peak, 1.0, 0.05);

  c.data.kind = "random_modes";
  const DirichletData r1 = boundary_data(c, *space), r2 = boundary_data(c, *space);
  EXPECT_EQ(r1.gx, r2.gx);
  c.seed = 2;
  EXPECT_NE(boundary_data(c, *space).gx, r1.gx);
}

TEST(Sweep, TranslationFamily) {
  const auto& rec = translation_sweep();
  ASSERT_EQ(rec.size(), 9u);
  EXPECT_EQ(rec[0].d_H, 0.0);
  EXPECT_LE(rec[0].epsilon, 1e-10 * rec[0].g_norm);
  for (size_t i = 1; i < rec.size(); ++i) {
    EXPECT_FALSE(rec[i].failed) << rec[i].reason;
    EXPECT_FALSE(rec[i].flagged);
    EXPECT_NEAR(rec[i].d_H, rec[i].t, 1e-3 * rec[i].t);
    EXPECT_GT(rec[i].epsilon, rec[i - 1].epsilon);
    EXPECT_GT(rec[i].F, 1.0);
  }
  const ModulusFit log_fit = fit_modulus(rec, ModulusFamily::log, 0.5);
  EXPECT_GE(log_fit.r_squared, 0.9);
  const ModulusFit loglog = fit_modulus(rec, ModulusFamily::loglog, 0.5);
  EXPECT_GT(loglog.exponent, 0.0);
  EXPECT_LT(loglog.exponent, 1.0);
  EXPECT_GT(loglog.envelope_C, 0.0);
}

TEST(Sweep, ContinuationEnergies) {
  const auto& rec = translation_sweep();
  const ContinuationReport rep = continuation_consistency(rec);
  EXPECT_TRUE(rep.monotone_12);
  EXPECT_TRUE(rep.monotone_21);
  EXPECT_TRUE(rep.vanishes_at_zero);
  for (size_t i = 1; i < rec.size(); ++i) {
    EXPECT_GE(rec[i].energy_12, rec[i - 1].energy_12);
    EXPECT_GE(rec[i].energy_21, rec[i - 1].energy_21);
  }
  EXPECT_LE(rec[0].energy_12, 1e-10);
  EXPECT_LE(rec[0].energy_21, 1e-10);
}

TEST(Sweep, QuadraticHomogeneityInData) {
  auto c = translation_config();
  c.t_grid = {0.0, 0.04};
  c.data.amplitude = 2.0;
  const auto doubled = run_stability_sweep(c);
  const auto& base = translation_sweep();
  EXPECT_NEAR(doubled[1].energy_12, 4.0 * base[4].energy_12, 1e-9 * base[4].energy_12);
  EXPECT_NEAR(doubled[1].energy_21, 4.0 * base[4].energy_21, 1e-9 * base[4].energy_21);
  EXPECT_NEAR(doubled[1].epsilon, 2.0 * base[4].epsilon, 1e-9 * base[4].epsilon);
  const auto r2 = continuation_consistency(doubled), r1 = continuation_consistency(base);
  EXPECT_NEAR(r2.normalized_12[1], r1.normalized_12[4], 1e-9 * r1.normalized_12[4]);
}

TEST(Sweep, DeterministicAcrossRunsAndWorkers) {
  auto c = translation_config();
  c.t_grid = {0.0, 0.03, 0.06};
  c.data.kind = "random_modes";
  c.seed = 7;
  const std::string a = csv_text(run_stability_sweep(c));
  c.jobs = 3;
  const std::string b = csv_text(run_stability_sweep(c));
  EXPECT_EQ(a, b);
  c.seed = 8;
  EXPECT_NE(csv_text(run_stability_sweep(c)), a);
}

TEST(Sweep, OtherFamilies) {
  auto c = translation_config();
  c.family = ObstacleFamily::dilation;
  c.t_grid = {0.0, 0.1, 0.2};
  auto rec = run_stability_sweep(c);
  EXPECT_NEAR(rec[1].d_H, 0.025, 1e-4);
  EXPECT_GT(rec[2].epsilon, rec[1].epsilon);
  c.family = ObstacleFamily::radial_mode;
  c.domain.M0 = 6.0;  // the mode bends the obstacle to rho0 kappa = 3.3
  c.t_grid = {0.0, 0.05, 0.1};
  rec = run_stability_sweep(c);
  EXPECT_NEAR(rec[2].d_H, 0.025, 1e-3);
  EXPECT_GT(rec[2].epsilon, rec[1].epsilon);
}

TEST(Sweep, FailedRecordsAreSkipped) {
  auto c = translation_config();
  c.t_grid = {0.0, 0.02};
  c.falloff = 1e-4;  // boundary nodes move alone and invert the first layer
  const auto rec = run_stability_sweep(c);
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_FALSE(rec[0].failed);
  EXPECT_TRUE(rec[1].failed);
  EXPECT_FALSE(rec[1].reason.empty());
  const std::string text = csv_text(rec);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(Persistence, CsvRoundTripAndSummary) {
  const auto& rec = translation_sweep();
  const auto dir = std::filesystem::temp_directory_path() / "stokeslab_test_experiments";
  std::filesystem::create_directories(dir);
  write_records_csv(dir / "sweep.csv", rec);
  const auto back = read_records_csv(dir / "sweep.csv");
  ASSERT_EQ(back.size(), rec.size());
  for (size_t i = 0; i < rec.size(); ++i) {
    EXPECT_EQ(back[i].t, rec[i].t);
    EXPECT_EQ(back[i].epsilon, rec[i].epsilon);
    EXPECT_EQ(back[i].energy_21, rec[i].energy_21);
    EXPECT_EQ(back[i].level, rec[i].level);
  }
  std::ifstream in(dir / "sweep.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,d_H,epsilon,energy_12,energy_21,F,level");

  const std::string summary = fit_summary({fit_modulus(rec, ModulusFamily::loglog, 0.5),
                                           fit_modulus(rec, ModulusFamily::log, 0.5)},
                                          continuation_consistency(rec));
  EXPECT_NE(summary.find("\"beta\""), std::string::npos);
  EXPECT_NE(summary.find("\"gamma\""), std::string::npos);
  write_plot_data(dir / "plot.dat", rec);
  std::ifstream plot(dir / "plot.dat");
  double x, y;
  int lines = 0;
  while (plot >> x >> y) ++lines;
  EXPECT_EQ(lines, 9);

  std::ofstream(dir / "bad.csv") << "t,d_H,epsilon,energy_12,energy_21,F,level\n0.1,0.2,x\n";
  EXPECT_THROW(read_records_csv(dir / "bad.csv"), Error);
  std::filesystem::remove_all(dir);
}
