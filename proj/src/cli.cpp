#include "stokeslab/cli.hpp"

#include "stokeslab/config.hpp"
#include "stokeslab/continuation.hpp"
#include "stokeslab/error.hpp"
#include "stokeslab/extension.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace stokeslab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<int> refine;
  std::vector<std::string> args;
  // subcommand specific
  std::string curve_a, curve_b;
  std::string csv;
  std::optional<double> g_norm, rho0;
};

class Run {
 public:
  Run(const Options& o, std::string command, std::ostream& out, std::ostream& err)
      : opt_(o), command_(std::move(command)), out_(out), err_(err) {
    if (!o.config.empty()) cfg_ = Config::load(o.config);
    cfg_.apply_environment();
    if (o.seed) cfg_.set("run.seed", std::to_string(*o.seed), "--seed");
    if (o.refine) cfg_.set("mesh.level", std::to_string(*o.refine), "--refine");
    if (o.jobs) cfg_.set("sweep.jobs", std::to_string(*o.jobs), "--jobs");
  }

  const Config& cfg() const { return cfg_; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }
  bool has_out() const { return !opt_.out.empty(); }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg_.number("run.seed")); }

  // Output directory with its manifest; must precede every result file.
  fs::path output(bool required) {
    if (!has_out()) {
      require(!required, ErrorKind::config, command_ + " writes result files and needs --out");
      return {};
    }
    if (!manifest_written_) {
      fs::create_directories(opt_.out);
      RunManifest m;
      m.command = command_;
      m.config_path = opt_.config;
      m.seed = seed();
      m.output_directory = opt_.out;
      m.arguments = opt_.args;
      const std::time_t now = std::time(nullptr);
      std::ostringstream ts;
      ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
      m.started = ts.str();
      write_manifest(m);
      std::ofstream(fs::path(opt_.out) / "resolved.cfg") << cfg_.dump();
      manifest_written_ = true;
    }
    return opt_.out;
  }

  std::shared_ptr<const P2Space> space(const DomainSpec& d) const {
    Mesh m = refine(triangulate(d, cfg_.number("mesh.h_target")), cfg_.integer("mesh.level"));
    return std::make_shared<const P2Space>(std::make_shared<const Mesh>(std::move(m)));
  }

  StokesSolution solve(std::shared_ptr<const P2Space> space, std::uint64_t seed) const {
    return solve_dirichlet(space, dirichlet_from_config(cfg_, *space, seed), {}, stokes_options_from_config(cfg_));
  }

  const Options& opt() const { return opt_; }

 private:
  Options opt_;
  std::string command_;
  std::ostream& out_;
  std::ostream& err_;
  Config cfg_;
  bool manifest_written_ = false;
};

std::string fmt_g(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int cmd_validate(Run& run) {
  const DomainSpec d = domain_from_config(run.cfg());
  const ValidationReport rep = validate_domain(d);
  std::ostringstream table;
  table << std::left << std::setw(22) << "hypothesis" << std::setw(14) << "measured" << std::setw(14) << "required"
        << std::setw(14) << "margin" << "status\n";
  for (const auto& c : rep.checks)
    table << std::setw(22) << c.id << std::setw(14) << fmt_g(c.measured) << std::setw(14) << fmt_g(c.required)
          << std::setw(14) << fmt_g(c.margin) << (c.passed ? "pass" : "FAIL") << '\n';
  run.out() << table.str();
  if (run.has_out()) std::ofstream(run.output(false) / "validation.txt") << table.str();
  return rep.passed() ? 0 : 1;
}

int cmd_solve(Run& run) {
  const fs::path dir = run.output(true);
  const DomainSpec d = domain_from_config(run.cfg());
  const auto space = run.space(d);
  const DirichletData g = dirichlet_from_config(run.cfg(), *space, run.seed());
  const StokesSolution sol = solve_dirichlet(space, g, {}, stokes_options_from_config(run.cfg()));
  const EnergyEstimate est = energy_estimate_check(sol, g, {}, d.rho0);
  write_mesh(dir / "mesh.msh", space->mesh());
  write_solution(dir / "velocity.txt", dir / "pressure.txt", sol);
  std::ostringstream s;
  s << "triangles " << space->mesh().triangle_count() << "\n"
    << "residual " << fmt_g(sol.residual, 3) << "\n"
    << "divergence " << fmt_g(sol.divergence, 3) << "\n"
    << "flux_removed " << fmt_g(sol.flux_removed, 3) << "\n"
    << "energy_ratio " << fmt_g(est.ratio) << "\n";
  std::ofstream(dir / "solve.txt") << s.str();
  run.out() << s.str();
  return 0;
}

int cmd_measure(Run& run) {
  const fs::path dir = run.output(true);
  const DomainSpec d = domain_from_config(run.cfg());
  const auto space = run.space(d);
  const StokesSolution sol = run.solve(space, run.seed());
  auto gamma = std::make_shared<const BoundaryTraceSpace>(space, std::set{BoundaryTag::gamma});
  const CauchyData c = measure_cauchy(sol, gamma, d.rho0);
  write_stress_trace(dir / "psi.txt", *gamma, c.psi);
  std::ostringstream s;
  s << "F " << fmt_g(c.F, 17) << "\n"
    << "g_half " << fmt_g(h_half_norm(*gamma, c.g, d.rho0), 17) << "\n"
    << "psi_minus_half " << fmt_g(h_minus_half_norm(*gamma, c.psi, d.rho0), 17) << "\n";
  std::ofstream(dir / "cauchy.txt") << s.str();
  run.out() << s.str();
  return 0;
}

json parsed_summary(const std::vector<ModulusFit>& fits, const ContinuationReport& rep) {
  return json::parse(fit_summary(fits, rep));
}

std::vector<ModulusFit> both_fits(const std::vector<StabilityRecord>& records, double rho0, const FitOptions& o,
                                  json& errors) {
  std::vector<ModulusFit> fits;
  for (auto family : {ModulusFamily::loglog, ModulusFamily::log}) {
    try {
      fits.push_back(fit_modulus(records, family, rho0, o));
    } catch (const Error& e) {
      errors[to_string(family)] = e.what();
    }
  }
  return fits;
}

int cmd_sweep(Run& run) {
  ExperimentConfig e = experiment_from_config(run.cfg());
  validate_config(e);
  const fs::path dir = run.output(true);
  const auto records = run_stability_sweep(e);
  int failed = 0;
  for (const auto& r : records) {
    if (r.failed) {
      ++failed;
      run.err() << "record t = " << fmt_g(r.t, 17) << " failed: " << r.reason << '\n';
    } else if (r.flagged) {
      run.err() << "record t = " << fmt_g(r.t, 17) << " flagged: " << r.reason << '\n';
    }
  }
  write_records_csv(dir / "sweep.csv", records);
  FitOptions fo;
  fo.beta_min = run.cfg().number("fit.beta_min");
  json errors = json::object();
  const auto fits = both_fits(records, e.domain.rho0, fo, errors);
  json summary = parsed_summary(fits, continuation_consistency(records, run.cfg().number("fit.zero_tolerance")));
  const StabilityRecord* any = nullptr;
  for (const auto& r : records)
    if (!r.failed) any = &r;
  summary["g_norm"] = any ? any->g_norm : 0.0;
  summary["F"] = any ? any->F : 0.0;
  summary["rho0"] = e.domain.rho0;
  summary["level"] = e.level;
  summary["records"] = records.size() - failed;
  summary["failed"] = failed;
  if (!errors.empty()) summary["fit_errors"] = errors;
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  write_plot_data(dir / "plot.dat", records);
  run.out() << summary.dump(2) << '\n';
  return 0;
}

int cmd_fit(Run& run) {
  require(!run.opt().csv.empty(), ErrorKind::config, "fit needs --csv");
  const fs::path csv = run.opt().csv;
  const auto records_in = read_records_csv(csv);
  std::optional<double> g_norm = run.opt().g_norm, rho0 = run.opt().rho0;
  const fs::path side = csv.parent_path() / "summary.json";
  if ((!g_norm || !rho0) && fs::exists(side)) {
    std::ifstream in(side);
    const json s = json::parse(in, nullptr, false);
    require(!s.is_discarded(), ErrorKind::io, side.string() + ": not valid JSON");
    if (!g_norm && s.contains("g_norm")) g_norm = s["g_norm"].get<double>();
    if (!rho0 && s.contains("rho0")) rho0 = s["rho0"].get<double>();
  }
  require(g_norm.has_value(), ErrorKind::config,
          "fit needs |g|: pass --g-norm or keep the summary.json written by sweep next to the CSV");
  if (!rho0) rho0 = run.cfg().number("domain.rho0");
  auto records = records_in;
  for (auto& r : records) r.g_norm = *g_norm;
  FitOptions fo;
  fo.beta_min = run.cfg().number("fit.beta_min");
  json errors = json::object();
  const auto fits = both_fits(records, *rho0, fo, errors);
  json summary = parsed_summary(fits, continuation_consistency(records, run.cfg().number("fit.zero_tolerance")));
  if (!errors.empty()) summary["fit_errors"] = errors;
  if (run.has_out()) std::ofstream(run.output(false) / "fit.json") << summary.dump(2) << '\n';
  run.out() << summary.dump(2) << '\n';
  if (fits.empty()) {
    run.err() << "error: no modulus family could be fitted\n";
    return 1;
  }
  return 0;
}

int cmd_three_spheres(Run& run) {
  const DomainSpec d = domain_from_config(run.cfg());
  const auto space = run.space(d);
  const auto radii = run.cfg().numbers("three_spheres.radii");
  require(radii.size() == 3, ErrorKind::config, run.cfg().origin("three_spheres.radii") + ": three_spheres.radii: expected r1 r2 r3");
  ThreeSpheresOptions o;
  o.theta_star = run.cfg().number("three_spheres.theta_star");
  o.margin_factor = run.cfg().number("three_spheres.margin_factor");
  const Point c = run.cfg().point("three_spheres.center");
  const int n = run.cfg().integer("three_spheres.solutions");
  require(n >= 1, ErrorKind::config, "three_spheres.solutions must be at least 1");
  Config cfg = run.cfg();
  cfg.set("data.kind", "random_modes", "probe-3spheres");
  std::ostringstream table;
  table << "seed N1 N2 N3 delta_hat\n";
  std::vector<double> deltas;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = run.seed() + static_cast<std::uint64_t>(i);
    const auto sol = solve_dirichlet(space, dirichlet_from_config(cfg, *space, seed), {}, stokes_options_from_config(cfg));
    const auto rep = three_spheres_probe(sol, c, radii[0], radii[1], radii[2], o);
    deltas.push_back(rep.delta_hat);
    table << seed << ' ' << fmt_g(rep.N1, 17) << ' ' << fmt_g(rep.N2, 17) << ' ' << fmt_g(rep.N3, 17) << ' '
          << fmt_g(rep.delta_hat, 17) << '\n';
  }
  const FamilySummary s = summarize(deltas);
  if (run.has_out()) std::ofstream(run.output(false) / "three_spheres.txt") << table.str();
  run.out() << table.str() << "delta_hat min " << fmt_g(s.min) << " median " << fmt_g(s.median) << " max "
            << fmt_g(s.max) << '\n';
  return 0;
}

int cmd_smallness(Run& run) {
  const DomainSpec d = domain_from_config(run.cfg());
  const auto sol = run.solve(run.space(d), run.seed());
  const auto rep = smallness_probe(sol, run.cfg().numbers("smallness.rho"), run.cfg().points("smallness.centers"), d.rho0,
                                   run.cfg().number("smallness.s"));
  std::ostringstream table;
  table << "x y rho R\n";
  for (const auto& s : rep.samples)
    table << fmt_g(s.center.x(), 17) << ' ' << fmt_g(s.center.y(), 17) << ' ' << fmt_g(s.rho, 17) << ' '
          << fmt_g(s.R, 17) << '\n';
  if (run.has_out()) std::ofstream(run.output(false) / "smallness.txt") << table.str();
  run.out() << table.str() << "skipped " << rep.skipped << "\nfit A " << fmt_g(rep.fit.A) << " B " << fmt_g(rep.fit.B)
            << " r_squared " << fmt_g(rep.fit.r_squared) << " points " << rep.fit.points << '\n';
  return 0;
}

int cmd_extend(Run& run) {
  const fs::path dir = run.output(true);
  const DomainSpec d = domain_from_config(run.cfg());
  const BoxGeometry box = build_box(d);
  const ExtendedDomain ext = mesh_extended_domain(d, box, run.cfg().number("mesh.h_target"), run.cfg().integer("mesh.level"));
  const auto sol = run.solve(ext.inner, run.seed());
  const ExtensionResult r = extend_cauchy_data(ext, sol);
  write_extension(dir, ext, r);
  run.out() << "eta " << fmt_g(r.phi.eta, 17) << "\nphi_norm " << fmt_g(r.phi.phi_norm, 17) << "\nbound_ratio "
            << fmt_g(r.phi.bound_ratio, 17) << "\ninterface_residual " << fmt_g(r.phi.interface_residual, 3) << '\n';
  return 0;
}

int cmd_hausdorff(Run& run) {
  require(!run.opt().curve_a.empty() && !run.opt().curve_b.empty(), ErrorKind::config, "hausdorff needs --a and --b");
  const HausdorffResult h = hausdorff_distance(read_curve(run.opt().curve_a), read_curve(run.opt().curve_b));
  const std::string line = fmt_g(h.distance) + "\n";
  if (run.has_out()) std::ofstream(run.output(false) / "hausdorff.txt") << line;
  run.out() << line;
  return 0;
}

}  // namespace

void write_manifest(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["timestamps"] = {{"started", m.started}};
  j["output_directory"] = m.output_directory.string();
  j["arguments"] = m.arguments;
  const fs::path final_path = m.output_directory / "manifest.json";
  const fs::path tmp = m.output_directory / ".manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    out.close();
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + tmp.string());
  }
  fs::rename(tmp, final_path);
}

constexpr const char* usage =
    "usage: stokeslab [--config FILE] [--out DIR] [--jobs N] [--seed N] [--refine N] <command> [options]\n"
    "commands: validate solve measure sweep fit probe-3spheres probe-smallness extend hausdorff\n";

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stokes inverse obstacle stability laboratory", "stokeslab"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", tool_version);
  Options o;
  o.args = args;
  app.add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "output directory");
  app.add_option("--jobs", o.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "seed of random boundary data");
  app.add_option("--refine", o.refine, "uniform refinement level")->check(CLI::NonNegativeNumber);

  using Handler = int (*)(Run&);
  std::vector<std::pair<CLI::App*, Handler>> commands;
  auto add = [&](const char* name, const char* help, Handler h) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    commands.emplace_back(sub, h);
    return sub;
  };
  add("validate", "check the a-priori hypotheses of the configured domain", cmd_validate);
  add("solve", "solve the Dirichlet problem; writes mesh, velocity, pressure", cmd_solve);
  add("measure", "solve and measure Cauchy data on Gamma", cmd_measure);
  add("sweep", "obstacle stability sweep; writes sweep.csv, summary.json, plot.dat", cmd_sweep);
  CLI::App* fit = add("fit", "fit both modulus families to a sweep CSV", cmd_fit);
  fit->add_option("--csv", o.csv, "sweep CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--g-norm", o.g_norm, "|g|_{1/2} of the sweep data (default: summary.json next to the CSV)");
  fit->add_option("--rho0", o.rho0, "length scale (default: summary.json, then domain.rho0)");
  add("probe-3spheres", "three-spheres exponents over random boundary data", cmd_three_spheres);
  add("probe-smallness", "propagation-of-smallness ratios and fit", cmd_smallness);
  add("extend", "extend the Cauchy data across Gamma0 and certify Phi", cmd_extend);
  CLI::App* h = add("hausdorff", "Hausdorff distance of two curve files", cmd_hausdorff);
  h->add_option("--a", o.curve_a, "first curve")->required()->check(CLI::ExistingFile);
  h->add_option("--b", o.curve_b, "second curve")->required()->check(CLI::ExistingFile);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << tool_version << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << usage << "run 'stokeslab --help' for the full option list\n";
    return 2;
  }

  for (const auto& [sub, handler] : commands) {
    if (!sub->parsed()) continue;
    try {
      Run run(o, sub->get_name(), out, err);
      return handler(run);
    } catch (const Error& e) {
      err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
      return e.kind() == ErrorKind::config ? 2 : 1;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}

}  // namespace stokeslab
