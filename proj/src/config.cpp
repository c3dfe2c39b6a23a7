#include "stokeslab/config.hpp"

#include "stokeslab/error.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace stokeslab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end;
}

bool in_schema(const std::string& fullname) {
  const auto& schema = config_schema();
  return std::any_of(schema.begin(), schema.end(), [&](const ConfigKey& k) { return k.fullname() == fullname; });
}

// Section and key of every assignment, by line, for error messages. The
// values themselves come from the CLI11 INI reader.
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string section, line;
  for (int n = 1; std::getline(in, line); ++n) {
    line = trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::string key = trim(line.substr(0, line.find('=')));
    lines.emplace(section.empty() ? key : section + "." + key, n);
  }
  return lines;
}

BoundaryCurve curve_from(const Config& c, const std::string& prefix, const std::string& shape) {
  if (shape == "circle") return BoundaryCurve::circle(c.point(prefix + "_center"), c.number(prefix + "_radius"));
  if (shape == "ellipse") {
    const auto ax = c.numbers(prefix + "_axes");
    if (ax.size() != 2) fail(ErrorKind::config, prefix + "_axes: expected two semi-axes (" + c.origin(prefix + "_axes") + ")");
    return BoundaryCurve::ellipse(c.point(prefix + "_center"), ax[0], ax[1], c.number(prefix + "_angle"));
  }
  if (shape == "radial_mode")
    return BoundaryCurve::radial_mode(c.point(prefix + "_center"), c.number(prefix + "_radius"),
                                      c.number(prefix + "_amplitude"), c.integer(prefix + "_mode"));
  if (shape == "polygon") {
    const auto v = c.points(prefix + "_vertices");
    return BoundaryCurve::polygon(v);
  }
  if (shape == "curve") return read_curve(c.text(prefix + "_file"));
  fail(ErrorKind::config, prefix + ": unknown shape '" + shape + "' (" + c.origin(prefix) +
                              "); expected circle, ellipse, radial_mode, polygon or curve");
}

}  // namespace

std::string ConfigKey::env_name() const {
  std::string s = "STOKESLAB_" + section + "_" + key;
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema{
      {"domain", "outer", "circle", "outer boundary: circle, ellipse, radial_mode, polygon or curve"},
      {"domain", "outer_center", "0 0", "center of an analytic outer curve"},
      {"domain", "outer_radius", "1", "radius (circle, radial_mode)"},
      {"domain", "outer_axes", "1 0.5", "semi-axes a b (ellipse)"},
      {"domain", "outer_angle", "0", "rotation (ellipse)"},
      {"domain", "outer_amplitude", "0.1", "relative amplitude (radial_mode)"},
      {"domain", "outer_mode", "3", "angular mode (radial_mode)"},
      {"domain", "outer_vertices", "0 0 2 0 2 1 0 1", "x y pairs, counterclockwise (polygon)"},
      {"domain", "outer_file", "outer.curve", "curve file with `s x y` lines (curve)"},
      {"domain", "gamma", "0.05 0.45", "accessible arc as begin end curve parameters"},
      {"domain", "anchor", "0.25", "curve parameter of P0"},
      {"domain", "rho0", "0.5", "a-priori length scale"},
      {"domain", "M0", "3", "regularity constant"},
      {"domain", "M1", "20", "area constant"},
      {"domain", "alpha", "1", "Hoelder exponent"},
      {"domain", "obstacle", "circle", "none, circle, ellipse, radial_mode, polygon or curve"},
      {"domain", "obstacle_center", "0 0", ""},
      {"domain", "obstacle_radius", "0.25", ""},
      {"domain", "obstacle_axes", "0.3 0.2", ""},
      {"domain", "obstacle_angle", "0", ""},
      {"domain", "obstacle_amplitude", "0.1", ""},
      {"domain", "obstacle_mode", "3", ""},
      {"domain", "obstacle_vertices", "-0.2 -0.2 0.2 -0.2 0.2 0.2 -0.2 0.2", ""},
      {"domain", "obstacle_file", "obstacle.curve", ""},
      {"mesh", "h_target", "0.15", "target edge length of the base mesh"},
      {"mesh", "level", "1", "uniform refinements of the base mesh (--refine)"},
      {"data", "kind", "bump", "bump, random_modes, poiseuille or zero"},
      {"data", "amplitude", "1", "peak tangential speed of the bump"},
      {"data", "modes", "4", "Fourier modes for random_modes"},
      {"solver", "flux_projection_tolerance", "1e-8", "relative flux projected away; larger is rejected"},
      {"solver", "residual_tolerance", "1e-8", "records above this residual are flagged"},
      {"sweep", "family", "translation", "translation, dilation or radial_mode"},
      {"sweep", "direction", "0 1", "translation direction"},
      {"sweep", "mode", "3", "angular mode of the radial_mode family"},
      {"sweep", "t_grid", "0 0.01 0.02 0.03 0.04 0.05 0.06 0.07 0.08", "strictly increasing perturbation grid"},
      {"sweep", "falloff", "0.6", "distance over which interior nodes follow the obstacle"},
      {"sweep", "max_depth", "5", "subdivision depth of the difference-set energy"},
      {"sweep", "jobs", "1", "worker threads (--jobs)"},
      {"fit", "beta_min", "0.01", "loglog exponent is clamped to [beta_min, 1 - beta_min]"},
      {"fit", "zero_tolerance", "1e-10", "continuation energies at d_H = 0 must not exceed this"},
      {"three_spheres", "center", "0.625 0", ""},
      {"three_spheres", "radii", "0.05 0.1 0.2", "r1 r2 r3"},
      {"three_spheres", "theta_star", "0.54587759367", "r2 < theta_star r3 is required"},
      {"three_spheres", "margin_factor", "1", "boundary margin of B_r3 in units of h_max"},
      {"three_spheres", "solutions", "20", "random_modes solutions, seeds seed .. seed + n - 1"},
      {"smallness", "rho", "0.01 0.02 0.04 0.08", "ball radii"},
      {"smallness", "centers", "0.6 0 -0.6 0 0 0.6 0 -0.6", "x y pairs"},
      {"smallness", "s", "2", "balls need B_rho inside E at distance s rho"},
      {"run", "seed", "1", "seed of random_modes data (--seed)"},
  };
  return schema;
}

Config::Config() {
  for (const auto& k : config_schema()) values_[k.fullname()] = {split_words(k.default_value), "default"};
}

Config Config::parse(std::istream& in, const std::string& source) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto lines = key_lines(text);
  auto where = [&](const std::string& name) {
    const auto it = lines.find(name);
    return it == lines.end() ? source : source + ":" + std::to_string(it->second);
  };
  std::istringstream body(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(body);
  } catch (const CLI::Error& e) {
    fail(ErrorKind::config, source + ": " + e.what());
  }
  Config c;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string name = item.fullname();
    if (!in_schema(name)) fail(ErrorKind::config, where(name) + ": unknown key '" + name + "'");
    std::string value;
    for (const auto& w : item.inputs) value += (value.empty() ? "" : " ") + trim(w);
    c.set(name, value, where(name));
  }
  // The INI reader drops `key =` lines; an empty value is an error, not a default.
  for (const auto& [name, line] : lines) {
    if (!in_schema(name)) fail(ErrorKind::config, source + ":" + std::to_string(line) + ": unknown key '" + name + "'");
    if (c.values_.at(name).origin == "default")
      fail(ErrorKind::config, source + ":" + std::to_string(line) + ": " + name + " has no value");
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot read config file " + path.string());
  return parse(in, path.string());
}

void Config::apply_environment() {
  for (const auto& k : config_schema())
    if (const char* v = std::getenv(k.env_name().c_str())) set(k.fullname(), v, "environment " + k.env_name());
}

void Config::set(const std::string& fullname, const std::string& value, const std::string& origin) {
  require(in_schema(fullname), ErrorKind::config, origin + ": unknown key '" + fullname + "'");
  auto words = split_words(value);
  for (auto& w : words)
    if (w.size() >= 2 && (w.front() == '"' || w.front() == '\'') && w.back() == w.front()) w = w.substr(1, w.size() - 2);
  require(!words.empty(), ErrorKind::config, origin + ": " + fullname + " has no value");
  values_[fullname] = {std::move(words), origin};
}

const Config::Value& Config::lookup(const std::string& fullname) const {
  const auto it = values_.find(fullname);
  require(it != values_.end(), ErrorKind::invariant_violation, "config key '" + fullname + "' is not in the schema");
  return it->second;
}

void Config::bad(const std::string& fullname, const std::string& what) const {
  fail(ErrorKind::config, lookup(fullname).origin + ": " + fullname + ": " + what);
}

std::string Config::origin(const std::string& fullname) const { return lookup(fullname).origin; }

std::string Config::text(const std::string& fullname) const {
  const auto& v = lookup(fullname);
  if (v.words.size() != 1) bad(fullname, "expected a single word");
  return v.words[0];
}

std::vector<double> Config::numbers(const std::string& fullname) const {
  std::vector<double> out;
  for (const auto& w : lookup(fullname).words) {
    double x;
    if (!parse_double(w, x)) bad(fullname, "expected a number, got '" + w + "'");
    out.push_back(x);
  }
  return out;
}

double Config::number(const std::string& fullname) const {
  const auto v = numbers(fullname);
  if (v.size() != 1) bad(fullname, "expected a single number");
  return v[0];
}

int Config::integer(const std::string& fullname) const {
  const double v = number(fullname);
  if (v != std::floor(v) || std::abs(v) > 1e9) bad(fullname, "expected an integer");
  return static_cast<int>(v);
}

std::vector<Point> Config::points(const std::string& fullname) const {
  const auto v = numbers(fullname);
  if (v.size() % 2 != 0) bad(fullname, "expected x y pairs");
  std::vector<Point> out;
  for (size_t i = 0; i < v.size(); i += 2) out.emplace_back(v[i], v[i + 1]);
  return out;
}

Point Config::point(const std::string& fullname) const {
  const auto p = points(fullname);
  if (p.size() != 1) bad(fullname, "expected one x y pair");
  return p[0];
}

std::string Config::dump() const {
  std::ostringstream out;
  std::string section;
  for (const auto& k : config_schema()) {
    if (k.section != section) {
      out << (section.empty() ? "" : "\n") << "[" << k.section << "]\n";
      section = k.section;
    }
    out << k.key << " =";
    for (const auto& w : lookup(k.fullname()).words) out << ' ' << w;
    out << '\n';
  }
  return out.str();
}

DomainSpec domain_from_config(const Config& c) {
  DomainSpec d{curve_from(c, "domain.outer", c.text("domain.outer")), std::nullopt, ArcInterval{}, 0.0, 1.0, 1.0, 1.0, 1.0};
  const auto gamma = c.numbers("domain.gamma");
  if (gamma.size() != 2) fail(ErrorKind::config, c.origin("domain.gamma") + ": domain.gamma: expected begin end");
  d.gamma = {gamma[0], gamma[1]};
  d.anchor = c.number("domain.anchor");
  d.rho0 = c.number("domain.rho0");
  d.M0 = c.number("domain.M0");
  d.M1 = c.number("domain.M1");
  d.alpha = c.number("domain.alpha");
  const std::string obstacle = c.text("domain.obstacle");
  if (obstacle != "none") d.obstacle = curve_from(c, "domain.obstacle", obstacle);
  return d;
}

StokesOptions stokes_options_from_config(const Config& c) {
  StokesOptions o;
  o.flux_projection_tolerance = c.number("solver.flux_projection_tolerance");
  return o;
}

ExperimentConfig experiment_from_config(const Config& c) {
  ExperimentConfig e;
  e.domain = domain_from_config(c);
  require(e.domain.obstacle.has_value(), ErrorKind::config,
          c.origin("domain.obstacle") + ": domain.obstacle: a sweep needs an obstacle");
  const std::string shape = c.text("domain.obstacle");
  if (shape != "circle")
    fail(ErrorKind::config, c.origin("domain.obstacle") + ": domain.obstacle: sweep families start from a circle");
  e.obstacle_center = c.point("domain.obstacle_center");
  e.obstacle_radius = c.number("domain.obstacle_radius");
  try {
    e.family = parse_obstacle_family(c.text("sweep.family"));
  } catch (const Error& err) {
    fail(ErrorKind::config, c.origin("sweep.family") + ": sweep.family: " + err.what());
  }
  e.direction = c.point("sweep.direction");
  if (e.direction.norm() == 0.0) fail(ErrorKind::config, c.origin("sweep.direction") + ": sweep.direction is zero");
  e.mode = c.integer("sweep.mode");
  e.t_grid = c.numbers("sweep.t_grid");
  e.data.kind = c.text("data.kind");
  e.data.amplitude = c.number("data.amplitude");
  e.data.modes = c.integer("data.modes");
  e.h_target = c.number("mesh.h_target");
  e.level = c.integer("mesh.level");
  e.falloff = c.number("sweep.falloff");
  const double seed = c.number("run.seed");
  if (seed < 0 || seed != std::floor(seed)) fail(ErrorKind::config, c.origin("run.seed") + ": run.seed: expected a nonnegative integer");
  e.seed = static_cast<std::uint64_t>(seed);
  e.jobs = c.integer("sweep.jobs");
  e.residual_tolerance = c.number("solver.residual_tolerance");
  e.max_depth = c.integer("sweep.max_depth");
  return e;
}

DirichletData dirichlet_from_config(const Config& c, const P2Space& space, std::uint64_t seed) {
  const std::string kind = c.text("data.kind");
  if (kind == "zero") return zero_dirichlet(space);
  if (kind == "poiseuille") {
    const double a = c.number("data.amplitude");
    return interpolate_dirichlet(space, [a](const Point& x) { return Vec2(a * x.y() * (1.0 - x.y()), 0.0); });
  }
  if (kind != "bump" && kind != "random_modes")
    fail(ErrorKind::config, c.origin("data.kind") + ": data.kind: unknown kind '" + kind +
                                "' (bump, random_modes, poiseuille, zero)");
  ExperimentConfig e;
  e.domain = domain_from_config(c);
  e.data.kind = kind;
  e.data.amplitude = c.number("data.amplitude");
  e.data.modes = c.integer("data.modes");
  e.seed = seed;
  return boundary_data(e, space);
}

}  // namespace stokeslab
