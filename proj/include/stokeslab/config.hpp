#pragma once

#include "stokeslab/experiments.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace stokeslab {

struct ConfigKey {
  std::string section;
  std::string key;
  std::string default_value;
  std::string help;

  std::string fullname() const { return section + "." + key; }
  /// STOKESLAB_<SECTION>_<KEY>, upper case.
  std::string env_name() const;
};

/// Every recognised key with its default.
const std::vector<ConfigKey>& config_schema();

/// Flat sectioned key-value settings. Values are whitespace separated lists.
/// Getters throw ErrorKind::config naming the key and where its value came
/// from (file and line, environment variable, or default).
class Config {
 public:
  /// Defaults only.
  Config();
  static Config parse(std::istream& in, const std::string& source);
  static Config load(const std::filesystem::path& path);

  /// Applies STOKESLAB_<SECTION>_<KEY> variables for every schema key.
  void apply_environment();
  void set(const std::string& fullname, const std::string& value, const std::string& origin);

  std::string text(const std::string& fullname) const;
  double number(const std::string& fullname) const;
  int integer(const std::string& fullname) const;
  std::vector<double> numbers(const std::string& fullname) const;
  Point point(const std::string& fullname) const;
  std::vector<Point> points(const std::string& fullname) const;
  std::string origin(const std::string& fullname) const;

  /// Resolved settings, one `key = value` line per schema key, sections in schema order.
  std::string dump() const;

 private:
  struct Value {
    std::vector<std::string> words;
    std::string origin;
  };
  const Value& lookup(const std::string& fullname) const;
  [[noreturn]] void bad(const std::string& fullname, const std::string& what) const;

  std::map<std::string, Value> values_;
};

DomainSpec domain_from_config(const Config& config);
ExperimentConfig experiment_from_config(const Config& config);
StokesOptions stokes_options_from_config(const Config& config);

/// Data named by data.kind on a space: the Gamma data of the experiments, or
/// `poiseuille` (y(1 - y), 0) on the whole boundary, or `zero`.
DirichletData dirichlet_from_config(const Config& config, const P2Space& space, std::uint64_t seed);

}  // namespace stokeslab
