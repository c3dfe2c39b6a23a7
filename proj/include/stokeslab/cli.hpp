#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stokeslab {

inline constexpr const char* tool_version = "0.1.0";

/// Exit codes: 0 success, 1 computation or validation failure, 2 usage or
/// configuration error. `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string version = tool_version;
  std::string started;
  std::filesystem::path output_directory;
  std::vector<std::string> arguments;
};

/// Writes manifest.json through a temporary file and a rename.
void write_manifest(const RunManifest& manifest);

}  // namespace stokeslab
