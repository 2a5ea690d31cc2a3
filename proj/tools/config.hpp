#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "greenpot/experiments.hpp"
#include "json.hpp"

namespace greenpot::cli {

inline constexpr int kSchemaVersion = 1;

/// Fully resolved experiment configuration. The JSON form is the config file
/// format; it excludes the thread count, which never changes results.
struct ExperimentConfig {
  std::string experiment = "mlmc";  // example1 | example2 | greens | mlmc
  std::string kernel = "analytical";  // example2 also accepts "all"
  std::string output_dir = "results";

  Example1Setup example1;
  bool example1_costs = false;

  Example2Setup random;  // aperture model, functional, solver resolution
  MlmcConfig mlmc;
  std::vector<double> eps{0.002};

  std::string geometry = "square";
  Point2 source{0.3, 0.4};
  int grid = 64;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);

/// Overlays the keys present in `j` onto `base`. Unknown keys and type or
/// range errors throw ConfigError naming the field path.
ExperimentConfig apply_json(const nlohmann::json& j, ExperimentConfig base);

/// Parses a config file. A results file is accepted too: its embedded
/// "config" object is used. Syntax errors report line and column.
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base);

/// Writes via a temporary file in the same directory and renames it into place.
void write_atomic(const std::string& path, const std::string& contents);

std::vector<double> parse_double_list(const std::string& s, const char* what);
std::vector<int> parse_int_list(const std::string& s, const char* what);
Point2 parse_point(const std::string& s, const char* what);

}  // namespace greenpot::cli
