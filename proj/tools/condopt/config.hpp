// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condopt/condopt.hpp"

namespace condopt::cli {

/// Settings of one run. Filled from defaults, then a key=value file, then
/// --set overrides, each layer replacing what the previous one set.
struct RunConfig {
  std::vector<std::string> x_columns;
  std::vector<std::string> y_columns;
  std::map<std::string, DimKind> types;
  std::map<std::string, std::pair<double, double>> bounds;

  CondOptPrior prior;
  std::optional<int> max_depth_x;  ///< unset: 12 for continuous predictors, 4 otherwise
  std::optional<int> max_depth_y;
  std::string profile = "default";  ///< "flow" makes both depths 10

  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t permutations = 1000;
  std::string direction = "y|x";
  std::size_t draws = 1000;

  /// Depths resolved against the profile and predictor types.
  CondOptPrior resolved_prior() const;
};

/// Applies one key=value setting. Throws ConfigError on unknown keys or
/// malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses "key=value" (used for --set).
std::pair<std::string, std::string> split_setting(const std::string& text);

/// Reads a config file: one key=value per line, '#' starts a comment.
void apply_file(RunConfig& config, const std::string& path);

/// Writes the settings that reproduce `config` as a config file body.
std::string render_config(const RunConfig& config);

}  // namespace condopt::cli
