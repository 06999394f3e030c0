// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "condopt/condopt.hpp"
#include "config.hpp"

namespace condopt::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kIoError = 4, kInternalError = 5 };

/// Runs `body`, reporting any exception on `err` and mapping it to an exit code.
int guarded(const std::function<void()>& body, std::ostream& err);

struct LoadedData {
  Dataset data;
  SampleSpace space_x;
  SampleSpace space_y;
};

/// Reads the configured columns of a CSV file and builds the sample spaces
/// (declared bounds, else the observed range).
LoadedData load_dataset(const RunConfig& config, const std::string& path);

/// Reads a test file holding the model's columns; rows must lie in its spaces.
Dataset load_test_data(const PosteriorTree& tree, const std::string& path);

PosteriorTree load_model(const std::string& path);

struct GridSpec {
  std::vector<std::vector<double>> xs;  ///< explicit predictor points
  std::size_t x_grid = 0;               ///< or this many cell midpoints per continuous predictor
  std::size_t y_resolution = 256;       ///< cell midpoints per continuous response dimension
};

void cmd_fit(const RunConfig& config, const std::string& data_csv, const std::string& model_out, std::ostream& out);
void cmd_grid(const std::string& model_path, const GridSpec& spec, const std::string& out_csv, std::ostream& out);
void cmd_hmap(const std::string& model_path, const std::string& out_json, const std::string& svg_path,
              std::ostream& out);
void cmd_test(const RunConfig& config, const std::string& data_csv, const std::string& out_json, std::ostream& out);
void cmd_simulate(const std::string& scenario, std::size_t n, std::uint64_t seed, const std::string& out_csv,
                  const std::string& config_out, std::ostream& out);
void cmd_logp(const std::string& model_path, const std::string& test_csv, std::ostream& out);

/// SVG drawing of the hMAP leaves for one or two predictor dimensions;
/// empty for more.
std::string hmap_svg(const HmapTree& tree);

}  // namespace condopt::cli
