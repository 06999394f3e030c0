// Apache License, Version 2.0, refer to LICENSE.txt
#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "condopt/errors.hpp"
#include "io.hpp"

using namespace condopt::cli;

namespace {

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    double v = 0.0;
    if (!parse_double(trim(part), v)) throw condopt::ConfigError("cannot parse predictor point '" + text + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional density estimation with optional Polya tree partitions"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> settings;
  unsigned threads = 0;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--set", settings, "override one setting, key=value (repeatable)");
  app.add_option("--threads", threads, "worker threads");

  std::string data;
  std::string model;
  std::string out;
  std::string svg;
  std::string scenario;
  std::string config_out;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> points;
  GridSpec grid;

  auto* fit = app.add_subcommand("fit", "fit the posterior and write the model");
  fit->add_option("--data", data, "training CSV")->required();
  fit->add_option("--out", out, "model JSON")->required();

  auto* grid_cmd = app.add_subcommand("grid", "evaluate predictive densities on a grid");
  grid_cmd->add_option("--model", model, "model JSON")->required();
  grid_cmd->add_option("--out", out, "output CSV")->required();
  grid_cmd->add_option("--x", points, "predictor point as comma separated values (repeatable)");
  grid_cmd->add_option("--x-grid", grid.x_grid, "cell midpoints per continuous predictor");
  grid_cmd->add_option("--y-resolution", grid.y_resolution, "cell midpoints per continuous response");

  auto* hmap_cmd = app.add_subcommand("hmap", "write the modal partition");
  hmap_cmd->add_option("--model", model, "model JSON")->required();
  hmap_cmd->add_option("--out", out, "output JSON")->required();
  hmap_cmd->add_option("--svg", svg, "SVG drawing for one or two predictors");

  auto* test = app.add_subcommand("test", "permutation test of independence");
  test->add_option("--data", data, "CSV")->required();
  test->add_option("--out", out, "result JSON")->required();

  auto* sim = app.add_subcommand("simulate", "generate a scenario dataset");
  sim->add_option("--scenario", scenario, "scenario name")->required();
  sim->add_option("--n", n, "rows")->required();
  sim->add_option("--seed", seed, "seed");
  sim->add_option("--out", out, "output CSV")->required();
  sim->add_option("--config-out", config_out, "write a matching config file");

  auto* logp = app.add_subcommand("logp", "log predictive score of held-out rows");
  logp->add_option("--model", model, "model JSON")->required();
  logp->add_option("--data", data, "test CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  return guarded(
      [&] {
        RunConfig config;
        if (!config_path.empty()) apply_file(config, config_path);
        for (const auto& s : settings) {
          const auto [key, value] = split_setting(s);
          apply_setting(config, key, value);
        }
        if (threads > 0) config.threads = threads;

        if (*fit) {
          cmd_fit(config, data, out, std::cout);
        } else if (*grid_cmd) {
          for (const auto& p : points) grid.xs.push_back(parse_point(p));
          cmd_grid(model, grid, out, std::cout);
        } else if (*hmap_cmd) {
          cmd_hmap(model, out, svg, std::cout);
        } else if (*test) {
          cmd_test(config, data, out, std::cout);
        } else if (*sim) {
          cmd_simulate(scenario, n, seed, out, config_out, std::cout);
        } else if (*logp) {
          cmd_logp(model, data, std::cout);
        }
      },
      std::cerr);
}
