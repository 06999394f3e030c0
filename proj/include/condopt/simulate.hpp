// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "condopt/condopt.hpp"

namespace condopt {

/// Named generator with its sample size and seed.
struct Scenario {
  std::string name;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

/// A generated dataset together with the sample spaces it is declared on.
struct SimulatedData {
  Dataset data;
  SampleSpace space_x;
  SampleSpace space_y;
};

/// Scenario names understood by simulate():
///   ex1-beta-blocks        X ~ Beta(2,2); Y | X from one of three Beta laws by X block
///   ex2-bivariate-normal   (X, Y) bivariate normal, spaces from the observed range
///   ex3-markov-binary      30 binary predictors on a persistent Markov chain
///   ex4-independence-test  10 binary predictors; Y law depends on two predictor patterns
///   ex4-null               ex4 predictors with Y ~ Unif[0,1] drawn independently
///   flow-synthetic         2-D predictor and 2-D response on [0,1]^4, blockwise modes
std::vector<std::string> scenario_names();

/// Pure function of (name, n, seed). Throws ConfigError for an unknown name
/// or n = 0.
SimulatedData simulate(const Scenario& scenario);

/// Binary Markov chain of `dims` steps: first value Bernoulli(0.5), then each
/// value repeats the previous one with probability `persistence`.
std::vector<double> markov_binary(std::size_t dims, double persistence, Rng& rng);

}  // namespace condopt
