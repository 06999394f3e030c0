// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "condopt/condopt.hpp"

namespace condopt {

enum class TestDirection : std::uint8_t { y_given_x, x_given_y, min_of_both };

std::string to_string(TestDirection d);
/// Accepts "y|x", "x|y" and "min". Throws ConfigError otherwise.
TestDirection parse_direction(const std::string& text);

struct IndependenceOptions {
  std::size_t permutations = 1000;
  std::uint64_t seed = 0;
  TestDirection direction = TestDirection::y_given_x;
  unsigned threads = 1;
  std::size_t histogram_bins = 20;
};

struct IndependenceResult {
  double stat_observed = 1.0;  ///< posterior probability that the root does not split
  std::vector<double> null_stats;
  double p_value = 1.0;
  double bayes_factor = 0.0;   ///< evidence for dependence; +inf when the statistic is 0
  TestDirection direction = TestDirection::y_given_x;
  /// All predictor rows are identical, so the predictor side cannot split
  /// the data and the statistic carries no information.
  bool degenerate = false;
  std::vector<std::size_t> null_histogram;  ///< counts over equal-width bins of [0, 1]
};

/// Permutation test of independence between X and Y. Smaller statistics are
/// more extreme; p = (1 + #{null <= observed}) / (1 + permutations).
IndependenceResult independence_test(const SampleSpace& space_x, const SampleSpace& space_y, const Dataset& data,
                                     const CondOptPrior& prior, const IndependenceOptions& options);

/// (rho / (1 - rho)) * (1 / stat - 1).
double bayes_factor_from_stat(double rho, double stat);

/// log of [sum_j lambda_j prod_i Phi(child)] / M at the root, from the stored
/// marginals. Equals log bayes_factor_from_stat(rho, rho_post(root)).
double log_bayes_factor_direct(const PosteriorTree& tree);

/// Sum over test rows of log predict_density. Throws InputError for rows
/// outside the spaces.
double log_predictive_score(const PosteriorTree& tree, const Dataset& test);

}  // namespace condopt
