// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

// Exhaustive reference for tiny problems. Every predictor partition tree and
// every response tree is listed explicitly with its prior probability, and
// each tree's likelihood is a product of Dirichlet-multinomial factors
// (rising factorials, no log-gamma) and uniform leaf densities. Nothing here
// shares code with the library.

#include <cstdint>
#include <vector>

namespace oracle {

struct Instance {
  int dx = 1;                    ///< binary predictor dimensions
  bool binary_response = false;  ///< response {0,1}; otherwise [0,1]
  int depth_x = 1;
  int depth_y = 1;
  double rho = 0.5;
  double rho_y = 0.5;
  double a = 0.5;
  double b = 0.5;
  std::vector<double> wx;  ///< predictor selection weights; empty = uniform
  std::vector<std::vector<int>> x;
  std::vector<double> y;
};

struct Result {
  double phi = 0.0;
  double stop = 0.0;                ///< contribution of trees that stop at the root
  std::vector<int> split_dims;      ///< candidate dimensions at the root, ascending
  std::vector<double> split;        ///< contribution of trees splitting the root on each
};

/// Marginal likelihood of all pairs, decomposed by the root decision.
Result evaluate(const Instance& inst);

/// Marginal likelihood of responses under the response OPT alone.
double local_marginal(const Instance& inst, const std::vector<double>& ys);

/// Number of predictor partition trees the enumeration visits.
std::size_t partition_tree_count(const Instance& inst);

}  // namespace oracle
