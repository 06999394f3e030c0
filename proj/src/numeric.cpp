// Apache License, Version 2.0, refer to LICENSE.txt
#include "condopt/numeric.hpp"

#include <algorithm>

namespace condopt {

double log_sum_exp(std::span<const double> terms) noexcept {
  if (terms.empty()) return kNegInf;
  const double top = *std::max_element(terms.begin(), terms.end());
  if (top == kNegInf) return kNegInf;
  if (std::isinf(top)) return top;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

DirichletMultinomial2::DirichletMultinomial2(double a, double b, std::size_t max_count)
    : a_(a), b_(b), lg_a_(max_count + 1), lg_b_(max_count + 1), lg_ab_(max_count + 1) {
  for (std::size_t k = 0; k <= max_count; ++k) {
    lg_a_[k] = std::lgamma(a + static_cast<double>(k));
    lg_b_[k] = std::lgamma(b + static_cast<double>(k));
  }
  for (std::size_t k = 0; k <= max_count; ++k) lg_ab_[k] = std::lgamma(a + b + static_cast<double>(k));
  log_prior_beta_ = lg_a_[0] + lg_b_[0] - lg_ab_[0];
}

}  // namespace condopt
