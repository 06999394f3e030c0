// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace condopt {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLn2 = 0.69314718055994530942;

/// log(exp(a) + exp(b)), exact when either side is -inf.
inline double log_add(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double log_sum_exp(std::span<const double> terms) noexcept;

/// log of a probability in [0,1]; log(0) = -inf.
inline double safe_log(double p) noexcept { return p > 0.0 ? std::log(p) : kNegInf; }

/// Two-category Dirichlet-multinomial factor log[B(a + nl, b + nr) / B(a, b)],
/// tabulated over counts (left + right <= max_count) so the hot loop never
/// calls lgamma.
class DirichletMultinomial2 {
 public:
  DirichletMultinomial2() = default;
  DirichletMultinomial2(double a, double b, std::size_t max_count);

  double log_factor(std::uint32_t left, std::uint32_t right) const noexcept {
    return lg_a_[left] + lg_b_[right] - lg_ab_[left + right] - log_prior_beta_;
  }
  std::size_t max_count() const noexcept { return lg_a_.empty() ? 0 : lg_a_.size() - 1; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }

 private:
  double a_ = 0.5;
  double b_ = 0.5;
  double log_prior_beta_ = 0.0;
  std::vector<double> lg_a_;
  std::vector<double> lg_b_;
  std::vector<double> lg_ab_;
};

}  // namespace condopt
