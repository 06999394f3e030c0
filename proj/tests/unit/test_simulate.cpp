// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <cmath>

#include "condopt/errors.hpp"
#include "condopt/simulate.hpp"

using namespace condopt;

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("scenarios are pure functions of name, size and seed") {
  for (const auto& name : scenario_names()) {
    const SimulatedData a = simulate(Scenario{name, 300, 42});
    const SimulatedData b = simulate(Scenario{name, 300, 42});
    const SimulatedData c = simulate(Scenario{name, 300, 43});
    CHECK(a.data.x == b.data.x);
    CHECK(a.data.y == b.data.y);
    CHECK_FALSE(a.data.y == c.data.y);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      CHECK(a.space_x.contains(a.data.x.row(i)));
      CHECK(a.space_y.contains(a.data.y.row(i)));
    }
  }
  CHECK_THROWS_AS(simulate(Scenario{"nope", 10, 1}), ConfigError);
  CHECK_THROWS_AS(simulate(Scenario{"ex1-beta-blocks", 0, 1}), ConfigError);
}

TEST_CASE("moments at n = 100000") {
  const std::size_t n = 100000;
  const double root_n = std::sqrt(static_cast<double>(n));
  SUBCASE("beta blocks") {
    const SimulatedData s = simulate(Scenario{"ex1-beta-blocks", n, 1});
    const auto x = s.data.x.column(0);
    // Beta(2,2): mean 1/2, sd sqrt(1/20)
    CHECK(std::abs(mean(x) - 0.5) <= 5 * std::sqrt(0.05) / root_n);
    std::vector<double> right;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > 0.5) right.push_back(s.data.y(i, 0));
    }
    // Beta(0.5,0.5): mean 1/2, sd sqrt(1/8)
    CHECK(std::abs(mean(right) - 0.5) <= 5 * std::sqrt(0.125 / static_cast<double>(right.size())));
  }
  SUBCASE("bivariate normal") {
    const SimulatedData s = simulate(Scenario{"ex2-bivariate-normal", n, 2});
    const auto x = s.data.x.column(0);
    const auto y = s.data.y.column(0);
    CHECK(std::abs(mean(x) - 0.6) <= 0.002);
    CHECK(std::abs(mean(y) - 0.4) <= 0.002);
    CHECK(std::abs(sd(x) - 0.1) <= 0.002);
    double cov = 0.0;
    const double mx = mean(x);
    const double my = mean(y);
    for (std::size_t i = 0; i < n; ++i) cov += (x[i] - mx) * (y[i] - my);
    cov /= static_cast<double>(n - 1);
    CHECK(std::abs(cov / (sd(x) * sd(y)) - 0.5) <= 0.01);
  }
  SUBCASE("binary Markov chain") {
    const SimulatedData s = simulate(Scenario{"ex3-markov-binary", n, 3});
    CHECK(std::abs(mean(s.data.x.column(0)) - 0.5) <= 5 * 0.5 / root_n);
    for (std::size_t d = 1; d < 30; ++d) {
      std::size_t same = 0;
      for (std::size_t i = 0; i < n; ++i) same += s.data.x(i, d) == s.data.x(i, d - 1);
      CHECK(std::abs(static_cast<double>(same) / static_cast<double>(n) - 0.7) <= 0.005);
    }
    // Y | (x5, x20, x30) = (1, 0, 1) ~ Beta(1, 6): mean 1/7
    std::vector<double> block;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.data.x(i, 4) == 1 && s.data.x(i, 19) == 0 && s.data.x(i, 29) == 1) block.push_back(s.data.y(i, 0));
    }
    const double sd_beta = std::sqrt(6.0 / (49.0 * 8.0));
    CHECK(std::abs(mean(block) - 1.0 / 7.0) <= 5 * sd_beta / std::sqrt(static_cast<double>(block.size())));
  }
  SUBCASE("independence scenario and its null") {
    const SimulatedData s = simulate(Scenario{"ex4-independence-test", n, 4});
    std::vector<double> first;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.data.x(i, 0) == 1 && s.data.x(i, 1) == 1 && s.data.x(i, 4) == 0) first.push_back(s.data.y(i, 0));
    }
    // Beta(4,4): sd 1/6
    CHECK(std::abs(sd(first) - 1.0 / 6.0) <= 0.01);
    const SimulatedData null = simulate(Scenario{"ex4-null", n, 4});
    const auto y = null.data.y.column(0);
    CHECK(std::abs(mean(y) - 0.5) <= 5 * std::sqrt(1.0 / 12.0) / root_n);
  }
}

TEST_CASE("markov chain helper") {
  Rng rng(1);
  const auto v = markov_binary(30, 1.0, rng);
  for (double x : v) CHECK(x == v[0]);
}
