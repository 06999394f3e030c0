// Apache License, Version 2.0, refer to LICENSE.txt
#include "condopt/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "condopt/errors.hpp"

namespace condopt {

std::vector<std::string> scenario_names() {
  return {"ex1-beta-blocks", "ex2-bivariate-normal", "ex3-markov-binary",
          "ex4-independence-test", "ex4-null", "flow-synthetic"};
}

std::vector<double> markov_binary(std::size_t dims, double persistence, Rng& rng) {
  std::vector<double> x(dims);
  if (dims == 0) return x;
  x[0] = bernoulli(rng, 0.5) ? 1.0 : 0.0;
  for (std::size_t i = 1; i < dims; ++i) x[i] = bernoulli(rng, persistence) ? x[i - 1] : 1.0 - x[i - 1];
  return x;
}

namespace {

std::vector<std::string> numbered(const std::string& prefix, std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

SimulatedData beta_blocks(std::size_t n, Rng& rng) {
  SimulatedData out{Dataset{PointMatrix(n, 1), PointMatrix(n, 1), {"x"}, {"y"}}, SampleSpace::unit_cube(1),
                    SampleSpace::unit_cube(1)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = beta_draw(rng, 2.0, 2.0);
    double y = 0.0;
    if (x < 0.25) {
      y = beta_draw(rng, 30.0, 20.0);
    } else if (x <= 0.5) {
      y = beta_draw(rng, 10.0, 30.0);
    } else {
      y = beta_draw(rng, 0.5, 0.5);
    }
    out.data.x(i, 0) = x;
    out.data.y(i, 0) = y;
  }
  return out;
}

SimulatedData bivariate_normal(std::size_t n, Rng& rng) {
  Dataset data{PointMatrix(n, 1), PointMatrix(n, 1), {"x"}, {"y"}};
  // sd 0.1 on both margins and covariance 0.005, i.e. correlation 0.5.
  const double rho = 0.5;
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = normal_draw(rng);
    const double z2 = normal_draw(rng);
    data.x(i, 0) = 0.6 + 0.1 * z1;
    data.y(i, 0) = 0.4 + 0.1 * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
  }
  const SampleSpace sx({empirical_dimension(data.x.column(0))});
  const SampleSpace sy({empirical_dimension(data.y.column(0))});
  return SimulatedData{std::move(data), sx, sy};
}

SimulatedData markov_scenario(std::size_t n, Rng& rng) {
  constexpr std::size_t dims = 30;
  SimulatedData out{Dataset{PointMatrix(n, dims), PointMatrix(n, 1), numbered("x", dims), {"y"}},
                    SampleSpace::binary_cube(dims), SampleSpace::unit_cube(1)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> x = markov_binary(dims, 0.7, rng);
    std::copy(x.begin(), x.end(), out.data.x.row(i).begin());
    // Active predictors are the 5th, 20th and 30th.
    const bool a5 = x[4] == 1.0;
    const bool a20 = x[19] == 1.0;
    const bool a30 = x[29] == 1.0;
    double y = 0.0;
    if (a5 && !a20 && a30) {
      y = beta_draw(rng, 1.0, 6.0);
    } else if (!a5 && a20) {
      y = beta_draw(rng, 12.0, 16.0);
    } else {
      y = beta_draw(rng, 3.0, 4.0);
    }
    out.data.y(i, 0) = y;
  }
  return out;
}

SimulatedData independence_scenario(std::size_t n, Rng& rng, bool dependent) {
  constexpr std::size_t dims = 10;
  SimulatedData out{Dataset{PointMatrix(n, dims), PointMatrix(n, 1), numbered("x", dims), {"y"}},
                    SampleSpace::binary_cube(dims), SampleSpace::unit_cube(1)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> x = markov_binary(dims, 0.7, rng);
    std::copy(x.begin(), x.end(), out.data.x.row(i).begin());
    const bool first = x[0] == 1.0 && x[1] == 1.0 && x[4] == 0.0;
    const bool second = x[4] == 1.0 && x[7] == 0.0 && x[9] == 0.0;
    // The two patterns disagree on the 5th predictor, so at most one holds.
    if (first && second) throw ContractError("response patterns overlap");
    double y = 0.0;
    if (dependent && first) {
      y = beta_draw(rng, 4.0, 4.0);
    } else if (dependent && second) {
      y = beta_draw(rng, 0.5, 0.5);
    } else {
      y = uniform01(rng);
    }
    out.data.y(i, 0) = y;
  }
  return out;
}

SimulatedData flow_synthetic(std::size_t n, Rng& rng) {
  SimulatedData out{Dataset{PointMatrix(n, 2), PointMatrix(n, 2), {"fsc_h", "fsc_w"}, {"cd4", "cd8"}},
                    SampleSpace::unit_cube(2), SampleSpace::unit_cube(2)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = beta_draw(rng, 2.0, 2.0);
    const double x2 = beta_draw(rng, 2.0, 3.0);
    double y1 = 0.0;
    double y2 = 0.0;
    if (x2 >= 0.5) {
      // Two populations whose balance drifts with x1.
      if (bernoulli(rng, 0.2 + 0.6 * x1)) {
        y1 = beta_draw(rng, 12.0, 4.0);
        y2 = beta_draw(rng, 3.0, 10.0);
      } else {
        y1 = beta_draw(rng, 3.0, 10.0);
        y2 = beta_draw(rng, 12.0, 4.0);
      }
    } else if (x1 < 0.5) {
      y1 = beta_draw(rng, 2.0, 6.0);
      y2 = beta_draw(rng, 2.0, 6.0);
    } else {
      y1 = beta_draw(rng, 8.0, 8.0);
      y2 = beta_draw(rng, 6.0, 2.0);
    }
    out.data.x(i, 0) = x1;
    out.data.x(i, 1) = x2;
    out.data.y(i, 0) = y1;
    out.data.y(i, 1) = y2;
  }
  return out;
}

}  // namespace

SimulatedData simulate(const Scenario& scenario) {
  if (scenario.n == 0) throw ConfigError("scenario sample size must be positive");
  Rng rng = make_stream(scenario.seed, 0);
  const std::string& name = scenario.name;
  if (name == "ex1-beta-blocks") return beta_blocks(scenario.n, rng);
  if (name == "ex2-bivariate-normal") return bivariate_normal(scenario.n, rng);
  if (name == "ex3-markov-binary") return markov_scenario(scenario.n, rng);
  if (name == "ex4-independence-test") return independence_scenario(scenario.n, rng, true);
  if (name == "ex4-null") return independence_scenario(scenario.n, rng, false);
  if (name == "flow-synthetic") return flow_synthetic(scenario.n, rng);
  throw ConfigError("unknown scenario '" + name + "'");
}

}  // namespace condopt
