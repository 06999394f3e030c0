// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <algorithm>

#include "condopt/errors.hpp"
#include "condopt/inference.hpp"
#include "condopt/simulate.hpp"

using namespace condopt;

TEST_CASE("Bayes factor arithmetic") {
  CHECK(bayes_factor_from_stat(0.5, 0.0384) == doctest::Approx(25.0417).epsilon(1e-4));
  CHECK(std::isinf(bayes_factor_from_stat(0.5, 0.0)));
  CHECK(bayes_factor_from_stat(0.25, 1.0) == 0.0);
}

TEST_CASE("Bayes factor identity on fitted trees") {
  for (const char* name : {"ex1-beta-blocks", "ex4-null", "flow-synthetic"}) {
    const SimulatedData sim = simulate(Scenario{name, 120, 2});
    CondOptPrior p;
    p.max_depth_x = sim.space_x.dim(0).kind == DimKind::binary ? 3 : 6;
    p.local.max_depth = 6;
    p.rho = 0.4;
    const PosteriorTree tree = fit(sim.space_x, sim.space_y, p, sim.data);
    const double q = tree.rho_post(0);
    REQUIRE(q > 1e-300);
    REQUIRE(q < 1.0 - 1e-6);
    const double via_stat = std::log(bayes_factor_from_stat(p.rho, q));
    const double direct = log_bayes_factor_direct(tree);
    CHECK(std::abs(via_stat - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("independence test: p-value formula and reproducibility") {
  const SimulatedData sim = simulate(Scenario{"ex4-independence-test", 150, 3});
  CondOptPrior p;
  p.max_depth_x = 3;
  IndependenceOptions o;
  o.permutations = 1;
  const IndependenceResult one = independence_test(sim.space_x, sim.space_y, sim.data, p, o);
  CHECK((one.p_value == 0.5 || one.p_value == 1.0));

  o.permutations = 30;
  o.seed = 17;
  const IndependenceResult a = independence_test(sim.space_x, sim.space_y, sim.data, p, o);
  o.threads = 3;
  const IndependenceResult b = independence_test(sim.space_x, sim.space_y, sim.data, p, o);
  CHECK(a.null_stats == b.null_stats);
  CHECK(a.stat_observed == b.stat_observed);
  const auto below = std::count_if(a.null_stats.begin(), a.null_stats.end(), [&](double s) { return s <= a.stat_observed; });
  CHECK(a.p_value == doctest::Approx((1.0 + static_cast<double>(below)) / 31.0).epsilon(1e-15));
  std::size_t hist = 0;
  for (auto c : a.null_histogram) hist += c;
  CHECK(hist == 30);
  CHECK(a.null_histogram.size() == 20);
  const PosteriorTree tree = fit(sim.space_x, sim.space_y, p, sim.data);
  CHECK(a.stat_observed == tree.rho_post(0));
  CHECK(a.bayes_factor == doctest::Approx(bayes_factor_from_stat(p.rho, a.stat_observed)));
}

TEST_CASE("independence test: directions") {
  const SimulatedData sim = simulate(Scenario{"ex1-beta-blocks", 200, 1});
  CondOptPrior p;
  p.max_depth_x = 6;
  p.local.max_depth = 6;
  IndependenceOptions o;
  o.permutations = 10;
  o.direction = TestDirection::x_given_y;
  const IndependenceResult xy = independence_test(sim.space_x, sim.space_y, sim.data, p, o);
  // X|Y is the same model with the roles of the spaces swapped.
  CondOptPrior swapped = p;
  const Dataset flipped{sim.data.y, sim.data.x, {}, {}};
  const PosteriorTree t = fit(sim.space_y, sim.space_x, swapped, flipped);
  CHECK(xy.stat_observed == t.rho_post(0));
  o.direction = TestDirection::min_of_both;
  const IndependenceResult both = independence_test(sim.space_x, sim.space_y, sim.data, p, o);
  o.direction = TestDirection::y_given_x;
  const IndependenceResult yx = independence_test(sim.space_x, sim.space_y, sim.data, p, o);
  CHECK(both.stat_observed == std::min(xy.stat_observed, yx.stat_observed));
  CHECK(parse_direction("x|y") == TestDirection::x_given_y);
  CHECK(to_string(TestDirection::min_of_both) == "min");
  CHECK_THROWS_AS(parse_direction("sideways"), ConfigError);
}

TEST_CASE("independence test: constant predictors are flagged") {
  Dataset d{PointMatrix(0, 2), PointMatrix(0, 1), {}, {}};
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    d.x.append_row(std::vector<double>{1.0, 0.0});
    d.y.append_row(std::vector<double>{uniform01(rng)});
  }
  CondOptPrior p;
  p.max_depth_x = 2;
  IndependenceOptions o;
  o.permutations = 5;
  const IndependenceResult r = independence_test(SampleSpace::binary_cube(2), SampleSpace::unit_cube(1), d, p, o);
  CHECK(r.degenerate);
  for (double s : r.null_stats) CHECK(s == r.stat_observed);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("log predictive score") {
  const SimulatedData train = simulate(Scenario{"ex1-beta-blocks", 300, 1});
  const SimulatedData test = simulate(Scenario{"ex1-beta-blocks", 40, 2});
  const PosteriorTree tree = fit(train.space_x, train.space_y, CondOptPrior{}, train.data);
  CHECK(log_predictive_score(tree, Dataset{PointMatrix(0, 1), PointMatrix(0, 1), {}, {}}) == 0.0);
  Dataset first{PointMatrix(0, 1), PointMatrix(0, 1), {}, {}};
  Dataset second = first;
  double direct = 0.0;
  for (std::size_t i = 0; i < test.data.size(); ++i) {
    Dataset& part = i < 15 ? first : second;
    part.x.append_row(test.data.x.row(i));
    part.y.append_row(test.data.y.row(i));
    direct += std::log(predict_density(tree, test.data.x.row(i), test.data.y.row(i)));
  }
  const double whole = log_predictive_score(tree, test.data);
  CHECK(std::abs(whole - (log_predictive_score(tree, first) + log_predictive_score(tree, second))) <=
        1e-10 * std::abs(whole));
  CHECK(std::abs(whole - direct) <= 1e-10 * std::abs(whole));

  const PosteriorTree empty =
      fit(train.space_x, train.space_y, CondOptPrior{}, Dataset{PointMatrix(0, 1), PointMatrix(0, 1), {}, {}});
  CHECK(log_predictive_score(empty, test.data) == 0.0);
  CHECK_THROWS_AS(log_predictive_score(tree, Dataset{PointMatrix(1, std::vector<double>{0.5}), PointMatrix(1, std::vector<double>{2.0}), {}, {}}),
                  InputError);
}
