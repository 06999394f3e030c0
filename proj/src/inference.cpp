// Apache License, Version 2.0, refer to LICENSE.txt
#include "condopt/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "condopt/errors.hpp"
#include "condopt/numeric.hpp"

namespace condopt {

std::string to_string(TestDirection d) {
  switch (d) {
    case TestDirection::y_given_x:
      return "y|x";
    case TestDirection::x_given_y:
      return "x|y";
    case TestDirection::min_of_both:
      return "min";
  }
  return "y|x";
}

TestDirection parse_direction(const std::string& text) {
  if (text == "y|x") return TestDirection::y_given_x;
  if (text == "x|y") return TestDirection::x_given_y;
  if (text == "min") return TestDirection::min_of_both;
  throw ConfigError("unknown test direction '" + text + "' (expected y|x, x|y or min)");
}

double bayes_factor_from_stat(double rho, double stat) {
  if (stat <= 0.0) return std::numeric_limits<double>::infinity();
  return rho / (1.0 - rho) * (1.0 / stat - 1.0);
}

double log_bayes_factor_direct(const PosteriorTree& tree) {
  const PredictorIndex& index = tree.index();
  const auto& root = index.node(0);
  if (root.kind != NodeKind::expanded) return 0.0;
  const auto splits = index.splits(root);
  std::vector<std::size_t> dims;
  for (const auto& s : splits) dims.push_back(s.dim);
  const std::vector<double> w = selection_weights(index.dim_weights(), dims);
  std::vector<double> terms(splits.size());
  for (std::size_t j = 0; j < splits.size(); ++j) {
    terms[j] = std::log(w[j]);
    if (splits[j].left >= 0) terms[j] += tree.log_phi(static_cast<std::size_t>(splits[j].left));
    if (splits[j].right >= 0) terms[j] += tree.log_phi(static_cast<std::size_t>(splits[j].right));
  }
  return log_sum_exp(terms) - tree.log_m(0);
}

double log_predictive_score(const PosteriorTree& tree, const Dataset& test) {
  if (test.x.rows() != test.y.rows()) throw InputError("test predictor and response row counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < test.x.rows(); ++i) {
    total += std::log(predict_density(tree, test.x.row(i), test.y.row(i)));
  }
  return total;
}

namespace {

CondOptPrior swapped(const CondOptPrior& p) {
  CondOptPrior s;
  s.rho = p.rho;
  s.dim_weights = p.local.dim_weights;
  s.max_depth_x = p.local.max_depth;
  s.min_points = p.min_points;
  s.local.rho = p.local.rho;
  s.local.dim_weights = p.dim_weights;
  s.local.alpha_left = p.local.alpha_left;
  s.local.alpha_right = p.local.alpha_right;
  s.local.max_depth = p.max_depth_x;
  return s;
}

PointMatrix take_rows(const PointMatrix& m, std::span<const std::uint32_t> order) {
  PointMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = m.row(order[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

IndependenceResult independence_test(const SampleSpace& space_x, const SampleSpace& space_y, const Dataset& data,
                                     const CondOptPrior& prior, const IndependenceOptions& options) {
  if (data.size() < 2) throw ContractError("the independence test needs at least two observations");
  if (options.permutations < 1) throw ContractError("the independence test needs at least one permutation");
  prior.validate(space_x, space_y);
  if (data.x.rows() != data.y.rows()) throw InputError("predictor and response row counts differ");

  const bool use_yx = options.direction != TestDirection::x_given_y;
  const bool use_xy = options.direction != TestDirection::y_given_x;
  const CondOptPrior prior_xy = swapped(prior);
  if (use_xy) prior_xy.validate(space_y, space_x);
  std::shared_ptr<const PredictorIndex> index_x;
  std::shared_ptr<const PredictorIndex> index_y;
  if (use_yx) index_x = PredictorIndex::build(space_x, prior, data.x);
  if (use_xy) index_y = PredictorIndex::build(space_y, prior_xy, data.y);

  // Pairing (x_i, y_perm[i]): Y|X permutes responses, X|Y the inverse on x.
  const auto statistic = [&](std::span<const std::uint32_t> perm) {
    double stat = 1.0;
    if (use_yx) {
      const PointMatrix y = perm.empty() ? data.y : take_rows(data.y, perm);
      stat = fit_responses(index_x, space_y, prior, y).rho_post(0);
    }
    if (use_xy) {
      PointMatrix x = data.x;
      if (!perm.empty()) {
        std::vector<std::uint32_t> inverse(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<std::uint32_t>(i);
        x = take_rows(data.x, inverse);
      }
      const double s = fit_responses(index_y, space_x, prior_xy, x).rho_post(0);
      stat = use_yx ? std::min(stat, s) : s;
    }
    return stat;
  };

  IndependenceResult result;
  result.direction = options.direction;
  result.stat_observed = statistic({});
  result.bayes_factor = bayes_factor_from_stat(prior.rho, result.stat_observed);
  result.degenerate = true;
  for (std::size_t i = 1; i < data.x.rows() && result.degenerate; ++i) {
    result.degenerate = std::equal(data.x.row(i).begin(), data.x.row(i).end(), data.x.row(0).begin());
  }

  const std::size_t count = options.permutations;
  result.null_stats.assign(count, 0.0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    try {
      std::vector<std::uint32_t> perm(data.size());
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        Rng rng = make_stream(options.seed, i + 1);
        std::iota(perm.begin(), perm.end(), 0U);
        shuffle(perm, rng);
        result.null_stats[i] = statistic(perm);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(count);
    }
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(count)));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t extreme = 0;
  for (double s : result.null_stats) extreme += s <= result.stat_observed ? 1 : 0;
  result.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + count);

  const std::size_t bins = std::max<std::size_t>(1, options.histogram_bins);
  result.null_histogram.assign(bins, 0);
  for (double s : result.null_stats) {
    const auto b = static_cast<std::size_t>(std::clamp(s, 0.0, 1.0) * static_cast<double>(bins));
    ++result.null_histogram[std::min(b, bins - 1)];
  }
  return result;
}

}  // namespace condopt
