// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "condopt/random.hpp"
#include "condopt/space.hpp"

namespace condopt {

/// Hyperparameters of an optional Polya tree on one sample space.
struct OptPrior {
  double rho = 0.5;                  ///< stopping probability
  std::vector<double> dim_weights;   ///< split selection weight per dimension; empty = uniform
  double alpha_left = 0.5;           ///< Dirichlet pseudo-count of the left child
  double alpha_right = 0.5;          ///< and of the right child
  int max_depth = 12;

  /// Equal pseudo-counts make the prior mean uniform, which is what lets a
  /// one-point node be scored without recursing.
  bool symmetric() const noexcept { return alpha_left == alpha_right; }
  void validate(const SampleSpace& space) const;
};

/// Normalized selection probabilities over the splittable dimensions `dims`.
std::vector<double> selection_weights(std::span<const double> dim_weights, std::span<const std::size_t> dims);

/// Mixture of uniform densities: density(y) = sum over regions B that
/// contain y of mass(B) / mu(B). Posterior-mean densities of Polya-tree type
/// models are exactly of this form.
class UniformMixture {
 public:
  UniformMixture() = default;
  UniformMixture(const SampleSpace& space, const KeyLayout& layout);

  void add(RegionKey key, double mass);
  void add(const UniformMixture& other, double weight);

  double density(std::span<const double> y) const;
  double density_codes(const std::uint64_t* codes) const;
  double total_mass() const noexcept;
  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const std::pair<RegionKey, double>> entries() const noexcept { return entries_; }
  /// Approximate heap bytes held.
  std::size_t footprint() const noexcept;

 private:
  SampleSpace space_;
  KeyLayout layout_;
  std::unordered_map<RegionKey, std::size_t, RegionKeyHash> index_;
  std::vector<std::pair<RegionKey, double>> entries_;
  std::set<std::vector<int>> level_vectors_;
};

/// Piecewise-constant density drawn from an OPT: a binary tree of splits with
/// a constant density (w.r.t. the space's natural measure) on each leaf.
class PiecewiseDensity {
 public:
  struct Node {
    std::int32_t dim = -1;  ///< -1 for a leaf
    int shift = 0;          ///< code bit that selects the child
    std::int32_t left = -1;
    std::int32_t right = -1;
    int depth = 0;
    double density = 0.0;   ///< leaves only
  };

  PiecewiseDensity() = default;
  explicit PiecewiseDensity(SampleSpace space) : space_(std::move(space)) {}

  double operator()(std::span<const double> y) const;
  double at_codes(const std::uint64_t* codes) const noexcept;
  /// Sum of density x measure over the leaves.
  double integral() const noexcept;
  std::size_t leaf_count() const noexcept;
  const SampleSpace& space() const noexcept { return space_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }

 private:
  friend class LocalOptPosterior;
  SampleSpace space_;
  std::vector<Node> nodes_;
};

/// Posterior of an OPT after observing response points. Only regions holding
/// at least one point are stored; everything else is implicitly prior.
class LocalOptPosterior {
 public:
  struct Node {
    RegionKey key = 0;
    int depth = 0;
    std::uint32_t n = 0;
    double log_phi = 0.0;
    double rho_post = 1.0;
    std::uint32_t first_split = 0;
    std::uint32_t split_count = 0;
    /// Row of the lone point of an unexpanded one-point node, else -1.
    std::int32_t single_point = -1;
  };
  struct SplitStat {
    std::uint32_t dim = 0;
    std::uint32_t n_left = 0;
    double lambda_post = 0.0;
    std::int32_t left = -1;   ///< materialized child node, -1 if it holds no points
    std::int32_t right = -1;
  };
  /// Posterior parameters of one candidate split at some region.
  struct SplitParams {
    std::size_t dim = 0;
    double lambda = 0.0;
    double alpha_left = 0.0;
    double alpha_right = 0.0;
  };
  struct Params {
    double rho = 1.0;
    std::uint32_t n = 0;
    std::vector<SplitParams> splits;
  };

  /// Fits the posterior to `points` (rows of a matrix with one column per
  /// dimension of `space`). Throws InputError for points outside the space.
  LocalOptPosterior(const SampleSpace& space, const OptPrior& prior, const PointMatrix& points);
  LocalOptPosterior(const SampleSpace& space, const OptPrior& prior, CodeMatrix codes);

  const SampleSpace& space() const noexcept { return space_; }
  const OptPrior& prior() const noexcept { return prior_; }
  const KeyLayout& layout() const noexcept { return layout_; }
  std::size_t point_count() const noexcept { return codes_.rows(); }
  /// log marginal likelihood of all points (0 for no points).
  double log_marginal() const noexcept;

  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const SplitStat> splits(const Node& node) const noexcept {
    return {splits_.data() + node.first_split, node.split_count};
  }
  const Node* root() const noexcept { return root_ < 0 ? nullptr : &nodes_[static_cast<std::size_t>(root_)]; }
  const Node* find(const Region& region) const;

  /// Posterior stop probability, selection weights and pseudo-counts at any
  /// region within the depth limit, materialized or not.
  Params params(const Region& region) const;

  double mean_density(std::span<const double> y) const;
  const UniformMixture& mean() const noexcept { return mean_; }
  /// Approximate heap bytes held, including the mean mixture.
  std::size_t footprint() const noexcept;

  /// Direct simulation from the posterior.
  PiecewiseDensity sample(Rng& rng) const;

 private:
  struct Cursor {
    std::int32_t node = -1;
    std::int32_t single = -1;
    bool empty() const noexcept { return node < 0 && single < 0; }
  };
  struct SplitView {
    std::size_t dim;
    double lambda;
    double alpha_left;
    double alpha_right;
    Cursor left;
    Cursor right;
  };

  void fit();
  bool terminal(RegionKey key, int depth) const noexcept;
  double cursor_rho(const Cursor& c, RegionKey key, int depth) const noexcept;
  void expand(const Cursor& c, RegionKey key, int depth, std::vector<SplitView>& out) const;
  Cursor root_cursor() const noexcept;
  Cursor locate(RegionKey key) const;
  void build_mean();
  std::int32_t grow(PiecewiseDensity& out, RegionKey key, int depth, const Cursor& c, double mass, Rng& rng) const;

  SampleSpace space_;
  OptPrior prior_;
  KeyLayout layout_;
  CodeMatrix codes_;
  std::vector<Node> nodes_;
  std::vector<SplitStat> splits_;
  std::int32_t root_ = -1;
  std::unordered_map<RegionKey, std::int32_t, RegionKeyHash> index_;
  UniformMixture mean_;
};

/// log M of `ys` under the OPT prior.
double opt_log_marginal(const SampleSpace& space_y, const OptPrior& prior, const PointMatrix& ys);
LocalOptPosterior opt_posterior(const SampleSpace& space_y, const OptPrior& prior, const PointMatrix& ys);
double opt_mean_density(const LocalOptPosterior& post, std::span<const double> y);
PiecewiseDensity opt_sample_density(const LocalOptPosterior& post, Rng& rng);

}  // namespace condopt
