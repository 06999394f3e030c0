// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "condopt/opt_local.hpp"
#include "condopt/random.hpp"
#include "condopt/space.hpp"

namespace condopt {

/// Hyperparameters of both stages: the random partition of the predictor
/// space and the OPT placed on the response within each stopped block.
struct CondOptPrior {
  double rho = 0.5;                 ///< predictor stopping probability
  std::vector<double> dim_weights;  ///< predictor split weights per dimension; empty = uniform over splits
  OptPrior local;                   ///< response-side prior shared by every block
  int max_depth_x = 12;
  /// Nodes with at most this many points are forced terminal; 0 disables.
  std::uint32_t min_points = 0;

  void validate(const SampleSpace& space_x, const SampleSpace& space_y) const;
};

/// Paired predictor / response rows.
struct Dataset {
  PointMatrix x;
  PointMatrix y;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;

  std::size_t size() const noexcept { return x.rows(); }
};

enum class NodeKind : std::uint8_t {
  expanded,   ///< split further during fitting
  terminal,   ///< no candidate split, depth limit or min_points
  singleton,  ///< holds one point; its subtree follows from the prior
  empty,      ///< only the root of a fit on no data
};

/// Response-independent skeleton of a fit: every predictor region holding at
/// least one point, with the rows it holds. Reused by permutation refits.
class PredictorIndex {
 public:
  struct Node {
    RegionKey key = 0;
    int depth = 0;
    NodeKind kind = NodeKind::empty;
    std::uint32_t n = 0;
    std::uint32_t first_split = 0;
    std::uint32_t split_count = 0;
    std::uint64_t first_point = 0;
  };
  struct Split {
    std::uint32_t dim = 0;
    std::int32_t left = -1;  ///< child node, -1 when it holds no points
    std::int32_t right = -1;
  };

  /// Throws InputError for points outside space_x.
  static std::shared_ptr<const PredictorIndex> build(const SampleSpace& space_x, const CondOptPrior& prior,
                                                     const PointMatrix& x);

  const SampleSpace& space() const noexcept { return space_; }
  const KeyLayout& layout() const noexcept { return layout_; }
  const PointMatrix& x() const noexcept { return x_; }
  const CodeMatrix& codes() const noexcept { return codes_; }
  int max_depth() const noexcept { return max_depth_; }
  std::uint32_t min_points() const noexcept { return min_points_; }
  std::span<const double> dim_weights() const noexcept { return dim_weights_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const Split> splits(const Node& node) const noexcept {
    return {splits_.data() + node.first_split, node.split_count};
  }
  std::span<const std::uint32_t> points(const Node& node) const noexcept {
    return {points_.data() + node.first_point, node.n};
  }
  std::optional<std::size_t> find(RegionKey key) const;

  /// Terminal rule for any region (stored or not) holding n points.
  bool terminal(RegionKey key, int depth, std::uint32_t n) const noexcept;
  std::vector<std::size_t> candidate_dims(RegionKey key, int depth) const;

 private:
  PredictorIndex() = default;

  SampleSpace space_;
  KeyLayout layout_;
  PointMatrix x_;
  CodeMatrix codes_;
  int max_depth_ = 0;
  std::uint32_t min_points_ = 0;
  std::vector<double> dim_weights_;
  std::vector<Node> nodes_;
  std::vector<Split> splits_;
  std::vector<std::uint32_t> points_;
  std::unordered_map<RegionKey, std::int32_t, RegionKeyHash> lookup_;
};

/// A region of the predictor space relative to a fitted tree: a stored node,
/// an unstored region holding exactly one point, or an empty region.
struct NodeState {
  std::int32_t node = -1;
  std::int32_t single = -1;  ///< row of the lone point
  bool empty() const noexcept { return node < 0 && single < 0; }
};

/// Posterior selection weight of one split and the states of its children.
struct StateSplit {
  std::size_t dim = 0;
  double lambda = 0.0;
  NodeState left;
  NodeState right;
};

struct PosteriorSplit {
  std::size_t dim = 0;
  double lambda_post = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
};

struct PosteriorNode {
  RegionKey key = 0;
  int depth = 0;
  NodeKind kind = NodeKind::empty;
  std::uint32_t n = 0;
  double log_phi = 0.0;
  double log_m = 0.0;
  double rho_post = 1.0;
  std::vector<PosteriorSplit> splits;
};

struct FitOptions {
  unsigned threads = 1;
};

/// Exact posterior of the conditional model. Immutable after fitting; the
/// lazily built local posteriors are cached behind a mutex, so the tree may
/// be shared across threads.
class PosteriorTree {
 public:
  const SampleSpace& space_x() const noexcept { return index_->space(); }
  const SampleSpace& space_y() const noexcept { return space_y_; }
  const CondOptPrior& prior() const noexcept { return prior_; }
  const PredictorIndex& index() const noexcept { return *index_; }
  std::shared_ptr<const PredictorIndex> shared_index() const noexcept { return index_; }
  const PointMatrix& x() const noexcept { return index_->x(); }
  const PointMatrix& y() const noexcept { return y_; }
  const CodeMatrix& y_codes() const noexcept { return y_codes_; }
  const std::vector<std::string>& x_names() const noexcept { return x_names_; }
  const std::vector<std::string>& y_names() const noexcept { return y_names_; }
  std::size_t sample_size() const noexcept { return y_.rows(); }

  std::size_t size() const noexcept { return index_->size(); }
  PosteriorNode node(std::size_t i) const;
  PosteriorNode root() const { return node(0); }
  double log_phi(std::size_t i) const noexcept { return log_phi_[i]; }
  double log_m(std::size_t i) const noexcept { return log_m_[i]; }
  double rho_post(std::size_t i) const noexcept { return rho_post_[i]; }
  std::span<const double> lambda_post(std::size_t i) const noexcept {
    const auto& n = index_->node(i);
    return {lambda_post_.data() + n.first_split, n.split_count};
  }
  std::optional<std::size_t> find(const Region& region) const;
  Region region(std::size_t i) const { return index_->layout().decode(index_->node(i).key); }

  NodeState root_state() const noexcept { return NodeState{0, -1}; }
  /// State of any region within the depth limit.
  NodeState state(const Region& region) const;
  std::uint32_t state_count(const NodeState& s) const noexcept;
  double state_rho(const NodeState& s, RegionKey key, int depth) const noexcept;
  /// Candidate splits with posterior (or, off the data, prior) weights.
  void state_splits(const NodeState& s, RegionKey key, int depth, std::vector<StateSplit>& out) const;

  /// Posterior of the response OPT if partitioning stops at the region.
  std::shared_ptr<const LocalOptPosterior> local_posterior(const NodeState& s) const;
  std::shared_ptr<const LocalOptPosterior> local_posterior(std::size_t node) const {
    return local_posterior(NodeState{static_cast<std::int32_t>(node), -1});
  }
  const LocalOptPosterior& prior_local() const noexcept { return *prior_local_; }

  /// Local posteriors are cached until they hold about this many bytes;
  /// later ones are built on each request.
  void set_cache_budget(std::size_t bytes) const;

  /// Assembles a tree from stored node values, matched to the index by key.
  /// Throws InputError when they do not describe the index's nodes.
  static PosteriorTree from_values(std::shared_ptr<const PredictorIndex> index, const SampleSpace& space_y,
                                   const CondOptPrior& prior, const PointMatrix& y,
                                   std::span<const PosteriorNode> values);

  void set_names(std::vector<std::string> x_names, std::vector<std::string> y_names);

 private:
  friend PosteriorTree fit_responses(std::shared_ptr<const PredictorIndex>, const SampleSpace&,
                                     const CondOptPrior&, const PointMatrix&, const FitOptions&);
  PosteriorTree(std::shared_ptr<const PredictorIndex> index, const SampleSpace& space_y, const CondOptPrior& prior,
                const PointMatrix& y);
  std::shared_ptr<const LocalOptPosterior> build_local(std::span<const std::uint32_t> rows) const;

  std::shared_ptr<const PredictorIndex> index_;
  SampleSpace space_y_;
  CondOptPrior prior_;
  PointMatrix y_;
  CodeMatrix y_codes_;
  std::vector<std::string> x_names_;
  std::vector<std::string> y_names_;
  std::vector<double> log_m_;
  std::vector<double> log_phi_;
  std::vector<double> rho_post_;
  std::vector<double> lambda_post_;
  std::shared_ptr<const LocalOptPosterior> prior_local_;

  struct Cache {
    std::mutex mutex;
    std::unordered_map<std::int64_t, std::shared_ptr<const LocalOptPosterior>> entries;
    std::size_t held = 0;
    std::size_t budget = std::size_t{256} << 20;
  };
  std::unique_ptr<Cache> cache_;
};

PosteriorTree fit(const SampleSpace& space_x, const SampleSpace& space_y, const CondOptPrior& prior,
                  const Dataset& data, const FitOptions& options = {});

/// Fit with a prebuilt predictor index (the x side of `data` never changes).
PosteriorTree fit_responses(std::shared_ptr<const PredictorIndex> index, const SampleSpace& space_y,
                            const CondOptPrior& prior, const PointMatrix& y, const FitOptions& options = {});

// --- Summaries ----------------------------------------------------------------

struct HmapNode {
  RegionKey key = 0;
  int depth = 0;
  NodeState state;
  std::uint32_t n = 0;
  double rho_post = 1.0;
  std::int32_t split_dim = -1;  ///< -1 for a stopped block
  double lambda_post = 0.0;     ///< weight of the chosen split
  std::int32_t left = -1;
  std::int32_t right = -1;
};

/// Top-down modal partition: stop where rho_post >= 0.5, otherwise follow the
/// heaviest split (lowest dimension on ties).
struct HmapTree {
  SampleSpace space_x;
  KeyLayout layout;
  std::vector<HmapNode> nodes;  ///< root first

  std::vector<std::size_t> leaves() const;
  Region region(std::size_t i) const { return layout.decode(nodes[i].key); }
};

HmapTree hmap(const PosteriorTree& tree);

/// Posterior-mean conditional density of Y at one predictor point.
class ConditionalDensity {
 public:
  explicit ConditionalDensity(UniformMixture mixture) : mixture_(std::move(mixture)) {}
  /// Throws InputError for y outside the response space.
  double operator()(std::span<const double> y) const { return mixture_.density(y); }
  const UniformMixture& mixture() const noexcept { return mixture_; }

 private:
  UniformMixture mixture_;
};

/// Throws InputError for x outside the predictor space.
ConditionalDensity predictive(const PosteriorTree& tree, std::span<const double> x);
double predict_density(const PosteriorTree& tree, std::span<const double> x, std::span<const double> y);

struct SampledBlock {
  RegionKey key = 0;
  int depth = 0;
  NodeState state;
  std::uint64_t seed = 0;  ///< seeds the block's response density draw
};

/// One draw of the random predictor partition.
struct SampledPartition {
  std::vector<SampledBlock> blocks;
  std::vector<std::uint8_t> split_on;  ///< per predictor dimension: split somewhere

  /// Index of the block holding x.
  std::size_t block_of(const PosteriorTree& tree, std::span<const double> x) const;
};

SampledPartition sample_partition(const PosteriorTree& tree, Rng& rng);

/// Full posterior draw of the conditional density: a partition plus an
/// independent response density per block, drawn when first evaluated.
class SampledConditionalDensity {
 public:
  SampledConditionalDensity(const PosteriorTree& tree, SampledPartition partition);
  double operator()(std::span<const double> x, std::span<const double> y);
  const SampledPartition& partition() const noexcept { return partition_; }
  const PiecewiseDensity& block_density(std::size_t block);

 private:
  const PosteriorTree* tree_;
  SampledPartition partition_;
  std::vector<std::optional<PiecewiseDensity>> densities_;
};

SampledConditionalDensity sample_conditional_density(const PosteriorTree& tree, Rng& rng);

/// Share of `draws` sampled partitions that split on each predictor dimension.
std::vector<double> inclusion_probabilities(const PosteriorTree& tree, std::size_t draws, Rng& rng);

}  // namespace condopt
