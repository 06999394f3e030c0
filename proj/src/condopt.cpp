// Apache License, Version 2.0, refer to LICENSE.txt
#include "condopt/condopt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "condopt/errors.hpp"
#include "condopt/numeric.hpp"
#include "detail/opt_engine.hpp"

namespace condopt {

void CondOptPrior::validate(const SampleSpace& space_x, const SampleSpace& space_y) const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("predictor stopping probability must lie in [0, 1]");
  if (max_depth_x < 0) throw ConfigError("max_depth_x must be nonnegative");
  if (!dim_weights.empty()) {
    if (dim_weights.size() != space_x.dims()) {
      throw ConfigError("expected " + std::to_string(space_x.dims()) + " predictor selection weights, got " +
                        std::to_string(dim_weights.size()));
    }
    for (double w : dim_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("selection weights must be positive and finite");
    }
  }
  local.validate(space_y);
  // Both layouts must fit in a key.
  KeyLayout(space_x, max_depth_x);
  KeyLayout(space_y, local.max_depth);
}

// --- PredictorIndex ---------------------------------------------------------

namespace {

class IndexBuilder {
 public:
  IndexBuilder(const PredictorIndex& index, std::vector<PredictorIndex::Node>& nodes,
               std::vector<PredictorIndex::Split>& splits, std::vector<std::uint32_t>& points,
               std::unordered_map<RegionKey, std::int32_t, RegionKeyHash>& lookup)
      : index_(index), nodes_(nodes), splits_(splits), points_(points), lookup_(lookup) {}

  void run(std::uint32_t n) {
    arena_.resize(static_cast<std::size_t>(n) * (static_cast<std::size_t>(index_.max_depth()) + 2));
    for (std::uint32_t i = 0; i < n; ++i) arena_[i] = i;
    visit(index_.layout().root(), 0, 0, n, n);
  }

 private:
  std::int32_t visit(RegionKey key, int depth, std::size_t at, std::uint32_t n, std::size_t top) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    PredictorIndex::Node node;
    node.key = key;
    node.depth = depth;
    node.n = n;
    node.first_point = points_.size();
    points_.insert(points_.end(), arena_.begin() + static_cast<std::ptrdiff_t>(at),
                   arena_.begin() + static_cast<std::ptrdiff_t>(at + n));
    lookup_.emplace(key, id);
    if (index_.terminal(key, depth, n)) {
      node.kind = NodeKind::terminal;
      nodes_.push_back(node);
      return id;
    }
    if (n == 1) {
      node.kind = NodeKind::singleton;
      nodes_.push_back(node);
      return id;
    }
    node.kind = NodeKind::expanded;
    nodes_.push_back(node);

    const std::vector<std::size_t> dims = index_.candidate_dims(key, depth);
    std::vector<PredictorIndex::Split> mine(dims.size());
    const KeyLayout& layout = index_.layout();
    const CodeMatrix& codes = index_.codes();
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const std::size_t d = dims[i];
      const int shift = layout.shift(key, d);
      // Stable two-pass partition keeps rows ascending in every node.
      std::uint32_t nl = 0;
      for (std::size_t j = at; j < at + n; ++j) nl += ((codes(arena_[j], d) >> shift) & 1U) == 0 ? 1U : 0U;
      std::size_t l = top;
      std::size_t r = top + nl;
      for (std::size_t j = at; j < at + n; ++j) {
        const std::uint32_t p = arena_[j];
        if ((codes(p, d) >> shift) & 1U) {
          arena_[r++] = p;
        } else {
          arena_[l++] = p;
        }
      }
      mine[i].dim = static_cast<std::uint32_t>(d);
      mine[i].left = child(layout.child(key, d, 0), depth + 1, top, nl, top + n);
      mine[i].right = child(layout.child(key, d, 1), depth + 1, top + nl, n - nl, top + n);
    }
    nodes_[static_cast<std::size_t>(id)].first_split = static_cast<std::uint32_t>(splits_.size());
    nodes_[static_cast<std::size_t>(id)].split_count = static_cast<std::uint32_t>(mine.size());
    splits_.insert(splits_.end(), mine.begin(), mine.end());
    return id;
  }

  std::int32_t child(RegionKey key, int depth, std::size_t at, std::uint32_t n, std::size_t top) {
    if (n == 0) return -1;
    if (const auto it = lookup_.find(key); it != lookup_.end()) return it->second;
    return visit(key, depth, at, n, top);
  }

  const PredictorIndex& index_;
  std::vector<PredictorIndex::Node>& nodes_;
  std::vector<PredictorIndex::Split>& splits_;
  std::vector<std::uint32_t>& points_;
  std::unordered_map<RegionKey, std::int32_t, RegionKeyHash>& lookup_;
  std::vector<std::uint32_t> arena_;
};

}  // namespace

std::shared_ptr<const PredictorIndex> PredictorIndex::build(const SampleSpace& space_x, const CondOptPrior& prior,
                                                           const PointMatrix& x) {
  if (x.rows() > 0 && x.cols() != space_x.dims()) {
    throw InputError("expected " + std::to_string(space_x.dims()) + " predictor columns, got " +
                     std::to_string(x.cols()));
  }
  if (x.rows() >= std::uint64_t{1} << 31) throw InputError("too many rows");
  std::shared_ptr<PredictorIndex> index(new PredictorIndex());
  index->space_ = space_x;
  index->layout_ = KeyLayout(space_x, prior.max_depth_x);
  index->x_ = x;
  index->codes_ = encode_points(space_x, x);
  index->max_depth_ = prior.max_depth_x;
  index->min_points_ = prior.min_points;
  index->dim_weights_ = prior.dim_weights;
  const auto n = static_cast<std::uint32_t>(x.rows());
  if (n == 0) {
    Node root;
    root.key = index->layout_.root();
    root.kind = NodeKind::empty;
    index->nodes_.push_back(root);
    index->lookup_.emplace(root.key, 0);
    return index;
  }
  IndexBuilder builder(*index, index->nodes_, index->splits_, index->points_, index->lookup_);
  builder.run(n);
  return index;
}

std::optional<std::size_t> PredictorIndex::find(RegionKey key) const {
  const auto it = lookup_.find(key);
  if (it == lookup_.end()) return std::nullopt;
  return static_cast<std::size_t>(it->second);
}

bool PredictorIndex::terminal(RegionKey key, int depth, std::uint32_t n) const noexcept {
  if (depth >= max_depth_) return true;
  if (min_points_ > 0 && n <= min_points_) return true;
  for (std::size_t d = 0; d < layout_.dims(); ++d) {
    if (layout_.splittable(key, d)) return false;
  }
  return true;
}

std::vector<std::size_t> PredictorIndex::candidate_dims(RegionKey key, int depth) const {
  std::vector<std::size_t> dims;
  if (depth >= max_depth_) return dims;
  for (std::size_t d = 0; d < layout_.dims(); ++d) {
    if (layout_.splittable(key, d)) dims.push_back(d);
  }
  return dims;
}

// --- PosteriorTree ----------------------------------------------------------

PosteriorTree::PosteriorTree(std::shared_ptr<const PredictorIndex> index, const SampleSpace& space_y,
                             const CondOptPrior& prior, const PointMatrix& y)
    : index_(std::move(index)), space_y_(space_y), prior_(prior), y_(y), cache_(std::make_unique<Cache>()) {
  if (y.rows() != index_->x().rows()) {
    throw InputError("predictor and response row counts differ: " + std::to_string(index_->x().rows()) + " vs " +
                     std::to_string(y.rows()));
  }
  if (y.rows() > 0 && y.cols() != space_y.dims()) {
    throw InputError("expected " + std::to_string(space_y.dims()) + " response columns, got " +
                     std::to_string(y.cols()));
  }
  y_codes_ = encode_points(space_y_, y_);
  prior_local_ = std::make_shared<const LocalOptPosterior>(space_y_, prior_.local, CodeMatrix(0, space_y_.dims()));
  const std::size_t n = index_->size();
  log_m_.assign(n, 0.0);
  log_phi_.assign(n, 0.0);
  rho_post_.assign(n, 1.0);
  std::size_t split_total = 0;
  for (const auto& node : index_->nodes()) split_total += node.split_count;
  lambda_post_.assign(split_total, 0.0);
}

void PosteriorTree::set_names(std::vector<std::string> x_names, std::vector<std::string> y_names) {
  x_names_ = std::move(x_names);
  y_names_ = std::move(y_names);
}

PosteriorNode PosteriorTree::node(std::size_t i) const {
  const auto& src = index_->node(i);
  PosteriorNode out;
  out.key = src.key;
  out.depth = src.depth;
  out.kind = src.kind;
  out.n = src.n;
  out.log_phi = log_phi_[i];
  out.log_m = log_m_[i];
  out.rho_post = rho_post_[i];
  const auto splits = index_->splits(src);
  for (std::size_t j = 0; j < splits.size(); ++j) {
    out.splits.push_back(PosteriorSplit{splits[j].dim, lambda_post_[src.first_split + j], splits[j].left,
                                        splits[j].right});
  }
  return out;
}

std::optional<std::size_t> PosteriorTree::find(const Region& region) const {
  return index_->find(index_->layout().encode(region));
}

NodeState PosteriorTree::state(const Region& region) const {
  if (!region.within(space_x())) throw ContractError("region lies outside the predictor space");
  const RegionKey key = index_->layout().encode(region);
  if (const auto id = index_->find(key)) return NodeState{static_cast<std::int32_t>(*id), -1};
  NodeState s;
  const CodeMatrix& codes = index_->codes();
  for (std::size_t i = 0; i < codes.rows(); ++i) {
    if (!index_->layout().contains(key, codes.row(i))) continue;
    if (s.single >= 0) throw ContractError("region lies below a terminal node");
    s.single = static_cast<std::int32_t>(i);
  }
  return s;
}

std::uint32_t PosteriorTree::state_count(const NodeState& s) const noexcept {
  if (s.node >= 0) return index_->node(static_cast<std::size_t>(s.node)).n;
  return s.single >= 0 ? 1U : 0U;
}

double PosteriorTree::state_rho(const NodeState& s, RegionKey key, int depth) const noexcept {
  if (s.node >= 0) return rho_post_[static_cast<std::size_t>(s.node)];
  return index_->terminal(key, depth, state_count(s)) ? 1.0 : prior_.rho;
}

void PosteriorTree::state_splits(const NodeState& s, RegionKey key, int depth, std::vector<StateSplit>& out) const {
  out.clear();
  if (s.node >= 0) {
    const auto& node = index_->node(static_cast<std::size_t>(s.node));
    if (node.kind == NodeKind::expanded) {
      const auto splits = index_->splits(node);
      for (std::size_t j = 0; j < splits.size(); ++j) {
        out.push_back(StateSplit{splits[j].dim, lambda_post_[node.first_split + j], NodeState{splits[j].left, -1},
                                 NodeState{splits[j].right, -1}});
      }
      return;
    }
  }
  const std::uint32_t n = state_count(s);
  if (index_->terminal(key, depth, n)) return;
  std::int32_t row = s.single;
  if (s.node >= 0 && n == 1) row = static_cast<std::int32_t>(index_->points(index_->node(static_cast<std::size_t>(s.node)))[0]);
  const std::vector<std::size_t> dims = index_->candidate_dims(key, depth);
  const std::vector<double> w = selection_weights(index_->dim_weights(), dims);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    StateSplit split{dims[i], w[i], NodeState{}, NodeState{}};
    if (row >= 0) {
      if (index_->layout().side(key, dims[i], index_->codes()(static_cast<std::size_t>(row), dims[i])) == 0) {
        split.left.single = row;
      } else {
        split.right.single = row;
      }
    }
    out.push_back(split);
  }
}

std::shared_ptr<const LocalOptPosterior> PosteriorTree::build_local(std::span<const std::uint32_t> rows) const {
  CodeMatrix codes(rows.size(), space_y_.dims());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(y_codes_.row(rows[i]), space_y_.dims(), codes.row(i));
  }
  return std::make_shared<const LocalOptPosterior>(space_y_, prior_.local, std::move(codes));
}

std::shared_ptr<const LocalOptPosterior> PosteriorTree::local_posterior(const NodeState& s) const {
  std::int64_t id = -1;
  std::uint32_t single_row = 0;
  std::span<const std::uint32_t> rows;
  if (s.node >= 0) {
    const auto& node = index_->node(static_cast<std::size_t>(s.node));
    rows = index_->points(node);
    if (node.n == 1) {
      single_row = rows[0];
      id = -2 - static_cast<std::int64_t>(single_row);
    } else if (node.n > 1) {
      id = s.node;
    }
  } else if (s.single >= 0) {
    single_row = static_cast<std::uint32_t>(s.single);
    id = -2 - static_cast<std::int64_t>(single_row);
  }
  if (id == -1) return prior_local_;
  if (id < -1) rows = std::span<const std::uint32_t>(&single_row, 1);
  {
    std::lock_guard lock(cache_->mutex);
    if (const auto it = cache_->entries.find(id); it != cache_->entries.end()) return it->second;
  }
  auto post = build_local(rows);
  std::lock_guard lock(cache_->mutex);
  if (const auto it = cache_->entries.find(id); it != cache_->entries.end()) return it->second;
  if (const std::size_t bytes = post->footprint(); cache_->held + bytes <= cache_->budget) {
    cache_->held += bytes;
    cache_->entries.emplace(id, post);
  }
  return post;
}

void PosteriorTree::set_cache_budget(std::size_t bytes) const {
  std::lock_guard lock(cache_->mutex);
  cache_->budget = bytes;
}

PosteriorTree PosteriorTree::from_values(std::shared_ptr<const PredictorIndex> index, const SampleSpace& space_y,
                                         const CondOptPrior& prior, const PointMatrix& y,
                                         std::span<const PosteriorNode> values) {
  PosteriorTree tree(std::move(index), space_y, prior, y);
  const PredictorIndex& idx = *tree.index_;
  if (values.size() != idx.size()) {
    throw InputError("model lists " + std::to_string(values.size()) + " nodes but its data produce " +
                     std::to_string(idx.size()));
  }
  std::vector<bool> seen(idx.size(), false);
  for (const PosteriorNode& v : values) {
    const auto i = idx.find(v.key);
    if (!i || seen[*i]) throw InputError("model node does not match its data: " + idx.layout().decode(v.key).describe(idx.space()));
    seen[*i] = true;
    const auto& node = idx.node(*i);
    const auto splits = idx.splits(node);
    if (node.n != v.n || node.kind != v.kind || splits.size() != v.splits.size()) {
      throw InputError("model node disagrees with its data: " + idx.layout().decode(v.key).describe(idx.space()));
    }
    tree.log_m_[*i] = v.log_m;
    tree.log_phi_[*i] = v.log_phi;
    tree.rho_post_[*i] = v.rho_post;
    for (std::size_t j = 0; j < splits.size(); ++j) {
      if (splits[j].dim != v.splits[j].dim) throw InputError("model split order disagrees with its data");
      tree.lambda_post_[node.first_split + j] = v.splits[j].lambda_post;
    }
  }
  return tree;
}

PosteriorTree fit_responses(std::shared_ptr<const PredictorIndex> index, const SampleSpace& space_y,
                            const CondOptPrior& prior, const PointMatrix& y, const FitOptions& options) {
  prior.local.validate(space_y);
  PosteriorTree tree(std::move(index), space_y, prior, y);
  const PredictorIndex& idx = *tree.index_;
  const std::size_t count = idx.size();

  // Local marginal likelihood of every stored node.
  const DirichletMultinomial2 dm(prior.local.alpha_left, prior.local.alpha_right, y.rows());
  const unsigned threads = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(count)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    try {
      detail::OptEngine engine(space_y, prior.local, dm);
      constexpr std::size_t chunk = 64;
      while (true) {
        const std::size_t begin = next.fetch_add(chunk);
        if (begin >= count) break;
        const std::size_t end = std::min(count, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) {
          tree.log_m_[i] = engine.log_marginal(tree.y_codes_, idx.points(idx.node(i)));
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(count);
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Phi bottom-up: children are always one level deeper than their parent.
  std::vector<std::vector<std::uint32_t>> by_depth(static_cast<std::size_t>(idx.max_depth()) + 1);
  for (std::size_t i = 0; i < count; ++i) {
    by_depth[static_cast<std::size_t>(idx.node(i).depth)].push_back(static_cast<std::uint32_t>(i));
  }
  const double log_rho = safe_log(prior.rho);
  const double log_1mrho = safe_log(1.0 - prior.rho);
  std::vector<double> terms;
  std::vector<std::size_t> dims;
  for (auto level = by_depth.rbegin(); level != by_depth.rend(); ++level) {
    for (const std::uint32_t i : *level) {
      const auto& node = idx.node(i);
      switch (node.kind) {
        case NodeKind::empty:
          tree.log_phi_[i] = 0.0;
          tree.rho_post_[i] = idx.terminal(node.key, node.depth, 0) ? 1.0 : prior.rho;
          continue;
        case NodeKind::terminal:
          tree.log_phi_[i] = tree.log_m_[i];
          tree.rho_post_[i] = 1.0;
          continue;
        case NodeKind::singleton:
          // Everything below holds the same point, so every stopping level
          // gives the same local marginal and the posterior stays the prior.
          tree.log_phi_[i] = tree.log_m_[i];
          tree.rho_post_[i] = prior.rho;
          continue;
        case NodeKind::expanded:
          break;
      }
      const auto splits = idx.splits(node);
      dims.clear();
      for (const auto& s : splits) dims.push_back(s.dim);
      const std::vector<double> w = selection_weights(idx.dim_weights(), dims);
      terms.resize(splits.size());
      for (std::size_t j = 0; j < splits.size(); ++j) {
        double t = std::log(w[j]);
        if (splits[j].left >= 0) t += tree.log_phi_[static_cast<std::size_t>(splits[j].left)];
        if (splits[j].right >= 0) t += tree.log_phi_[static_cast<std::size_t>(splits[j].right)];
        terms[j] = t;
      }
      const double split = log_sum_exp(terms);
      const double stop = log_rho + tree.log_m_[i];
      const double log_phi = log_add(stop, log_1mrho + split);
      tree.log_phi_[i] = log_phi;
      tree.rho_post_[i] = std::exp(stop - log_phi);
      for (std::size_t j = 0; j < splits.size(); ++j) {
        tree.lambda_post_[node.first_split + j] = std::exp(terms[j] - split);
      }
    }
  }
  return tree;
}

PosteriorTree fit(const SampleSpace& space_x, const SampleSpace& space_y, const CondOptPrior& prior,
                  const Dataset& data, const FitOptions& options) {
  prior.validate(space_x, space_y);
  if (data.x.rows() != data.y.rows()) {
    throw InputError("predictor and response row counts differ: " + std::to_string(data.x.rows()) + " vs " +
                     std::to_string(data.y.rows()));
  }
  auto index = PredictorIndex::build(space_x, prior, data.x);
  PosteriorTree tree = fit_responses(std::move(index), space_y, prior, data.y, options);
  tree.set_names(data.x_names, data.y_names);
  return tree;
}

// --- hMAP -------------------------------------------------------------------

std::vector<std::size_t> HmapTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].split_dim < 0) out.push_back(i);
  }
  return out;
}

namespace {

std::int32_t grow_hmap(const PosteriorTree& tree, HmapTree& out, RegionKey key, int depth, const NodeState& s) {
  const auto idx = static_cast<std::int32_t>(out.nodes.size());
  HmapNode node;
  node.key = key;
  node.depth = depth;
  node.state = s;
  node.n = tree.state_count(s);
  node.rho_post = tree.state_rho(s, key, depth);
  out.nodes.push_back(node);
  if (node.rho_post >= 0.5) return idx;
  std::vector<StateSplit> splits;
  tree.state_splits(s, key, depth, splits);
  if (splits.empty()) return idx;
  std::size_t best = 0;
  for (std::size_t j = 1; j < splits.size(); ++j) {
    if (splits[j].lambda > splits[best].lambda) best = j;
  }
  const StateSplit chosen = splits[best];
  const KeyLayout& layout = tree.index().layout();
  const std::int32_t l = grow_hmap(tree, out, layout.child(key, chosen.dim, 0), depth + 1, chosen.left);
  const std::int32_t r = grow_hmap(tree, out, layout.child(key, chosen.dim, 1), depth + 1, chosen.right);
  HmapNode& self = out.nodes[static_cast<std::size_t>(idx)];
  self.split_dim = static_cast<std::int32_t>(chosen.dim);
  self.lambda_post = chosen.lambda;
  self.left = l;
  self.right = r;
  return idx;
}

std::vector<std::uint64_t> encode_x(const PosteriorTree& tree, std::span<const double> x) {
  const SampleSpace& space = tree.space_x();
  if (x.size() != space.dims()) {
    throw InputError("expected a predictor point with " + std::to_string(space.dims()) + " coordinates");
  }
  std::vector<std::uint64_t> codes(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) codes[d] = space.encode(d, x[d]);
  return codes;
}

}  // namespace

HmapTree hmap(const PosteriorTree& tree) {
  HmapTree out;
  out.space_x = tree.space_x();
  out.layout = tree.index().layout();
  grow_hmap(tree, out, out.layout.root(), 0, tree.root_state());
  return out;
}

// --- Predictive density -----------------------------------------------------

ConditionalDensity predictive(const PosteriorTree& tree, std::span<const double> x) {
  const std::vector<std::uint64_t> codes = encode_x(tree, x);
  const KeyLayout& layout = tree.index().layout();

  // Posterior probability that partitioning stops at each region holding x,
  // pooled by which local posterior that region carries.
  std::vector<std::pair<NodeState, double>> blocks;
  std::unordered_map<std::int64_t, std::size_t> block_of;
  const auto add_block = [&](const NodeState& s, double w) {
    if (w == 0.0) return;
    std::int64_t id = -1;
    NodeState rep = s;
    if (s.node >= 0) {
      const auto& node = tree.index().node(static_cast<std::size_t>(s.node));
      if (node.n == 1) {
        rep = NodeState{-1, static_cast<std::int32_t>(tree.index().points(node)[0])};
        id = -2 - rep.single;
      } else if (node.n > 1) {
        id = s.node;
      }
    } else if (s.single >= 0) {
      id = -2 - static_cast<std::int64_t>(s.single);
    }
    if (id == -1) rep = NodeState{};
    auto [it, inserted] = block_of.try_emplace(id, blocks.size());
    if (inserted) {
      blocks.emplace_back(rep, w);
    } else {
      blocks[it->second].second += w;
    }
  };

  struct Item {
    RegionKey key;
    NodeState state;
    double reach;
  };
  std::vector<Item> frontier{{layout.root(), tree.root_state(), 1.0}};
  std::vector<Item> next;
  std::unordered_map<RegionKey, std::size_t, RegionKeyHash> slot;
  std::vector<StateSplit> splits;
  for (int depth = 0; !frontier.empty(); ++depth) {
    next.clear();
    slot.clear();
    for (const Item& item : frontier) {
      if (item.state.empty()) {
        // Every region below is empty too and carries the prior.
        add_block(item.state, item.reach);
        continue;
      }
      const double rho = tree.state_rho(item.state, item.key, depth);
      add_block(item.state, item.reach * rho);
      if (rho >= 1.0) continue;
      tree.state_splits(item.state, item.key, depth, splits);
      for (const StateSplit& s : splits) {
        const unsigned side = layout.side(item.key, s.dim, codes[s.dim]);
        const RegionKey child = layout.child(item.key, s.dim, side);
        const double reach = item.reach * (1.0 - rho) * s.lambda;
        if (reach == 0.0) continue;
        auto [it, inserted] = slot.try_emplace(child, next.size());
        if (inserted) {
          next.push_back(Item{child, side ? s.right : s.left, reach});
        } else {
          next[it->second].reach += reach;
        }
      }
    }
    frontier.swap(next);
  }

  UniformMixture mixture(tree.space_y(), tree.prior_local().layout());
  for (const auto& [state, w] : blocks) mixture.add(tree.local_posterior(state)->mean(), w);
  return ConditionalDensity(std::move(mixture));
}

double predict_density(const PosteriorTree& tree, std::span<const double> x, std::span<const double> y) {
  return predictive(tree, x)(y);
}

// --- Posterior sampling -----------------------------------------------------

namespace {

void grow_partition(const PosteriorTree& tree, SampledPartition& out, RegionKey key, int depth, const NodeState& s,
                    Rng& rng, std::vector<double>& weights) {
  const double rho = tree.state_rho(s, key, depth);
  if (bernoulli(rng, rho)) {
    out.blocks.push_back(SampledBlock{key, depth, s, rng()});
    return;
  }
  std::vector<StateSplit> splits;
  tree.state_splits(s, key, depth, splits);
  weights.resize(splits.size());
  for (std::size_t j = 0; j < splits.size(); ++j) weights[j] = splits[j].lambda;
  const StateSplit chosen = splits[categorical(rng, weights)];
  out.split_on[chosen.dim] = 1;
  const KeyLayout& layout = tree.index().layout();
  grow_partition(tree, out, layout.child(key, chosen.dim, 0), depth + 1, chosen.left, rng, weights);
  grow_partition(tree, out, layout.child(key, chosen.dim, 1), depth + 1, chosen.right, rng, weights);
}

}  // namespace

SampledPartition sample_partition(const PosteriorTree& tree, Rng& rng) {
  SampledPartition out;
  out.split_on.assign(tree.space_x().dims(), 0);
  std::vector<double> weights;
  grow_partition(tree, out, tree.index().layout().root(), 0, tree.root_state(), rng, weights);
  return out;
}

std::size_t SampledPartition::block_of(const PosteriorTree& tree, std::span<const double> x) const {
  const std::vector<std::uint64_t> codes = encode_x(tree, x);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (tree.index().layout().contains(blocks[i].key, codes.data())) return i;
  }
  throw ContractError("sampled partition does not cover the point");
}

SampledConditionalDensity::SampledConditionalDensity(const PosteriorTree& tree, SampledPartition partition)
    : tree_(&tree), partition_(std::move(partition)), densities_(partition_.blocks.size()) {}

const PiecewiseDensity& SampledConditionalDensity::block_density(std::size_t block) {
  auto& slot = densities_.at(block);
  if (!slot) {
    Rng rng(partition_.blocks[block].seed);
    slot = tree_->local_posterior(partition_.blocks[block].state)->sample(rng);
  }
  return *slot;
}

double SampledConditionalDensity::operator()(std::span<const double> x, std::span<const double> y) {
  const PiecewiseDensity& density = block_density(partition_.block_of(*tree_, x));
  const SampleSpace& space = tree_->space_y();
  if (y.size() != space.dims()) throw InputError("expected a response point with " + std::to_string(space.dims()) + " coordinates");
  std::vector<std::uint64_t> codes(y.size());
  for (std::size_t d = 0; d < y.size(); ++d) codes[d] = space.encode(d, y[d]);
  return density.at_codes(codes.data());
}

SampledConditionalDensity sample_conditional_density(const PosteriorTree& tree, Rng& rng) {
  return SampledConditionalDensity(tree, sample_partition(tree, rng));
}

std::vector<double> inclusion_probabilities(const PosteriorTree& tree, std::size_t draws, Rng& rng) {
  if (draws == 0) throw ContractError("inclusion probabilities need at least one draw");
  std::vector<std::size_t> hits(tree.space_x().dims(), 0);
  for (std::size_t i = 0; i < draws; ++i) {
    const SampledPartition p = sample_partition(tree, rng);
    for (std::size_t d = 0; d < hits.size(); ++d) hits[d] += p.split_on[d];
  }
  std::vector<double> out(hits.size());
  for (std::size_t d = 0; d < hits.size(); ++d) out[d] = static_cast<double>(hits[d]) / static_cast<double>(draws);
  return out;
}

}  // namespace condopt
