// Apache License, Version 2.0, refer to LICENSE.txt
#include "condopt/opt_local.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "condopt/errors.hpp"
#include "condopt/numeric.hpp"
#include "detail/opt_engine.hpp"

namespace condopt {

void OptPrior::validate(const SampleSpace& space) const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("stopping probability must lie in [0, 1]");
  if (!(alpha_left > 0.0 && alpha_right > 0.0) || !std::isfinite(alpha_left) || !std::isfinite(alpha_right)) {
    throw ConfigError("Dirichlet pseudo-counts must be positive and finite");
  }
  if (max_depth < 0) throw ConfigError("maximum depth must be nonnegative");
  if (!dim_weights.empty()) {
    if (dim_weights.size() != space.dims()) {
      throw ConfigError("expected " + std::to_string(space.dims()) + " selection weights, got " +
                        std::to_string(dim_weights.size()));
    }
    for (double w : dim_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("selection weights must be positive and finite");
    }
  }
}

std::vector<double> selection_weights(std::span<const double> dim_weights, std::span<const std::size_t> dims) {
  std::vector<double> w(dims.size(), 1.0 / static_cast<double>(dims.size()));
  if (dim_weights.empty() || dims.empty()) return w;
  double total = 0.0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    w[i] = dim_weights[dims[i]];
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// --- UniformMixture ---------------------------------------------------------

UniformMixture::UniformMixture(const SampleSpace& space, const KeyLayout& layout) : space_(space), layout_(layout) {}

void UniformMixture::add(RegionKey key, double mass) {
  if (mass == 0.0) return;
  auto [it, inserted] = index_.try_emplace(key, entries_.size());
  if (!inserted) {
    entries_[it->second].second += mass;
    return;
  }
  entries_.emplace_back(key, mass);
  std::vector<int> levels(layout_.dims());
  for (std::size_t d = 0; d < levels.size(); ++d) levels[d] = layout_.level(key, d);
  level_vectors_.insert(std::move(levels));
}

void UniformMixture::add(const UniformMixture& other, double weight) {
  if (weight == 0.0) return;
  for (const auto& [key, mass] : other.entries_) add(key, weight * mass);
}

double UniformMixture::density(std::span<const double> y) const {
  if (y.size() != space_.dims()) {
    throw InputError("expected a point with " + std::to_string(space_.dims()) + " coordinates");
  }
  std::vector<std::uint64_t> codes(y.size());
  for (std::size_t d = 0; d < y.size(); ++d) codes[d] = space_.encode(d, y[d]);
  return density_codes(codes.data());
}

double UniformMixture::density_codes(const std::uint64_t* codes) const {
  const double mu = space_.measure();
  double total = 0.0;
  for (const auto& levels : level_vectors_) {
    const auto it = index_.find(layout_.key_at(levels, codes));
    if (it == index_.end()) continue;
    const int depth = std::accumulate(levels.begin(), levels.end(), 0);
    total += entries_[it->second].second / std::ldexp(mu, -depth);
  }
  return total;
}

double UniformMixture::total_mass() const noexcept {
  double total = 0.0;
  for (const auto& e : entries_) total += e.second;
  return total;
}

namespace {

// Hash nodes carry a next pointer and the allocator's header on top of the value.
template <typename Map>
std::size_t map_bytes(const Map& m) {
  return m.size() * (sizeof(typename Map::value_type) + 32) + m.bucket_count() * sizeof(void*);
}

std::size_t layout_bytes(std::size_t dims) { return dims * (sizeof(int) * 2 + sizeof(std::uint64_t)); }

}  // namespace

std::size_t UniformMixture::footprint() const noexcept {
  std::size_t bytes = map_bytes(index_) + entries_.capacity() * sizeof(entries_[0]) + layout_bytes(space_.dims()) +
                      space_.dims() * sizeof(Dimension);
  for (const auto& v : level_vectors_) bytes += 80 + v.capacity() * sizeof(int);
  return bytes;
}

// --- PiecewiseDensity -------------------------------------------------------

double PiecewiseDensity::operator()(std::span<const double> y) const {
  if (!space_.contains(y)) return 0.0;
  std::vector<std::uint64_t> codes(y.size());
  for (std::size_t d = 0; d < y.size(); ++d) codes[d] = space_.encode(d, y[d]);
  return at_codes(codes.data());
}

double PiecewiseDensity::at_codes(const std::uint64_t* codes) const noexcept {
  if (nodes_.empty()) return 0.0;
  std::size_t i = 0;
  while (nodes_[i].dim >= 0) {
    const Node& n = nodes_[i];
    const bool right = (codes[n.dim] >> n.shift) & 1U;
    i = static_cast<std::size_t>(right ? n.right : n.left);
  }
  return nodes_[i].density;
}

double PiecewiseDensity::integral() const noexcept {
  const double mu = space_.measure();
  double total = 0.0;
  for (const Node& n : nodes_) {
    if (n.dim < 0) total += n.density * std::ldexp(mu, -n.depth);
  }
  return total;
}

std::size_t PiecewiseDensity::leaf_count() const noexcept {
  std::size_t count = 0;
  for (const Node& n : nodes_) count += n.dim < 0 ? 1 : 0;
  return count;
}

// --- OptEngine --------------------------------------------------------------

namespace detail {

OptEngine::OptEngine(const SampleSpace& space, const OptPrior& prior, const DirichletMultinomial2& dm)
    : space_(space),
      dm_(dm),
      layout_(space, prior.max_depth),
      max_depth_(prior.max_depth),
      symmetric_(prior.symmetric()),
      rho_(prior.rho),
      log_rho_(safe_log(prior.rho)),
      log_1mrho_(safe_log(1.0 - prior.rho)),
      dim_weights_(prior.dim_weights),
      frames_(static_cast<std::size_t>(prior.max_depth) + 1) {
  const double log_mu = space.log_measure();
  for (int k = 0; k <= max_depth_; ++k) log_mu_.push_back(log_mu - k * kLn2);
  for (double w : dim_weights_) log_weights_.push_back(safe_log(w));
}

double OptEngine::log_marginal(const CodeMatrix& codes, std::span<const std::uint32_t> rows) {
  nodes_ = nullptr;
  splits_ = nullptr;
  return run(codes, rows);
}

std::int32_t OptEngine::materialize(const CodeMatrix& codes, std::span<const std::uint32_t> rows,
                                    std::vector<LocalOptPosterior::Node>& nodes,
                                    std::vector<LocalOptPosterior::SplitStat>& splits) {
  nodes_ = &nodes;
  splits_ = &splits;
  if (rows.empty()) return -1;
  run(codes, rows);
  nodes_ = nullptr;
  splits_ = nullptr;
  return static_cast<std::int32_t>(nodes.size()) - 1;
}

double OptEngine::run(const CodeMatrix& codes, std::span<const std::uint32_t> rows) {
  const auto n = static_cast<std::uint32_t>(rows.size());
  if (n == 0) return 0.0;
  if (dm_.max_count() < n) throw ContractError("Dirichlet-multinomial table is smaller than the sample");
  codes_ = &codes;
  const std::size_t need = static_cast<std::size_t>(n) * (static_cast<std::size_t>(max_depth_) + 2);
  if (arena_.size() < need) arena_.resize(need);
  std::copy(rows.begin(), rows.end(), arena_.begin());
  memo_.clear();
  return visit(layout_.root(), 0, arena_.data(), n, n);
}

std::int32_t OptEngine::record_leaf(RegionKey key, int depth, std::uint32_t n, double log_phi, double rho_post,
                                    const std::uint32_t* pts) {
  if (nodes_ == nullptr) return -1;
  LocalOptPosterior::Node node;
  node.key = key;
  node.depth = depth;
  node.n = n;
  node.log_phi = log_phi;
  node.rho_post = rho_post;
  node.first_split = static_cast<std::uint32_t>(splits_->size());
  node.single_point = n == 1 ? static_cast<std::int32_t>(pts[0]) : -1;
  nodes_->push_back(node);
  return static_cast<std::int32_t>(nodes_->size()) - 1;
}

std::pair<double, std::int32_t> OptEngine::child(RegionKey key, int depth, std::uint32_t* pts, std::uint32_t n,
                                                 std::size_t top) {
  if (n == 0) return {0.0, -1};
  if (n == 1 && symmetric_ && nodes_ == nullptr) return {-log_mu_[depth], -1};
  // With one dimension every region has a single parent, so nothing repeats.
  const bool shared = layout_.dims() > 1;
  if (shared) {
    if (const Memo* m = memo_.find(key)) return {m->log_phi, m->node};
  }
  const double v = visit(key, depth, pts, n, top);
  const std::int32_t id = nodes_ == nullptr ? -1 : static_cast<std::int32_t>(nodes_->size()) - 1;
  if (shared) memo_.insert(key, Memo{v, id});
  return {v, id};
}

double OptEngine::visit(RegionKey key, int depth, std::uint32_t* pts, std::uint32_t n, std::size_t top) {
  const double log_mu = log_mu_[depth];
  Frame& f = frames_[depth];
  f.dims.clear();
  if (depth < max_depth_) {
    for (std::size_t d = 0; d < layout_.dims(); ++d) {
      if (layout_.splittable(key, d)) f.dims.push_back(d);
    }
  }
  if (f.dims.empty()) {
    const double v = -static_cast<double>(n) * log_mu;
    record_leaf(key, depth, n, v, 1.0, pts);
    return v;
  }
  if (n == 1 && symmetric_) {
    record_leaf(key, depth, 1, -log_mu, rho_, pts);
    return -log_mu;
  }

  const std::size_t k = f.dims.size();
  f.terms.resize(k);
  f.n_left.resize(k);
  f.left.resize(k);
  f.right.resize(k);
  double log_w_total = 0.0;
  if (dim_weights_.empty()) {
    log_w_total = std::log(static_cast<double>(k));
  } else {
    double total = 0.0;
    for (std::size_t d : f.dims) total += dim_weights_[d];
    log_w_total = std::log(total);
  }

  std::uint32_t* buf = arena_.data() + top;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t d = f.dims[i];
    const int shift = layout_.shift(key, d);
    std::uint32_t l = 0;
    std::uint32_t r = n;
    for (std::uint32_t j = 0; j < n; ++j) {
      const std::uint32_t p = pts[j];
      if (((*codes_)(p, d) >> shift) & 1U) {
        buf[--r] = p;
      } else {
        buf[l++] = p;
      }
    }
    const auto [phl, idl] = child(layout_.child(key, d, 0), depth + 1, buf, l, top + n);
    const auto [phr, idr] = child(layout_.child(key, d, 1), depth + 1, buf + l, n - l, top + n);
    f.terms[i] = (dim_weights_.empty() ? 0.0 : log_weights_[d]) - log_w_total + dm_.log_factor(l, n - l) + phl + phr;
    f.n_left[i] = l;
    f.left[i] = idl;
    f.right[i] = idr;
  }

  const double split = k == 1 ? f.terms[0] : log_sum_exp(std::span<const double>(f.terms.data(), k));
  const double stop = log_rho_ - static_cast<double>(n) * log_mu;
  const double log_phi = log_add(stop, log_1mrho_ + split);
  if (nodes_ != nullptr) {
    LocalOptPosterior::Node node;
    node.key = key;
    node.depth = depth;
    node.n = n;
    node.log_phi = log_phi;
    node.rho_post = std::exp(stop - log_phi);
    node.first_split = static_cast<std::uint32_t>(splits_->size());
    node.split_count = static_cast<std::uint32_t>(k);
    for (std::size_t i = 0; i < k; ++i) {
      LocalOptPosterior::SplitStat s;
      s.dim = static_cast<std::uint32_t>(f.dims[i]);
      s.n_left = f.n_left[i];
      s.lambda_post = std::exp(f.terms[i] - split);
      s.left = f.left[i];
      s.right = f.right[i];
      splits_->push_back(s);
    }
    nodes_->push_back(node);
  }
  return log_phi;
}

}  // namespace detail

// --- LocalOptPosterior ------------------------------------------------------

LocalOptPosterior::LocalOptPosterior(const SampleSpace& space, const OptPrior& prior, const PointMatrix& points)
    : space_(space), prior_(prior) {
  if (points.rows() > 0 && points.cols() != space.dims()) {
    throw InputError("expected " + std::to_string(space.dims()) + " response columns, got " +
                     std::to_string(points.cols()));
  }
  prior_.validate(space_);
  codes_ = encode_points(space_, points);
  fit();
}

LocalOptPosterior::LocalOptPosterior(const SampleSpace& space, const OptPrior& prior, CodeMatrix codes)
    : space_(space), prior_(prior), codes_(std::move(codes)) {
  if (codes_.rows() > 0 && codes_.cols() != space.dims()) throw ContractError("code matrix does not match the space");
  prior_.validate(space_);
  fit();
}

void LocalOptPosterior::fit() {
  layout_ = KeyLayout(space_, prior_.max_depth);
  const DirichletMultinomial2 dm(prior_.alpha_left, prior_.alpha_right, codes_.rows());
  detail::OptEngine engine(space_, prior_, dm);
  std::vector<std::uint32_t> rows(codes_.rows());
  std::iota(rows.begin(), rows.end(), 0U);
  root_ = engine.materialize(codes_, rows, nodes_, splits_);
  index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].key, static_cast<std::int32_t>(i));
  build_mean();
}

double LocalOptPosterior::log_marginal() const noexcept { return root_ < 0 ? 0.0 : root()->log_phi; }

const LocalOptPosterior::Node* LocalOptPosterior::find(const Region& region) const {
  const auto it = index_.find(layout_.encode(region));
  return it == index_.end() ? nullptr : &nodes_[static_cast<std::size_t>(it->second)];
}

bool LocalOptPosterior::terminal(RegionKey key, int depth) const noexcept {
  if (depth >= prior_.max_depth) return true;
  for (std::size_t d = 0; d < layout_.dims(); ++d) {
    if (layout_.splittable(key, d)) return false;
  }
  return true;
}

double LocalOptPosterior::cursor_rho(const Cursor& c, RegionKey key, int depth) const noexcept {
  if (c.node >= 0) return nodes_[static_cast<std::size_t>(c.node)].rho_post;
  return terminal(key, depth) ? 1.0 : prior_.rho;
}

LocalOptPosterior::Cursor LocalOptPosterior::root_cursor() const noexcept { return Cursor{root_, -1}; }

LocalOptPosterior::Cursor LocalOptPosterior::locate(RegionKey key) const {
  if (const auto it = index_.find(key); it != index_.end()) return Cursor{it->second, -1};
  // Unmaterialized regions hold at most one point.
  Cursor c;
  for (std::size_t i = 0; i < codes_.rows(); ++i) {
    if (!layout_.contains(key, codes_.row(i))) continue;
    if (c.single >= 0) throw ContractError("region with several points was not materialized");
    c.single = static_cast<std::int32_t>(i);
  }
  return c;
}

void LocalOptPosterior::expand(const Cursor& c, RegionKey key, int depth, std::vector<SplitView>& out) const {
  out.clear();
  if (terminal(key, depth)) return;
  if (c.node >= 0) {
    const Node& node = nodes_[static_cast<std::size_t>(c.node)];
    if (node.split_count > 0) {
      for (const SplitStat& s : splits(node)) {
        out.push_back(SplitView{s.dim, s.lambda_post, prior_.alpha_left + s.n_left,
                                prior_.alpha_right + (node.n - s.n_left), Cursor{s.left, -1}, Cursor{s.right, -1}});
      }
      return;
    }
  }
  const std::int32_t row = c.node >= 0 ? nodes_[static_cast<std::size_t>(c.node)].single_point : c.single;
  std::vector<std::size_t> dims;
  for (std::size_t d = 0; d < layout_.dims(); ++d) {
    if (layout_.splittable(key, d)) dims.push_back(d);
  }
  const std::vector<double> w = selection_weights(prior_.dim_weights, dims);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const std::size_t d = dims[i];
    SplitView v{d, w[i], prior_.alpha_left, prior_.alpha_right, Cursor{}, Cursor{}};
    if (row >= 0) {
      if (layout_.side(key, d, codes_(static_cast<std::size_t>(row), d)) == 0) {
        v.alpha_left += 1.0;
        v.left.single = row;
      } else {
        v.alpha_right += 1.0;
        v.right.single = row;
      }
    }
    out.push_back(v);
  }
}

LocalOptPosterior::Params LocalOptPosterior::params(const Region& region) const {
  if (!region.within(space_)) throw ContractError("region lies outside the sample space");
  const int depth = region.depth();
  if (depth > prior_.max_depth) throw ContractError("region is deeper than the maximum depth");
  const RegionKey key = layout_.encode(region);
  const Cursor c = locate(key);
  Params p;
  p.rho = cursor_rho(c, key, depth);
  p.n = c.node >= 0 ? nodes_[static_cast<std::size_t>(c.node)].n : (c.single >= 0 ? 1U : 0U);
  std::vector<SplitView> views;
  expand(c, key, depth, views);
  for (const auto& v : views) p.splits.push_back(SplitParams{v.dim, v.lambda, v.alpha_left, v.alpha_right});
  return p;
}

void LocalOptPosterior::build_mean() {
  mean_ = UniformMixture(space_, layout_);
  struct Entry {
    RegionKey key;
    double reach;
    Cursor cursor;
  };
  std::vector<Entry> frontier{{layout_.root(), 1.0, root_cursor()}};
  std::vector<Entry> next;
  std::unordered_map<RegionKey, std::size_t, RegionKeyHash> slot;
  std::vector<SplitView> views;
  const bool uniform_prior_mean = prior_.symmetric();
  for (int depth = 0; !frontier.empty(); ++depth) {
    next.clear();
    slot.clear();
    const auto push = [&](RegionKey key, double reach, const Cursor& c) {
      if (reach == 0.0) return;
      auto [it, inserted] = slot.try_emplace(key, next.size());
      if (inserted) {
        next.push_back(Entry{key, reach, c});
      } else {
        next[it->second].reach += reach;
      }
    };
    for (const Entry& e : frontier) {
      if (e.cursor.empty() && uniform_prior_mean) {
        mean_.add(e.key, e.reach);
        continue;
      }
      const double rho = cursor_rho(e.cursor, e.key, depth);
      mean_.add(e.key, e.reach * rho);
      if (rho >= 1.0) continue;
      expand(e.cursor, e.key, depth, views);
      for (const SplitView& v : views) {
        const double base = e.reach * (1.0 - rho) * v.lambda / (v.alpha_left + v.alpha_right);
        push(layout_.child(e.key, v.dim, 0), base * v.alpha_left, v.left);
        push(layout_.child(e.key, v.dim, 1), base * v.alpha_right, v.right);
      }
    }
    frontier.swap(next);
  }
}

double LocalOptPosterior::mean_density(std::span<const double> y) const { return mean_.density(y); }

std::size_t LocalOptPosterior::footprint() const noexcept {
  return sizeof(*this) + nodes_.capacity() * sizeof(Node) + splits_.capacity() * sizeof(SplitStat) +
         codes_.rows() * codes_.cols() * sizeof(std::uint64_t) + map_bytes(index_) + mean_.footprint() +
         layout_bytes(space_.dims()) + space_.dims() * sizeof(Dimension) + prior_.dim_weights.capacity() * sizeof(double);
}

std::int32_t LocalOptPosterior::grow(PiecewiseDensity& out, RegionKey key, int depth, const Cursor& c, double mass,
                                     Rng& rng) const {
  const auto idx = static_cast<std::int32_t>(out.nodes_.size());
  out.nodes_.push_back(PiecewiseDensity::Node{});
  out.nodes_.back().depth = depth;
  const double rho = cursor_rho(c, key, depth);
  if (bernoulli(rng, rho)) {
    out.nodes_[static_cast<std::size_t>(idx)].density = mass / std::ldexp(space_.measure(), -depth);
    return idx;
  }
  std::vector<SplitView> views;
  expand(c, key, depth, views);
  std::vector<double> w(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) w[i] = views[i].lambda;
  const SplitView v = views[categorical(rng, w)];
  const double theta = beta_draw(rng, v.alpha_left, v.alpha_right);
  const std::int32_t l = grow(out, layout_.child(key, v.dim, 0), depth + 1, v.left, mass * theta, rng);
  const std::int32_t r = grow(out, layout_.child(key, v.dim, 1), depth + 1, v.right, mass * (1.0 - theta), rng);
  auto& node = out.nodes_[static_cast<std::size_t>(idx)];
  node.dim = static_cast<std::int32_t>(v.dim);
  node.shift = layout_.shift(key, v.dim);
  node.left = l;
  node.right = r;
  return idx;
}

PiecewiseDensity LocalOptPosterior::sample(Rng& rng) const {
  PiecewiseDensity out(space_);
  grow(out, layout_.root(), 0, root_cursor(), 1.0, rng);
  return out;
}

double opt_log_marginal(const SampleSpace& space_y, const OptPrior& prior, const PointMatrix& ys) {
  prior.validate(space_y);
  if (ys.rows() > 0 && ys.cols() != space_y.dims()) {
    throw InputError("expected " + std::to_string(space_y.dims()) + " response columns, got " +
                     std::to_string(ys.cols()));
  }
  const CodeMatrix codes = encode_points(space_y, ys);
  const DirichletMultinomial2 dm(prior.alpha_left, prior.alpha_right, codes.rows());
  detail::OptEngine engine(space_y, prior, dm);
  std::vector<std::uint32_t> rows(codes.rows());
  std::iota(rows.begin(), rows.end(), 0U);
  return engine.log_marginal(codes, rows);
}

LocalOptPosterior opt_posterior(const SampleSpace& space_y, const OptPrior& prior, const PointMatrix& ys) {
  return LocalOptPosterior(space_y, prior, ys);
}

double opt_mean_density(const LocalOptPosterior& post, std::span<const double> y) { return post.mean_density(y); }

PiecewiseDensity opt_sample_density(const LocalOptPosterior& post, Rng& rng) { return post.sample(rng); }

}  // namespace condopt
