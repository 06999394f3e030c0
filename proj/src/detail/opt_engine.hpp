// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "condopt/numeric.hpp"
#include "condopt/opt_local.hpp"
#include "detail/flat_memo.hpp"

namespace condopt::detail {

/// Recursive evaluation of the OPT marginal likelihood over the region DAG.
/// Regions reachable through several split orders are scored once per call.
/// One engine per thread; the DirichletMultinomial2 table may be shared.
class OptEngine {
 public:
  OptEngine(const SampleSpace& space, const OptPrior& prior, const DirichletMultinomial2& dm);

  /// log Phi(root) for the points `rows` of `codes`.
  double log_marginal(const CodeMatrix& codes, std::span<const std::uint32_t> rows);

  /// Same, but also materializes every nonempty region into `nodes`/`splits`
  /// (children before parents). Returns the index of the root node, or -1.
  std::int32_t materialize(const CodeMatrix& codes, std::span<const std::uint32_t> rows,
                           std::vector<LocalOptPosterior::Node>& nodes,
                           std::vector<LocalOptPosterior::SplitStat>& splits);

  const KeyLayout& layout() const noexcept { return layout_; }

 private:
  struct Memo {
    double log_phi = 0.0;
    std::int32_t node = -1;
  };
  struct Frame {
    std::vector<std::size_t> dims;
    std::vector<double> terms;
    std::vector<std::uint32_t> n_left;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
  };

  double run(const CodeMatrix& codes, std::span<const std::uint32_t> rows);
  double visit(RegionKey key, int depth, std::uint32_t* pts, std::uint32_t n, std::size_t top);
  std::pair<double, std::int32_t> child(RegionKey key, int depth, std::uint32_t* pts, std::uint32_t n,
                                        std::size_t top);
  std::int32_t record_leaf(RegionKey key, int depth, std::uint32_t n, double log_phi, double rho_post,
                           const std::uint32_t* pts);

  const SampleSpace& space_;
  const DirichletMultinomial2& dm_;
  KeyLayout layout_;
  int max_depth_;
  bool symmetric_;
  double rho_;
  double log_rho_;
  double log_1mrho_;
  std::vector<double> dim_weights_;
  std::vector<double> log_weights_;
  std::vector<double> log_mu_;  // log measure of a region by depth
  std::vector<Frame> frames_;
  std::vector<std::uint32_t> arena_;
  FlatMemo<Memo> memo_;
  const CodeMatrix* codes_ = nullptr;
  std::vector<LocalOptPosterior::Node>* nodes_ = nullptr;
  std::vector<LocalOptPosterior::SplitStat>* splits_ = nullptr;
};

}  // namespace condopt::detail
