// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace condopt {

/// Deepest dyadic level a continuous dimension can be split to. Point
/// coordinates are quantized to this many bits of their unit-scaled value.
inline constexpr int kMaxDyadicLevel = 52;

enum class DimKind : std::uint8_t { continuous, binary };

struct Dimension {
  DimKind kind = DimKind::continuous;
  double lo = 0.0;
  double hi = 1.0;

  static Dimension continuous(double lo, double hi);
  static Dimension binary();

  /// Number of times the dimension can be halved.
  int max_level() const noexcept { return kind == DimKind::binary ? 1 : kMaxDyadicLevel; }
  /// Lebesgue length, or the counting measure of {0,1}.
  double measure() const noexcept { return kind == DimKind::binary ? 2.0 : hi - lo; }

  bool operator==(const Dimension&) const = default;
};

/// Product of continuous intervals and binary {0,1} factors.
class SampleSpace {
 public:
  SampleSpace() = default;
  explicit SampleSpace(std::vector<Dimension> dims);

  static SampleSpace unit_cube(std::size_t dims);
  static SampleSpace binary_cube(std::size_t dims);

  std::size_t dims() const noexcept { return dims_.size(); }
  const Dimension& dim(std::size_t d) const { return dims_.at(d); }
  std::span<const Dimension> dimensions() const noexcept { return dims_; }

  double measure() const noexcept;
  double log_measure() const noexcept;

  /// Dyadic code of `value` in dimension `d`: bit k (from the top of
  /// max_level bits) says which half the value falls in after k halvings.
  /// Throws InputError for values outside the dimension or not finite.
  std::uint64_t encode(std::size_t d, double value) const;
  bool contains(std::span<const double> point) const;

  bool operator==(const SampleSpace&) const = default;

 private:
  std::vector<Dimension> dims_;
};

/// Bounds for an unbounded continuous column: the observed range, inflated by
/// a relative 1e-9 on each side.
Dimension empirical_dimension(std::span<const double> values);

/// Row-major matrix of real coordinates, one point per row.
class PointMatrix {
 public:
  PointMatrix() = default;
  PointMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  PointMatrix(std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double> column(std::size_t j) const;

  void append_row(std::span<const double> point);

  bool operator==(const PointMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dyadic codes of every point of a PointMatrix (see SampleSpace::encode).
class CodeMatrix {
 public:
  CodeMatrix() = default;
  CodeMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const std::uint64_t* row(std::size_t i) const noexcept { return data_.data() + i * cols_; }
  std::uint64_t* row(std::size_t i) noexcept { return data_.data() + i * cols_; }
  std::uint64_t operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> data_;
};

/// Throws InputError naming the first offending row and column.
CodeMatrix encode_points(const SampleSpace& space, const PointMatrix& points);

enum class Side : std::uint8_t { left = 0, right = 1 };

struct PathStep {
  std::size_t dim = 0;
  Side side = Side::left;
  bool operator==(const PathStep&) const = default;
};

/// Per-dimension dyadic cell: `level` halvings taken, `index` of the cell at
/// that level (0 .. 2^level - 1). For binary dimensions level 1 fixes the
/// value to `index`.
struct DimCell {
  int level = 0;
  std::uint64_t index = 0;
  bool operator==(const DimCell&) const = default;
};

/// Node of the recursive partition. Identity is the cell vector, which is
/// equivalent to the canonical split path; the same region reached through
/// different split orders compares equal.
class Region {
 public:
  Region() = default;
  explicit Region(const SampleSpace& space) : cells_(space.dims()) {}
  explicit Region(std::vector<DimCell> cells) : cells_(std::move(cells)) {}

  static Region from_path(const SampleSpace& space, std::span<const PathStep> path);

  std::size_t dims() const noexcept { return cells_.size(); }
  const DimCell& cell(std::size_t d) const { return cells_.at(d); }
  std::span<const DimCell> cells() const noexcept { return cells_; }

  int depth() const noexcept;
  /// Splits ordered by dimension, then by level within a dimension.
  std::vector<PathStep> path() const;

  double measure(const SampleSpace& space) const;
  /// [lower, upper) for continuous dims; {v, v} for a fixed binary dim and
  /// {0, 1} for an unfixed one.
  std::pair<double, double> bounds(const SampleSpace& space, std::size_t d) const;
  bool contains(const SampleSpace& space, std::span<const double> point) const;
  bool contains_codes(const SampleSpace& space, const std::uint64_t* codes) const noexcept;
  bool within(const SampleSpace& space) const noexcept;

  std::string describe(const SampleSpace& space) const;

  bool operator==(const Region&) const = default;

 private:
  std::vector<DimCell> cells_;
};

struct Split {
  std::size_t dim = 0;
  DimKind kind = DimKind::continuous;
  static constexpr int children_count = 2;
  bool operator==(const Split&) const = default;
};

/// One split per continuous dimension plus one per unfixed binary dimension,
/// ascending by dimension. Empty iff the region is undividable.
std::vector<Split> candidate_splits(const SampleSpace& space, const Region& region);

bool is_splittable(const SampleSpace& space, const Region& region, std::size_t dim) noexcept;

/// Children of `region` under `split`: [lo, mid) and [mid, hi) for continuous
/// dimensions, value 0 and value 1 for binary ones. Throws ContractError if
/// the split is not a candidate split of the region.
std::pair<Region, Region> split_region(const SampleSpace& space, const Region& region, const Split& split);

/// Stable partition of `points` (rows of `codes`) into the two children of
/// `region` under `split`. A coordinate exactly on the midpoint goes right.
/// Throws ContractError if a point lies outside the region.
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> partition_points(
    std::span<const std::uint32_t> points, const CodeMatrix& codes, const SampleSpace& space,
    const Region& region, const Split& split);

// --- Packed region keys -----------------------------------------------------

/// 128-bit packed region identity: each dimension stores its heap index
/// (1 << level | index) in a fixed-width bit field.
__extension__ typedef unsigned __int128 RegionKey;

struct RegionKeyHash {
  std::size_t operator()(RegionKey k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k) ^ (static_cast<std::uint64_t>(k >> 64) * 0x9e3779b97f4a7c15ULL);
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

/// Bit layout of RegionKey for a space explored to at most `max_depth` splits.
class KeyLayout {
 public:
  KeyLayout() = default;
  /// Throws ConfigError when the space and depth need more than 128 bits.
  KeyLayout(const SampleSpace& space, int max_depth);

  std::size_t dims() const noexcept { return offset_.size(); }
  int max_depth() const noexcept { return max_depth_; }
  RegionKey root() const noexcept { return root_; }

  std::uint64_t heap(RegionKey key, std::size_t d) const noexcept {
    return static_cast<std::uint64_t>(key >> offset_[d]) & mask_[d];
  }
  int level(RegionKey key, std::size_t d) const noexcept;
  bool splittable(RegionKey key, std::size_t d) const noexcept { return level(key, d) < max_level_[d]; }
  RegionKey child(RegionKey key, std::size_t d, unsigned side) const noexcept {
    return key + (static_cast<RegionKey>(heap(key, d) + side) << offset_[d]);
  }
  /// Bit of a point code selecting the child after splitting `key` along d.
  unsigned side(RegionKey key, std::size_t d, std::uint64_t code) const noexcept {
    return static_cast<unsigned>((code >> (max_level_[d] - level(key, d) - 1)) & 1U);
  }
  int shift(RegionKey key, std::size_t d) const noexcept { return max_level_[d] - level(key, d) - 1; }
  bool contains(RegionKey key, const std::uint64_t* codes) const noexcept;
  int depth(RegionKey key) const noexcept;

  /// Key of the cell at the given per-dimension levels containing a point.
  RegionKey key_at(std::span<const int> levels, const std::uint64_t* codes) const noexcept;

  RegionKey encode(const Region& region) const;
  Region decode(RegionKey key) const;

 private:
  int max_depth_ = 0;
  RegionKey root_ = 0;
  std::vector<int> offset_;
  std::vector<std::uint64_t> mask_;
  std::vector<int> max_level_;
};

}  // namespace condopt
