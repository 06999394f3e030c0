// Apache License, Version 2.0, refer to LICENSE.txt
#include "condopt/space.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "condopt/errors.hpp"

namespace condopt {

Dimension Dimension::continuous(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    std::ostringstream msg;
    msg << "continuous dimension needs finite lo < hi, got [" << lo << ", " << hi << "]";
    throw ConfigError(msg.str());
  }
  return Dimension{DimKind::continuous, lo, hi};
}

Dimension Dimension::binary() { return Dimension{DimKind::binary, 0.0, 1.0}; }

SampleSpace::SampleSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  for (const auto& d : dims_) {
    if (d.kind == DimKind::continuous) (void)Dimension::continuous(d.lo, d.hi);
  }
}

SampleSpace SampleSpace::unit_cube(std::size_t dims) {
  return SampleSpace(std::vector<Dimension>(dims, Dimension::continuous(0.0, 1.0)));
}

SampleSpace SampleSpace::binary_cube(std::size_t dims) {
  return SampleSpace(std::vector<Dimension>(dims, Dimension::binary()));
}

double SampleSpace::measure() const noexcept {
  double m = 1.0;
  for (const auto& d : dims_) m *= d.measure();
  return m;
}

double SampleSpace::log_measure() const noexcept {
  double m = 0.0;
  for (const auto& d : dims_) m += std::log(d.measure());
  return m;
}

std::uint64_t SampleSpace::encode(std::size_t d, double value) const {
  const Dimension& dim = dims_.at(d);
  if (!std::isfinite(value)) throw InputError("non-finite coordinate in dimension " + std::to_string(d));
  if (dim.kind == DimKind::binary) {
    if (value == 0.0) return 0;
    if (value == 1.0) return 1;
    std::ostringstream msg;
    msg << "binary dimension " << d << " accepts 0 or 1 only, got " << value;
    throw InputError(msg.str());
  }
  if (value < dim.lo || value > dim.hi) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "coordinate " << value << " outside [" << dim.lo << ", " << dim.hi << "] in dimension " << d;
    throw InputError(msg.str());
  }
  constexpr std::uint64_t cells = std::uint64_t{1} << kMaxDyadicLevel;
  const double u = (value - dim.lo) / (dim.hi - dim.lo);
  const double scaled = std::floor(std::ldexp(u, kMaxDyadicLevel));
  if (scaled <= 0.0) return 0;
  const auto code = static_cast<std::uint64_t>(scaled);
  return code >= cells ? cells - 1 : code;
}

bool SampleSpace::contains(std::span<const double> point) const {
  if (point.size() != dims_.size()) return false;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    const double v = point[d];
    if (!std::isfinite(v)) return false;
    if (dims_[d].kind == DimKind::binary) {
      if (v != 0.0 && v != 1.0) return false;
    } else if (v < dims_[d].lo || v > dims_[d].hi) {
      return false;
    }
  }
  return true;
}

Dimension empirical_dimension(std::span<const double> values) {
  if (values.empty()) return Dimension::continuous(0.0, 1.0);
  double lo = values[0];
  double hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("non-finite value while computing empirical bounds");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double pad = 1e-9 * (hi - lo);
  if (!(pad > 0.0)) pad = 1e-9 * std::max(1.0, std::abs(lo));
  return Dimension::continuous(lo - pad, hi + pad);
}

PointMatrix::PointMatrix(std::size_t cols, std::vector<double> values)
    : rows_(cols == 0 ? 0 : values.size() / cols), cols_(cols), data_(std::move(values)) {
  if (cols_ == 0 ? !data_.empty() : data_.size() % cols_ != 0) {
    throw ContractError("PointMatrix: value count is not a multiple of the column count");
  }
}

std::vector<double> PointMatrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = data_[i * cols_ + j];
  return out;
}

void PointMatrix::append_row(std::span<const double> point) {
  if (point.size() != cols_) throw ContractError("PointMatrix::append_row: width mismatch");
  data_.insert(data_.end(), point.begin(), point.end());
  ++rows_;
}

CodeMatrix encode_points(const SampleSpace& space, const PointMatrix& points) {
  if (points.rows() > 0 && points.cols() != space.dims()) {
    throw InputError("points have " + std::to_string(points.cols()) + " columns, space has " +
                     std::to_string(space.dims()) + " dimensions");
  }
  CodeMatrix codes(points.rows(), space.dims());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t d = 0; d < space.dims(); ++d) {
      try {
        codes.row(i)[d] = space.encode(d, points(i, d));
      } catch (const InputError& e) {
        throw InputError("row " + std::to_string(i) + ": " + e.what());
      }
    }
  }
  return codes;
}

// --- Region -----------------------------------------------------------------

Region Region::from_path(const SampleSpace& space, std::span<const PathStep> path) {
  Region r(space);
  for (const auto& step : path) {
    if (step.dim >= space.dims() || !is_splittable(space, r, step.dim)) {
      throw ContractError("path step splits dimension " + std::to_string(step.dim) + " which is not splittable");
    }
    auto& c = r.cells_[step.dim];
    c.index = 2 * c.index + static_cast<std::uint64_t>(step.side);
    ++c.level;
  }
  return r;
}

int Region::depth() const noexcept {
  int depth = 0;
  for (const auto& c : cells_) depth += c.level;
  return depth;
}

std::vector<PathStep> Region::path() const {
  std::vector<PathStep> steps;
  for (std::size_t d = 0; d < cells_.size(); ++d) {
    const auto& c = cells_[d];
    for (int k = c.level - 1; k >= 0; --k) {
      steps.push_back({d, ((c.index >> k) & 1U) != 0 ? Side::right : Side::left});
    }
  }
  return steps;
}

double Region::measure(const SampleSpace& space) const {
  double m = 1.0;
  for (std::size_t d = 0; d < cells_.size(); ++d) {
    const auto& dim = space.dim(d);
    if (dim.kind == DimKind::binary) {
      m *= cells_[d].level == 0 ? 2.0 : 1.0;
    } else {
      m *= std::ldexp(dim.hi - dim.lo, -cells_[d].level);
    }
  }
  return m;
}

std::pair<double, double> Region::bounds(const SampleSpace& space, std::size_t d) const {
  const auto& dim = space.dim(d);
  const auto& c = cells_.at(d);
  if (dim.kind == DimKind::binary) {
    if (c.level == 0) return {0.0, 1.0};
    const auto v = static_cast<double>(c.index);
    return {v, v};
  }
  const double width = dim.hi - dim.lo;
  const double lower = dim.lo + width * std::ldexp(static_cast<double>(c.index), -c.level);
  const double upper = (c.index + 1 == (std::uint64_t{1} << c.level))
                           ? dim.hi
                           : dim.lo + width * std::ldexp(static_cast<double>(c.index + 1), -c.level);
  return {lower, upper};
}

bool Region::contains_codes(const SampleSpace& space, const std::uint64_t* codes) const noexcept {
  for (std::size_t d = 0; d < cells_.size(); ++d) {
    const int shift = space.dim(d).max_level() - cells_[d].level;
    if ((codes[d] >> shift) != cells_[d].index) return false;
  }
  return true;
}

bool Region::contains(const SampleSpace& space, std::span<const double> point) const {
  if (!space.contains(point)) return false;
  std::vector<std::uint64_t> codes(space.dims());
  for (std::size_t d = 0; d < space.dims(); ++d) codes[d] = space.encode(d, point[d]);
  return contains_codes(space, codes.data());
}

bool Region::within(const SampleSpace& space) const noexcept {
  if (cells_.size() != space.dims()) return false;
  for (std::size_t d = 0; d < cells_.size(); ++d) {
    const auto& c = cells_[d];
    if (c.level < 0 || c.level > space.dim(d).max_level()) return false;
    if (c.index >= (std::uint64_t{1} << c.level)) return false;
  }
  return true;
}

std::string Region::describe(const SampleSpace& space) const {
  std::ostringstream out;
  for (std::size_t d = 0; d < cells_.size(); ++d) {
    if (d > 0) out << " x ";
    const auto [lo, hi] = bounds(space, d);
    if (space.dim(d).kind == DimKind::binary) {
      if (cells_[d].level == 0) {
        out << "{0,1}";
      } else {
        out << "{" << lo << "}";
      }
    } else {
      const bool closed = cells_[d].index + 1 == (std::uint64_t{1} << cells_[d].level);
      out << "[" << lo << "," << hi << (closed ? "]" : ")");
    }
  }
  return out.str();
}

bool is_splittable(const SampleSpace& space, const Region& region, std::size_t dim) noexcept {
  return dim < space.dims() && region.cell(dim).level < space.dim(dim).max_level();
}

std::vector<Split> candidate_splits(const SampleSpace& space, const Region& region) {
  std::vector<Split> splits;
  for (std::size_t d = 0; d < space.dims(); ++d) {
    if (is_splittable(space, region, d)) splits.push_back({d, space.dim(d).kind});
  }
  return splits;
}

std::pair<Region, Region> split_region(const SampleSpace& space, const Region& region, const Split& split) {
  if (!region.within(space) || !is_splittable(space, region, split.dim) ||
      space.dim(split.dim).kind != split.kind) {
    throw ContractError("split on dimension " + std::to_string(split.dim) + " is not valid for region " +
                        region.describe(space));
  }
  const PathStep left_step{split.dim, Side::left};
  const PathStep right_step{split.dim, Side::right};
  auto path = region.path();
  path.push_back(left_step);
  Region left = Region::from_path(space, path);
  path.back() = right_step;
  Region right = Region::from_path(space, path);
  return {std::move(left), std::move(right)};
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> partition_points(
    std::span<const std::uint32_t> points, const CodeMatrix& codes, const SampleSpace& space,
    const Region& region, const Split& split) {
  if (!is_splittable(space, region, split.dim)) {
    throw ContractError("partition_points: split is not a candidate split of the region");
  }
  const int shift = space.dim(split.dim).max_level() - region.cell(split.dim).level - 1;
  std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> out;
  for (std::uint32_t p : points) {
    if (p >= codes.rows() || !region.contains_codes(space, codes.row(p))) {
      throw ContractError("partition_points: point " + std::to_string(p) + " is not inside the region");
    }
    if ((codes.row(p)[split.dim] >> shift) & 1U) {
      out.second.push_back(p);
    } else {
      out.first.push_back(p);
    }
  }
  return out;
}

// --- KeyLayout --------------------------------------------------------------

KeyLayout::KeyLayout(const SampleSpace& space, int max_depth) : max_depth_(max_depth) {
  if (max_depth < 0) throw ConfigError("maximum depth must be nonnegative");
  int offset = 0;
  for (std::size_t d = 0; d < space.dims(); ++d) {
    const int max_level = space.dim(d).max_level();
    const int width = std::min(max_level, max_depth) + 1;
    offset_.push_back(offset);
    mask_.push_back(width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1);
    max_level_.push_back(max_level);
    root_ |= static_cast<RegionKey>(1) << offset;
    offset += width;
  }
  if (offset > 128) {
    throw ConfigError("space with " + std::to_string(space.dims()) + " dimensions at depth " +
                      std::to_string(max_depth) + " needs " + std::to_string(offset) +
                      " key bits; at most 128 are supported");
  }
}

int KeyLayout::level(RegionKey key, std::size_t d) const noexcept {
  return static_cast<int>(std::bit_width(heap(key, d))) - 1;
}

bool KeyLayout::contains(RegionKey key, const std::uint64_t* codes) const noexcept {
  for (std::size_t d = 0; d < offset_.size(); ++d) {
    const std::uint64_t h = heap(key, d);
    const int lvl = static_cast<int>(std::bit_width(h)) - 1;
    if (lvl == 0) continue;
    const std::uint64_t index = h - (std::uint64_t{1} << lvl);
    if ((codes[d] >> (max_level_[d] - lvl)) != index) return false;
  }
  return true;
}

int KeyLayout::depth(RegionKey key) const noexcept {
  int depth = 0;
  for (std::size_t d = 0; d < offset_.size(); ++d) depth += level(key, d);
  return depth;
}

RegionKey KeyLayout::key_at(std::span<const int> levels, const std::uint64_t* codes) const noexcept {
  RegionKey key = 0;
  for (std::size_t d = 0; d < offset_.size(); ++d) {
    const int lvl = levels[d];
    const std::uint64_t h = (std::uint64_t{1} << lvl) | (codes[d] >> (max_level_[d] - lvl));
    key |= static_cast<RegionKey>(h) << offset_[d];
  }
  return key;
}

RegionKey KeyLayout::encode(const Region& region) const {
  if (region.dims() != offset_.size()) throw ContractError("region dimension does not match key layout");
  RegionKey key = 0;
  for (std::size_t d = 0; d < offset_.size(); ++d) {
    const auto& c = region.cell(d);
    if (c.level > std::min(max_level_[d], max_depth_)) {
      throw ContractError("region is deeper than the key layout supports");
    }
    key |= static_cast<RegionKey>((std::uint64_t{1} << c.level) | c.index) << offset_[d];
  }
  return key;
}

Region KeyLayout::decode(RegionKey key) const {
  std::vector<DimCell> cells(offset_.size());
  for (std::size_t d = 0; d < offset_.size(); ++d) {
    const std::uint64_t h = heap(key, d);
    const int lvl = static_cast<int>(std::bit_width(h)) - 1;
    cells[d] = DimCell{lvl, h - (std::uint64_t{1} << lvl)};
  }
  return Region(std::move(cells));
}

}  // namespace condopt
