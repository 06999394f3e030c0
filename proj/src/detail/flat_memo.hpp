// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <vector>

#include "condopt/space.hpp"

namespace condopt::detail {

/// Open-addressing RegionKey -> Value table whose clear() is O(1): slots are
/// stamped with a generation and stale stamps read as empty.
template <typename Value>
class FlatMemo {
 public:
  FlatMemo() { rehash(64); }

  void clear() noexcept {
    ++generation_;
    size_ = 0;
    if (generation_ == 0) {  // stamp wrap-around
      for (auto& s : slots_) s.generation = 0;
      generation_ = 1;
    }
  }

  const Value* find(RegionKey key) const noexcept {
    std::size_t i = RegionKeyHash{}(key) & mask_;
    while (true) {
      const Slot& s = slots_[i];
      if (s.generation != generation_) return nullptr;
      if (s.key == key) return &s.value;
      i = (i + 1) & mask_;
    }
  }

  void insert(RegionKey key, const Value& value) {
    if (2 * (size_ + 1) > slots_.size()) rehash(2 * slots_.size());
    place(key, value);
  }

  std::size_t size() const noexcept { return size_; }

 private:
  struct Slot {
    RegionKey key = 0;
    std::uint32_t generation = 0;
    Value value{};
  };

  void place(RegionKey key, const Value& value) {
    std::size_t i = RegionKeyHash{}(key) & mask_;
    while (slots_[i].generation == generation_) {
      if (slots_[i].key == key) {
        slots_[i].value = value;
        return;
      }
      i = (i + 1) & mask_;
    }
    slots_[i] = Slot{key, generation_, value};
    ++size_;
  }

  void rehash(std::size_t capacity) {
    std::vector<Slot> old = std::move(slots_);
    const std::uint32_t live = generation_;
    slots_.assign(capacity, Slot{});
    mask_ = capacity - 1;
    generation_ = 1;
    size_ = 0;
    for (const Slot& s : old) {
      if (s.generation == live) place(s.key, s.value);
    }
  }

  std::vector<Slot> slots_;
  std::size_t mask_ = 0;
  std::size_t size_ = 0;
  std::uint32_t generation_ = 1;
};

}  // namespace condopt::detail
