// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace condopt {

/// Engine used everywhere. std::mt19937_64 output is fixed by the standard, and
/// the distributions below come from Boost.Random (fixed algorithms, unlike
/// the implementation-defined std:: distributions), so seeded runs reproduce
/// across platforms.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Independent generator for replicate `stream` of a run seeded with `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

double uniform01(Rng& rng);
bool bernoulli(Rng& rng, double p);
/// Index drawn proportionally to nonnegative `weights` (need not be normalized).
std::size_t categorical(Rng& rng, std::span<const double> weights);
double beta_draw(Rng& rng, double a, double b);
double normal_draw(Rng& rng);
/// Uniform random permutation of `values` in place (Fisher-Yates).
void shuffle(std::span<std::uint32_t> values, Rng& rng);

}  // namespace condopt
