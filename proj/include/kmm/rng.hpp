#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

namespace kmm {

/// SplitMix64 finalizer. Used both as a seed mixer and as the step of SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a substream seed from a master seed and a list of coordinates
/// (e.g. sweep index, pair index). Order of coordinates matters.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL);
  for (std::uint64_t c : coords) {
    h = mix64(h ^ mix64(c + 0x9e3779b97f4a7c15ULL));
  }
  return h;
}

/// 64-bit FNV-1a, for turning stable text keys into seed coordinates.
constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SplitMix64 generator. Tiny state, so it is cheap to construct one per
/// substream (one per market pair per sweep).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

// The distributions below are written out instead of using <random>'s
// distribution classes, whose output sequences differ between standard
// library implementations. Every CSV the tools write must be reproducible
// from the seed alone.

/// Uniform integer in [0, bound). bound must be > 0. Rejection sampling, unbiased.
template <class Urbg>
std::uint64_t uniform_below(Urbg& rng, std::uint64_t bound) {
  static_assert(Urbg::min() == 0 && Urbg::max() == std::numeric_limits<std::uint64_t>::max(),
                "expects a full-range 64-bit generator");
  const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

/// Uniform real in [0, 1) with 53 random bits.
template <class Urbg>
double uniform01(Urbg& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform real in [0, 1]; both endpoints reachable.
template <class Urbg>
double uniform_closed01(Urbg& rng) {
  return static_cast<double>(uniform_below(rng, (1ULL << 53) + 1)) * 0x1.0p-53;
}

template <class Urbg>
bool coin_flip(Urbg& rng) {
  return (rng() >> 63) != 0;
}

/// Fisher-Yates shuffle; every permutation equally likely.
template <class T, class Urbg>
void shuffle(std::span<T> items, Urbg& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace kmm
