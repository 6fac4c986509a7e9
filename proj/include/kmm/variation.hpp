#pragma once

// Offspring generation: partially mapped crossover (PMX) and family assembly.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "kmm/errors.hpp"
#include "kmm/rng.hpp"
#include "kmm/tsplib.hpp"

namespace kmm {

using tsp::City;
using tsp::Length;
using tsp::Tour;
using tsp::TspInstance;

/// A tour together with its cached tour length (lower is better).
struct Individual {
  Tour tour;
  Length fitness = 0;

  static Individual evaluate(const TspInstance& instance, Tour tour) {
    const Length length = tsp::tour_length(instance, tour);
    return {std::move(tour), length};
  }

  bool operator==(const Individual&) const = default;
};

/// Two parents and their offspring competing for the parents' two slots.
/// members()[0] is parent i, members()[1] is parent j, the rest are offspring.
class Family {
 public:
  Family(Individual parent_i, Individual parent_j, std::vector<Individual> offspring) {
    members_.reserve(offspring.size() + 2);
    members_.push_back(std::move(parent_i));
    members_.push_back(std::move(parent_j));
    for (auto& child : offspring) members_.push_back(std::move(child));
  }

  static constexpr std::size_t kParentI = 0;
  static constexpr std::size_t kParentJ = 1;

  const Individual& parent_i() const noexcept { return members_[kParentI]; }
  const Individual& parent_j() const noexcept { return members_[kParentJ]; }
  std::span<const Individual> offspring() const noexcept {
    return std::span<const Individual>(members_).subspan(2);
  }
  std::span<const Individual> members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }

  /// Member fitnesses in member order.
  std::vector<Length> fitnesses() const {
    std::vector<Length> out;
    out.reserve(members_.size());
    for (const auto& m : members_) out.push_back(m.fitness);
    return out;
  }

  /// The family's fitness multiset, ascending.
  std::vector<Length> fitness_multiset() const {
    auto out = fitnesses();
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<Individual> members_;
};

namespace detail {

// Child keeping donor's [cut1, cut2) segment; other positions come from
// `other`, following the segment mapping until the city is free.
inline Tour pmx_child(std::span<const City> donor, std::span<const City> other, std::size_t cut1,
                      std::size_t cut2) {
  const std::size_t n = donor.size();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> segment_pos(n, kNone);  // city -> its position in donor's segment
  for (std::size_t p = cut1; p < cut2; ++p) segment_pos[donor[p]] = p;

  Tour child;
  child.order.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    if (p >= cut1 && p < cut2) {
      child.order[p] = donor[p];
      continue;
    }
    City city = other[p];
    while (segment_pos[city] != kNone) city = other[segment_pos[city]];
    child.order[p] = city;
  }
  return child;
}

}  // namespace detail

/// PMX crossover. child1 keeps p1's segment [cut1, cut2), child2 keeps p2's.
inline std::pair<Tour, Tour> pmx(const Tour& p1, const Tour& p2, std::size_t cut1, std::size_t cut2) {
  const std::size_t n = p1.size();
  if (p2.size() != n) {
    throw DomainError(fmt::format("parents differ in dimension ({} vs {})", n, p2.size()));
  }
  if (!(cut1 < cut2 && cut2 <= n)) {
    throw DomainError(fmt::format("invalid cuts ({}, {}) for dimension {}", cut1, cut2, n));
  }
  if (!tsp::is_permutation_of(p1.order, n) || !tsp::is_permutation_of(p2.order, n)) {
    throw DomainError("PMX parents must be permutations of 0..n-1");
  }
  return {detail::pmx_child(p1.order, p2.order, cut1, cut2),
          detail::pmx_child(p2.order, p1.order, cut1, cut2)};
}

/// Uniform cut pair over all 0 <= cut1 < cut2 <= dimension.
template <class Urbg>
std::pair<std::size_t, std::size_t> random_cuts(std::size_t dimension, Urbg& rng) {
  for (;;) {
    const auto a = static_cast<std::size_t>(uniform_below(rng, dimension + 1));
    const auto b = static_cast<std::size_t>(uniform_below(rng, dimension + 1));
    if (a != b) return {std::min(a, b), std::max(a, b)};
  }
}

/// Uniformly random permutation of 0..dimension-1.
template <class Urbg>
Tour random_tour(std::size_t dimension, Urbg& rng) {
  if (dimension < 3) throw DomainError("a tour needs at least 3 cities");
  Tour tour;
  tour.order.resize(dimension);
  std::iota(tour.order.begin(), tour.order.end(), City{0});
  shuffle(std::span<City>(tour.order), rng);
  return tour;
}

/// Builds a family of `offspring` children from ceil(offspring/2) PMX
/// applications with independent random cuts. An odd count drops the second
/// child of the last crossover. Offspring are kept in generation order.
/// Parents are copied, never modified. No mutation is applied.
template <class Urbg>
Family make_family(const Individual& parent_i, const Individual& parent_j, std::size_t offspring,
                   const TspInstance& instance, Urbg& rng) {
  if (offspring == 0) throw DomainError("a family needs at least one offspring");
  std::vector<Individual> children;
  children.reserve(offspring + 1);
  while (children.size() < offspring) {
    const auto [cut1, cut2] = random_cuts(instance.dimension(), rng);
    auto [c1, c2] = pmx(parent_i.tour, parent_j.tour, cut1, cut2);
    const Length f1 = tsp::tour_length_unchecked(instance, c1.order);
    children.push_back({std::move(c1), f1});
    if (children.size() < offspring) {
      const Length f2 = tsp::tour_length_unchecked(instance, c2.order);
      children.push_back({std::move(c2), f2});
    }
  }
  return Family(parent_i, parent_j, std::move(children));
}

}  // namespace kmm
