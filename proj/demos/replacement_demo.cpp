// One family of a small TSP, resolved by each replacement rule.

#include <iostream>
#include <random>

#include <fmt/core.h>
#include <fmt/ranges.h>

#include "kmm/kmm.hpp"

int main() {
  std::mt19937_64 rng(7);
  std::vector<kmm::tsp::Point> pts;
  for (int c = 0; c < 12; ++c) pts.push_back({double(rng() % 100), double(rng() % 100)});
  const kmm::TspInstance inst("demo12", pts);

  const auto pi = kmm::Individual::evaluate(inst, kmm::random_tour(12, rng));
  const auto pj = kmm::Individual::evaluate(inst, kmm::random_tour(12, rng));
  const auto family = kmm::make_family(pi, pj, 6, inst, rng);
  const auto f = family.fitnesses();
  fmt::print("family fitness (parent i, parent j, offspring...): {}\n", f);

  for (kmm::Rule rule : kmm::kAllRules) {
    const auto sel = kmm::select_survivors(rule, std::span<const kmm::Length>(f), rng);
    fmt::print("{:>3}: survivors {} and {}\n", kmm::rule_name(rule), f[sel.survivor_i], f[sel.survivor_j]);
    if (sel.kmm) std::cout << "     " << kmm::trace_json(rule, f, sel).dump() << '\n';
  }
}
