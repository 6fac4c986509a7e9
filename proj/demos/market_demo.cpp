// Wealth exchange among 1000 agents starting from equal wealth.
// Prints the Gini coefficient as inequality builds up, then the top decile's share.

#include <iostream>

#include <fmt/core.h>

#include "kmm/kinetic_market.hpp"

int main() {
  namespace mk = kmm::market;
  auto state = mk::WealthState::equal(1000, 1.0);
  for (std::uint64_t t = 1; t <= 500; ++t) {
    mk::sweep(state, mk::Eq1{}, 42, t);
    if (t == 1 || t == 5 || t == 20 || t == 100 || t == 500) {
      fmt::print("sweep {:>3}  gini {:.3f}  total {}\n", t, *mk::gini(state), state.total());
    }
  }
  const auto curve = mk::lorenz(state);
  fmt::print("richest 10% hold {:.1f}% of the wealth\n", 100.0 * (1.0 - curve[899].wealth_frac));
}
