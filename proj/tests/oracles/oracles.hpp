#pragma once

// Reference implementations used only by tests. They are written from the
// rule definitions directly, by enumeration or brute force, and share no code
// with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace kmm::oracle {

/// Gini by the O(N^2) definition sum_ij |w_i - w_j| / (2 N^2 mean).
inline double gini_brute(std::span<const double> w) {
  double abs_sum = 0.0;
  for (double a : w) {
    for (double b : w) abs_sum += std::fabs(a - b);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const auto n = static_cast<double>(w.size());
  return abs_sum / (2.0 * n * total);
}

/// Exact outcome law of the kinetic-market rule on a family with fitness f
/// (f[0] = parent i, f[1] = parent j): maps (survivor_i, survivor_j) member
/// indices to their probability. Enumerates every ordered pair of members
/// and checks it against the rule's conditions.
inline std::map<std::pair<std::size_t, std::size_t>, double> kmm_outcomes(std::span<const std::int64_t> f) {
  const std::size_t n = f.size();
  std::size_t l_size = 0;
  for (std::size_t a = 0; a < n; ++a) l_size += f[a] <= f[0] ? 1 : 0;

  std::map<std::pair<std::size_t, std::size_t>, double> law;
  for (std::size_t a = 0; a < n; ++a) {
    if (f[a] > f[0]) continue;
    const std::int64_t budget = f[1] + f[0] - f[a];
    // Candidates for survivor j given survivor i = a.
    std::vector<std::size_t> q;
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a && f[b] >= f[1] && f[b] <= budget) q.push_back(b);
    }
    if (q.empty()) {
      law[{a, 0}] += 1.0 / static_cast<double>(l_size);
      continue;
    }
    std::int64_t top = f[q[0]];
    for (std::size_t b : q) top = std::max(top, f[b]);
    std::size_t ties = 0;
    for (std::size_t b : q) ties += f[b] == top ? 1 : 0;
    for (std::size_t b : q) {
      if (f[b] == top) law[{a, b}] += 1.0 / static_cast<double>(l_size * ties);
    }
  }
  return law;
}

/// Pearson chi-square goodness-of-fit p-value for counts against expected
/// probabilities.
inline double chi_square_p(std::span<const std::size_t> counts, std::span<const double> probs) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double stat = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double expected = total * probs[c];
    const double d = static_cast<double>(counts[c]) - expected;
    stat += d * d / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline double chi_square_uniform_p(std::span<const std::size_t> counts) {
  std::vector<double> probs(counts.size(), 1.0 / static_cast<double>(counts.size()));
  return chi_square_p(counts, probs);
}

}  // namespace kmm::oracle
