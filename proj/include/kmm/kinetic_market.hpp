#pragma once

// Kinetic wealth-exchange market: random disjoint pairs of agents trade under
// a stochastic exchange rule, and inequality statistics over the population.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "kmm/errors.hpp"
#include "kmm/rng.hpp"

namespace kmm::market {

namespace detail {

inline void require_wealth(double m, const char* name) {
  if (!std::isfinite(m) || m < 0.0) {
    throw DomainError(fmt::format("{} must be finite and nonnegative, got {}", name, m));
  }
}

// Neumaier compensated sum; keeps recomputed totals within a few ulps.
inline double stable_sum(std::span<const double> xs) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

}  // namespace detail

/// Population of agent wealths with a cached total.
class WealthState {
 public:
  explicit WealthState(std::vector<double> wealth) : wealth_(std::move(wealth)) {
    if (wealth_.size() < 2) throw ConfigError("a market needs at least 2 agents");
    for (double w : wealth_) detail::require_wealth(w, "wealth");
    recompute_total();
  }

  static WealthState equal(std::size_t agents, double each = 1.0) {
    return WealthState(std::vector<double>(agents, each));
  }

  std::size_t agent_count() const noexcept { return wealth_.size(); }
  double total() const noexcept { return total_; }
  std::span<const double> wealth() const noexcept { return wealth_; }
  double operator[](std::size_t agent) const { return wealth_[agent]; }

  // Mutable access for the exchange loop; callers must keep entries >= 0
  // and call recompute_total() afterwards.
  std::span<double> mutable_wealth() noexcept { return wealth_; }

  void recompute_total() { total_ = detail::stable_sum(wealth_); }

  bool operator==(const WealthState&) const = default;

 private:
  std::vector<double> wealth_;
  double total_ = 0.0;
};

// ---------------------------------------------------------------------------
// Pairwise exchange rules

/// Conservative exchange: agent i keeps the fraction eps of its wealth and the
/// remainder moves to agent j. Returns the pair's new (m_i, m_j).
inline std::pair<double, double> exchange_eq1(double m_i, double m_j, double eps) {
  detail::require_wealth(m_i, "m_i");
  detail::require_wealth(m_j, "m_j");
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw DomainError(fmt::format("eps must lie in [0, 1], got {}", eps));
  }
  const double next_i = eps * m_i;
  return {next_i, m_j + (m_i - next_i)};
}

/// Sampled exchange with an explicit sample set: m_i(t+1) is a uniform pick
/// from `samples` (each in [0, m_i]) and j receives exactly what i lost.
template <class Urbg>
std::pair<double, double> exchange_sampled_from(double m_i, double m_j,
                                                std::span<const double> samples, Urbg& rng) {
  detail::require_wealth(m_i, "m_i");
  detail::require_wealth(m_j, "m_j");
  if (samples.empty()) throw DomainError("sample set must be nonempty (k >= 1)");
  for (double s : samples) {
    if (!(s >= 0.0 && s <= m_i)) {
      throw DomainError(fmt::format("sample {} lies outside [0, {}]", s, m_i));
    }
  }
  const double next_i = samples[uniform_below(rng, samples.size())];
  return {next_i, m_j + (m_i - next_i)};
}

/// Sampled exchange: draws k lower-energy states uniformly from [0, m_i] and
/// moves agent i to one of them uniformly at random.
template <class Urbg>
std::pair<double, double> exchange_sampled(double m_i, double m_j, unsigned k, Urbg& rng) {
  if (k == 0) throw DomainError("k must be >= 1");
  detail::require_wealth(m_i, "m_i");
  std::vector<double> samples(k);
  for (double& s : samples) s = uniform_closed01(rng) * m_i;
  return exchange_sampled_from(m_i, m_j, std::span<const double>(samples), rng);
}

struct Eq1 {};
struct Sampled {
  unsigned k = 1;
};
using Variant = std::variant<Eq1, Sampled>;

// ---------------------------------------------------------------------------
// Sweeps

enum class RoleAssignment {
  coin_flip,   // fair coin decides which pair member plays i
  first_is_i,  // first agent drawn by the shuffle plays i
};

struct AgentPair {
  std::size_t i;
  std::size_t j;
  bool operator==(const AgentPair&) const = default;
};

// Substream coordinates. Every random draw in a sweep comes from a generator
// seeded by (seed, sweep index, purpose, pair index), so the outcome does not
// depend on the order in which pairs are processed.
namespace stream {
inline constexpr std::uint64_t kShuffle = 0;
inline constexpr std::uint64_t kRole = 1;
inline constexpr std::uint64_t kExchange = 2;
}  // namespace stream

/// Random perfect matching of agents into N/2 disjoint pairs, with roles.
inline std::vector<AgentPair> sweep_pairs(std::size_t agents, std::uint64_t seed,
                                          std::uint64_t sweep_index,
                                          RoleAssignment roles = RoleAssignment::coin_flip) {
  if (agents < 2 || agents % 2 != 0) throw ConfigError("agent count must be even");
  std::vector<std::size_t> order(agents);
  for (std::size_t a = 0; a < agents; ++a) order[a] = a;
  SplitMix64 shuffle_rng(derive_seed(seed, {sweep_index, stream::kShuffle}));
  shuffle(std::span<std::size_t>(order), shuffle_rng);

  std::vector<AgentPair> pairs;
  pairs.reserve(agents / 2);
  for (std::size_t p = 0; p < agents / 2; ++p) {
    AgentPair pair{order[2 * p], order[2 * p + 1]};
    if (roles == RoleAssignment::coin_flip) {
      SplitMix64 role_rng(derive_seed(seed, {sweep_index, stream::kRole, p}));
      if (coin_flip(role_rng)) std::swap(pair.i, pair.j);
    }
    pairs.push_back(pair);
  }
  return pairs;
}

/// Applies `exchange(m_i, m_j, rng) -> pair<double,double>` to every pair,
/// each with its own substream. With threads > 1 the pairs are split into
/// contiguous chunks; results are bit-identical to the sequential order.
template <class Exchange>
void apply_exchanges(WealthState& state, std::span<const AgentPair> pairs, std::uint64_t seed,
                     std::uint64_t sweep_index, Exchange&& exchange, unsigned threads = 1) {
  auto wealth = state.mutable_wealth();
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      SplitMix64 rng(derive_seed(seed, {sweep_index, stream::kExchange, p}));
      const auto [next_i, next_j] = exchange(wealth[pairs[p].i], wealth[pairs[p].j], rng);
      wealth[pairs[p].i] = next_i;
      wealth[pairs[p].j] = next_j;
    }
  };
  if (threads <= 1 || pairs.size() < 2 * static_cast<std::size_t>(threads)) {
    run_range(0, pairs.size());
  } else {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (pairs.size() + threads - 1) / threads;
    for (std::size_t begin = 0; begin < pairs.size(); begin += chunk) {
      workers.emplace_back(run_range, begin, std::min(pairs.size(), begin + chunk));
    }
  }
  state.recompute_total();
}

struct SweepOptions {
  RoleAssignment roles = RoleAssignment::coin_flip;
  unsigned threads = 1;
};

/// One generational sweep: random matching, then one exchange per pair.
inline void sweep(WealthState& state, const Variant& variant, std::uint64_t seed,
                  std::uint64_t sweep_index, const SweepOptions& options = {}) {
  const auto pairs = sweep_pairs(state.agent_count(), seed, sweep_index, options.roles);
  if (const auto* sampled = std::get_if<Sampled>(&variant)) {
    if (sampled->k == 0) throw ConfigError("sampled variant needs k >= 1");
    const unsigned k = sampled->k;
    apply_exchanges(
        state, pairs, seed, sweep_index,
        [k](double m_i, double m_j, SplitMix64& rng) { return exchange_sampled(m_i, m_j, k, rng); },
        options.threads);
  } else {
    apply_exchanges(
        state, pairs, seed, sweep_index,
        [](double m_i, double m_j, SplitMix64& rng) {
          return exchange_eq1(m_i, m_j, uniform_closed01(rng));
        },
        options.threads);
  }
}

// ---------------------------------------------------------------------------
// Inequality statistics

/// Gini coefficient sum_ij |w_i - w_j| / (2 N^2 mean). Empty when the total is
/// zero, where the coefficient is undefined.
inline std::optional<double> gini(const WealthState& state) {
  if (!(state.total() > 0.0)) return std::nullopt;
  std::vector<double> sorted(state.wealth().begin(), state.wealth().end());
  std::sort(sorted.begin(), sorted.end());
  // With ascending order, sum_ij |w_i - w_j| = 2 sum_r (2r - N + 1) w_(r), r 0-based.
  const auto n = static_cast<double>(sorted.size());
  double weighted = 0.0;
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    weighted += (2.0 * static_cast<double>(r) - n + 1.0) * sorted[r];
  }
  const double sum = detail::stable_sum(sorted);
  return std::clamp(weighted / (n * sum), 0.0, 1.0);
}

struct LorenzPoint {
  double pop_frac;
  double wealth_frac;
};

/// Lorenz curve over ascending wealths, from (0,0) to (1,1), one point per agent.
inline std::vector<LorenzPoint> lorenz(const WealthState& state) {
  if (!(state.total() > 0.0)) throw DomainError("Lorenz curve undefined for zero total wealth");
  std::vector<double> sorted(state.wealth().begin(), state.wealth().end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  std::vector<LorenzPoint> curve;
  curve.reserve(sorted.size() + 1);
  curve.push_back({0.0, 0.0});
  double cumulative = 0.0;
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    cumulative += sorted[r];
    curve.push_back({static_cast<double>(r + 1) / n, std::min(1.0, cumulative / state.total())});
  }
  curve.back() = {1.0, 1.0};
  return curve;
}

struct HistogramBin {
  double lower;
  std::size_t count;
};

/// Equal-width histogram over [0, max wealth]; the maximum lands in the last bin.
inline std::vector<HistogramBin> histogram(const WealthState& state, std::size_t bins = 50) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  const auto w = state.wealth();
  const double top = *std::max_element(w.begin(), w.end());
  const double width = top / static_cast<double>(bins);
  std::vector<HistogramBin> result(bins);
  for (std::size_t b = 0; b < bins; ++b) result[b] = {width * static_cast<double>(b), 0};
  for (double x : w) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>(x / width) : 0;
    result[std::min(b, bins - 1)].count += 1;
  }
  return result;
}

struct MarketStats {
  std::uint64_t sweep_index = 0;
  double total = 0.0;
  double min_wealth = 0.0;
  double max_wealth = 0.0;
  std::optional<double> gini;
  std::vector<HistogramBin> histogram;
};

inline MarketStats market_stats(const WealthState& state, std::uint64_t sweep_index,
                                std::size_t bins = 50) {
  const auto [lo, hi] = std::minmax_element(state.wealth().begin(), state.wealth().end());
  return {sweep_index, state.total(), *lo, *hi, gini(state), histogram(state, bins)};
}

// ---------------------------------------------------------------------------
// Whole simulations

struct MarketConfig {
  std::size_t agents = 1000;
  std::uint64_t sweeps = 1000;
  Variant variant = Eq1{};
  std::uint64_t seed = 0;
  std::uint64_t record_every = 1;
  double initial_wealth = 1.0;
  std::size_t bins = 50;
  SweepOptions options;

  void validate() const {
    if (agents < 2 || agents % 2 != 0) throw ConfigError("agent count must be even");
    if (record_every == 0) throw ConfigError("record interval must be >= 1");
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (!std::isfinite(initial_wealth) || initial_wealth < 0.0) {
      throw ConfigError("initial wealth must be finite and nonnegative");
    }
    if (const auto* s = std::get_if<Sampled>(&variant); s != nullptr && s->k == 0) {
      throw ConfigError("sampled variant needs k >= 1");
    }
  }
};

/// Time-series row; the histogram is only kept for the final state.
struct MarketSample {
  std::uint64_t sweep = 0;
  double total = 0.0;
  double min_wealth = 0.0;
  double max_wealth = 0.0;
  std::optional<double> gini;
};

struct MarketRun {
  std::vector<MarketSample> series;
  WealthState final_state;
};

/// Runs `sweeps` sweeps from equal wealth, recording sweep 0, every
/// record_every-th sweep, and the last sweep.
inline MarketRun simulate_market(const MarketConfig& config) {
  config.validate();
  WealthState state = WealthState::equal(config.agents, config.initial_wealth);
  std::vector<MarketSample> series;
  auto record = [&](std::uint64_t t) {
    const auto [lo, hi] = std::minmax_element(state.wealth().begin(), state.wealth().end());
    series.push_back({t, state.total(), *lo, *hi, gini(state)});
  };
  record(0);
  for (std::uint64_t t = 1; t <= config.sweeps; ++t) {
    sweep(state, config.variant, config.seed, t, config.options);
    if (t % config.record_every == 0 || t == config.sweeps) record(t);
  }
  return {std::move(series), std::move(state)};
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_series_csv(std::ostream& out, std::span<const MarketSample> series) {
  out << "sweep,total,min,max,gini\n";
  for (const auto& s : series) {
    out << fmt::format("{},{},{},{},{}\n", s.sweep, s.total, s.min_wealth, s.max_wealth,
                       s.gini ? fmt::format("{}", *s.gini) : std::string("nan"));
  }
}

inline void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins) {
  out << "bin_lower,count\n";
  for (const auto& b : bins) out << fmt::format("{},{}\n", b.lower, b.count);
}

inline void write_lorenz_csv(std::ostream& out, std::span<const LorenzPoint> curve) {
  out << "pop_frac,wealth_frac\n";
  for (const auto& p : curve) out << fmt::format("{},{}\n", p.pop_frac, p.wealth_frac);
}

}  // namespace kmm::market
