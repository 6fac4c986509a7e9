#pragma once

// Family-competition replacement rules. Each picks the two family members that
// take over the parents' population slots.
//
// All rules select MEMBERS by index, not fitness values: two members with the
// same fitness are distinct candidates. Index 0 is parent i and index 1 is
// parent j (see Family). Fitness is minimized.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kmm/errors.hpp"
#include "kmm/rng.hpp"
#include "kmm/variation.hpp"

namespace kmm {

enum class Rule { kmm, bb, br };

inline constexpr std::array<Rule, 3> kAllRules{Rule::kmm, Rule::bb, Rule::br};

inline std::string_view rule_name(Rule rule) {
  switch (rule) {
    case Rule::kmm: return "kmm";
    case Rule::bb: return "bb";
    case Rule::br: return "br";
  }
  return "?";
}

inline std::optional<Rule> parse_rule(std::string_view name) {
  for (Rule r : kAllRules) {
    if (rule_name(r) == name) return r;
  }
  return std::nullopt;
}

/// Sets built by the kinetic-market rule, as member indices.
struct KmmTrace {
  std::vector<std::size_t> at_most_i;      // fitness <= parent i (candidates for survivor i)
  std::vector<std::size_t> at_least_j;     // fitness >= parent j, survivor i excluded
  std::vector<std::size_t> within_budget;  // at_least_j members with fitness <= budget
  Length budget = 0;                       // f(parent j) + f(parent i) - f(survivor i)
  bool fallback_used = false;
};

struct Selection {
  std::size_t survivor_i = 0;
  std::size_t survivor_j = 1;
  std::optional<KmmTrace> kmm;
  std::vector<std::size_t> rest;  // BB/BR: members other than survivor i
};

namespace detail {

inline void require_family(std::span<const Length> fitness) {
  if (fitness.size() < 2) throw DomainError("a family needs both parents");
}

// Lowest fitness, ties to the lowest index.
inline std::size_t best_member(std::span<const Length> fitness) {
  return static_cast<std::size_t>(std::min_element(fitness.begin(), fitness.end()) - fitness.begin());
}

inline std::vector<std::size_t> all_but(std::size_t count, std::size_t excluded) {
  std::vector<std::size_t> out;
  out.reserve(count - 1);
  for (std::size_t m = 0; m < count; ++m) {
    if (m != excluded) out.push_back(m);
  }
  return out;
}

}  // namespace detail

/// Kinetic-market replacement over a fitness vector (index 0 = parent i,
/// index 1 = parent j).
///
/// Survivor i is drawn uniformly from the members no worse than parent i.
/// Its improvement f(i) - f(survivor i) is the budget parent j may absorb:
/// survivor j is the worst member that is no better than parent j and no
/// worse than f(j) + that improvement. Hence the pair's fitness sum never
/// increases, and survivor i never gets worse than parent i.
template <class Urbg>
Selection kmm_select(std::span<const Length> fitness, Urbg& rng) {
  detail::require_family(fitness);
  const Length f_i = fitness[Family::kParentI];
  const Length f_j = fitness[Family::kParentJ];

  KmmTrace trace;
  for (std::size_t m = 0; m < fitness.size(); ++m) {
    if (fitness[m] <= f_i) trace.at_most_i.push_back(m);
  }
  const std::size_t survivor_i = trace.at_most_i[uniform_below(rng, trace.at_most_i.size())];
  trace.budget = f_j + (f_i - fitness[survivor_i]);

  for (std::size_t m = 0; m < fitness.size(); ++m) {
    if (m == survivor_i || fitness[m] < f_j) continue;
    trace.at_least_j.push_back(m);
    if (fitness[m] <= trace.budget) trace.within_budget.push_back(m);
  }

  std::size_t survivor_j = Family::kParentI;
  if (trace.within_budget.empty()) {
    // Survivor j falls back to parent i; not reachable with both parents in
    // the family, kept so the rule always yields two survivors.
    trace.fallback_used = true;
  } else {
    Length top = fitness[trace.within_budget.front()];
    for (std::size_t m : trace.within_budget) top = std::max(top, fitness[m]);
    std::vector<std::size_t> tied;
    for (std::size_t m : trace.within_budget) {
      if (fitness[m] == top) tied.push_back(m);
    }
    survivor_j = tied[uniform_below(rng, tied.size())];
  }
  return {survivor_i, survivor_j, std::move(trace), {}};
}

/// Two best members; ties to the lowest index. Deterministic.
inline Selection bb_select(std::span<const Length> fitness) {
  detail::require_family(fitness);
  const std::size_t survivor_i = detail::best_member(fitness);
  auto rest = detail::all_but(fitness.size(), survivor_i);
  std::size_t survivor_j = rest.front();
  for (std::size_t m : rest) {
    if (fitness[m] < fitness[survivor_j]) survivor_j = m;
  }
  return {survivor_i, survivor_j, std::nullopt, std::move(rest)};
}

/// Best member (lowest index on ties) plus a uniformly random other member.
template <class Urbg>
Selection br_select(std::span<const Length> fitness, Urbg& rng) {
  detail::require_family(fitness);
  const std::size_t survivor_i = detail::best_member(fitness);
  auto rest = detail::all_but(fitness.size(), survivor_i);
  const std::size_t survivor_j = rest[uniform_below(rng, rest.size())];
  return {survivor_i, survivor_j, std::nullopt, std::move(rest)};
}

template <class Urbg>
Selection select_survivors(Rule rule, std::span<const Length> fitness, Urbg& rng) {
  switch (rule) {
    case Rule::kmm: return kmm_select(fitness, rng);
    case Rule::bb: return bb_select(fitness);
    case Rule::br: return br_select(fitness, rng);
  }
  throw DomainError("unknown replacement rule");
}

/// The two surviving individuals and the selection that produced them.
struct ReplacementOutcome {
  Individual survivor_i;
  Individual survivor_j;
  Selection selection;
};

inline ReplacementOutcome make_outcome(const Family& family, Selection selection) {
  const auto members = family.members();
  return {members[selection.survivor_i], members[selection.survivor_j], std::move(selection)};
}

template <class Urbg>
ReplacementOutcome kmm_replace(const Family& family, Urbg& rng) {
  const auto f = family.fitnesses();
  return make_outcome(family, kmm_select(std::span<const Length>(f), rng));
}

inline ReplacementOutcome bb_replace(const Family& family) {
  const auto f = family.fitnesses();
  return make_outcome(family, bb_select(f));
}

template <class Urbg>
ReplacementOutcome br_replace(const Family& family, Urbg& rng) {
  const auto f = family.fitnesses();
  return make_outcome(family, br_select(std::span<const Length>(f), rng));
}

template <class Urbg>
ReplacementOutcome replace(Rule rule, const Family& family, Urbg& rng) {
  const auto f = family.fitnesses();
  return make_outcome(family, select_survivors(rule, std::span<const Length>(f), rng));
}

/// One JSON object describing a replacement, for the --trace log.
inline nlohmann::json trace_json(Rule rule, std::span<const Length> fitness, const Selection& s) {
  auto values = [&](const std::vector<std::size_t>& members) {
    std::vector<Length> out;
    out.reserve(members.size());
    for (std::size_t m : members) out.push_back(fitness[m]);
    return out;
  };
  nlohmann::json j;
  j["rule"] = rule_name(rule);
  j["family"] = std::vector<Length>(fitness.begin(), fitness.end());
  j["survivor_i"] = s.survivor_i;
  j["survivor_j"] = s.survivor_j;
  if (s.kmm) {
    j["L"] = values(s.kmm->at_most_i);
    j["W"] = values(s.kmm->at_least_j);
    j["Q"] = values(s.kmm->within_budget);
    j["budget"] = s.kmm->budget;
    j["fallback_used"] = s.kmm->fallback_used;
  } else {
    j["B"] = values(s.rest);
  }
  return j;
}

}  // namespace kmm
