#pragma once

// Seeded GA runs with family-competition replacement, and batch experiments
// over a grid of (rule, k) configurations.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "kmm/errors.hpp"
#include "kmm/replacement.hpp"
#include "kmm/rng.hpp"
#include "kmm/tsplib.hpp"
#include "kmm/variation.hpp"

namespace kmm {

inline constexpr const char* kToolVersion = "1.0.0";

enum class PairRoles {
  coin_flip,   // fair coin picks parent i
  worse_is_i,  // the parent with the larger tour length plays i
};

inline std::string_view roles_name(PairRoles roles) {
  return roles == PairRoles::coin_flip ? "coin-flip" : "worse-is-i";
}

struct RunConfig {
  std::string instance_path;
  std::size_t population_size = 100;
  std::size_t k = 10;
  Rule rule = Rule::kmm;
  std::uint64_t seed = 0;
  std::uint64_t max_evaluations = 2'000'000;
  std::uint64_t record_interval = 10;
  PairRoles role_assignment = PairRoles::coin_flip;
  bool k_includes_parents = false;

  /// Offspring per family. With k_includes_parents, k counts the parents too.
  std::size_t offspring_per_family() const { return k_includes_parents ? k - 2 : k; }

  void validate() const {
    if (population_size == 0 || population_size % 2 != 0) {
      throw ConfigError(fmt::format("population size must be positive and even, got {}", population_size));
    }
    if (k == 0) throw ConfigError("k must be >= 1");
    if (k_includes_parents && k < 3) {
      throw ConfigError("with k counting the parents, k must be >= 3 to produce offspring");
    }
    if (max_evaluations < population_size) {
      throw ConfigError(fmt::format("evaluation budget {} is below the population size {}",
                                    max_evaluations, population_size));
    }
    if (record_interval == 0) throw ConfigError("record interval must be >= 1");
  }
};

struct GenerationStats {
  std::uint64_t generation = 0;
  std::uint64_t evaluations = 0;  // offspring evaluations so far
  Length best = 0;
  double mean = 0.0;
  double fitness_std = 0.0;
  std::size_t distinct_genomes = 0;
  Length best_so_far = 0;

  bool operator==(const GenerationStats&) const = default;
};

struct RunRecord {
  RunConfig config;
  std::vector<GenerationStats> stats;
  Tour final_best_tour;
  double wall_time = 0.0;  // seconds
};

struct DiversityStats {
  double fitness_std = 0.0;
  std::size_t distinct_genomes = 0;
};

/// Sample standard deviation (n - 1) of fitnesses, and the number of distinct
/// tours compared as raw city sequences (a rotation counts as distinct).
inline DiversityStats diversity_stats(std::span<const Individual> population) {
  if (population.empty()) throw DomainError("population must be nonempty");
  const auto n = static_cast<double>(population.size());
  double mean = 0.0;
  for (const auto& ind : population) mean += static_cast<double>(ind.fitness);
  mean /= n;
  double ss = 0.0;
  for (const auto& ind : population) {
    const double d = static_cast<double>(ind.fitness) - mean;
    ss += d * d;
  }
  std::set<std::vector<City>> genomes;
  for (const auto& ind : population) genomes.insert(ind.tour.order);
  return {population.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0, genomes.size()};
}

/// Runs one GA. Each generation shuffles the population into disjoint pairs,
/// builds a family per pair and lets the replacement rule choose the two
/// members that take the pair's slots. Stops at the first generation boundary
/// where offspring evaluations reach the budget. With `trace`, writes one JSON
/// line per replacement.
inline RunRecord evolve(const RunConfig& config, const TspInstance& instance,
                        std::ostream* trace = nullptr) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  std::mt19937_64 rng(derive_seed(config.seed, {}));
  const std::size_t n = config.population_size;
  const std::size_t offspring = config.offspring_per_family();

  std::vector<Individual> population;
  population.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    population.push_back(Individual::evaluate(instance, random_tour(instance.dimension(), rng)));
  }

  RunRecord record;
  record.config = config;
  Individual best_ever = *std::min_element(
      population.begin(), population.end(),
      [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });

  std::uint64_t generation = 0;
  std::uint64_t evaluations = 0;
  auto snapshot = [&] {
    const auto div = diversity_stats(population);
    Length best = population.front().fitness;
    double sum = 0.0;
    for (const auto& ind : population) {
      best = std::min(best, ind.fitness);
      sum += static_cast<double>(ind.fitness);
    }
    record.stats.push_back({generation, evaluations, best, sum / static_cast<double>(n),
                            div.fitness_std, div.distinct_genomes, best_ever.fitness});
  };
  snapshot();

  std::vector<std::size_t> order(n);
  while (evaluations < config.max_evaluations) {
    ++generation;
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t p = 0; p < n / 2; ++p) {
      std::size_t slot_i = order[2 * p];
      std::size_t slot_j = order[2 * p + 1];
      if (config.role_assignment == PairRoles::coin_flip) {
        if (coin_flip(rng)) std::swap(slot_i, slot_j);
      } else if (population[slot_j].fitness > population[slot_i].fitness) {
        std::swap(slot_i, slot_j);
      }
      const Family family = make_family(population[slot_i], population[slot_j], offspring, instance, rng);
      const auto fitness = family.fitnesses();
      const Selection sel = select_survivors(config.rule, std::span<const Length>(fitness), rng);
      if (trace != nullptr) {
        auto line = trace_json(config.rule, fitness, sel);
        line["generation"] = generation;
        line["pair"] = p;
        *trace << line.dump() << '\n';
      }
      population[slot_i] = family.members()[sel.survivor_i];
      population[slot_j] = family.members()[sel.survivor_j];
      for (std::size_t s : {slot_i, slot_j}) {
        if (population[s].fitness < best_ever.fitness) best_ever = population[s];
      }
    }
    evaluations += offspring * (n / 2);
    if (generation % config.record_interval == 0 || evaluations >= config.max_evaluations) snapshot();
  }

  record.final_best_tour = best_ever.tour;
  record.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

inline RunRecord evolve(const RunConfig& config, std::ostream* trace = nullptr) {
  config.validate();
  const TspInstance instance = tsp::load_instance(config.instance_path);
  return evolve(config, instance, trace);
}

inline void write_run_csv(std::ostream& out, std::span<const GenerationStats> stats) {
  out << "generation,evaluations,best,mean,std,distinct,best_so_far\n";
  for (const auto& s : stats) {
    out << fmt::format("{},{},{},{},{},{},{}\n", s.generation, s.evaluations, s.best, s.mean,
                       s.fitness_std, s.distinct_genomes, s.best_so_far);
  }
}

// ---------------------------------------------------------------------------
// Experiments

/// Text identifying a configuration for seed derivation. Leaves out the seed
/// and the instance path so that moving files does not change results.
inline std::string config_key(const RunConfig& c) {
  return fmt::format("rule={};k={};pop={};budget={};record={};roles={};kip={}", rule_name(c.rule),
                     c.k, c.population_size, c.max_evaluations, c.record_interval,
                     roles_name(c.role_assignment), c.k_includes_parents ? 1 : 0);
}

/// Seed of repetition `rep` of configuration `c`: derive_seed(c.seed,
/// {fnv1a(config_key(c)), rep}). Adding configurations never changes the
/// seeds of existing ones.
inline std::uint64_t repetition_seed(const RunConfig& c, std::uint64_t rep) {
  return derive_seed(c.seed, {fnv1a(config_key(c)), rep});
}

inline std::string run_file_name(const RunConfig& c, std::size_t rep) {
  return fmt::format("run_{}_k{}_rep{:02}.csv", rule_name(c.rule), c.k, rep);
}

inline std::string aggregate_file_name(std::size_t k) { return fmt::format("aggregate_k{}.csv", k); }

struct ExperimentSpec {
  std::vector<RunConfig> grid;
  std::size_t repetitions = 10;
  std::filesystem::path output_dir;
  unsigned workers = 1;
};

struct RunFailure {
  std::string rule;
  std::size_t k = 0;
  std::size_t rep = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<std::filesystem::path> run_files;
  std::vector<std::filesystem::path> aggregate_files;
  std::filesystem::path manifest;
  std::vector<RunFailure> failures;
  // Per (rule, k): recorded stats of each successful repetition, in rep order.
  std::map<std::pair<Rule, std::size_t>, std::vector<std::vector<GenerationStats>>> stats;
};

struct AggregateRow {
  std::uint64_t generation = 0;
  double mean_best_so_far = 0.0;
  double std_best_so_far = 0.0;
  double mean_std = 0.0;
  double mean_distinct = 0.0;
};

/// Row-wise mean and sample std of best_so_far across repetitions that share
/// a configuration (identical generation sequences).
inline std::vector<AggregateRow> aggregate_runs(std::span<const std::vector<GenerationStats>> runs) {
  if (runs.empty()) return {};
  const std::size_t rows = runs.front().size();
  for (const auto& r : runs) {
    if (r.size() != rows) throw DomainError("repetitions recorded different generation counts");
  }
  const auto reps = static_cast<double>(runs.size());
  std::vector<AggregateRow> out(rows);
  for (std::size_t row = 0; row < rows; ++row) {
    double sum = 0.0, sum_std = 0.0, sum_distinct = 0.0;
    for (const auto& r : runs) {
      if (r[row].generation != runs.front()[row].generation) {
        throw DomainError("repetitions recorded different generations");
      }
      sum += static_cast<double>(r[row].best_so_far);
      sum_std += r[row].fitness_std;
      sum_distinct += static_cast<double>(r[row].distinct_genomes);
    }
    const double mean = sum / reps;
    double ss = 0.0;
    for (const auto& r : runs) {
      const double d = static_cast<double>(r[row].best_so_far) - mean;
      ss += d * d;
    }
    out[row] = {runs.front()[row].generation, mean, runs.size() > 1 ? std::sqrt(ss / (reps - 1.0)) : 0.0,
                sum_std / reps, sum_distinct / reps};
  }
  return out;
}

inline nlohmann::json config_json(const RunConfig& c) {
  return {{"instance_path", c.instance_path},
          {"population_size", c.population_size},
          {"k", c.k},
          {"rule", rule_name(c.rule)},
          {"seed", c.seed},
          {"max_evaluations", c.max_evaluations},
          {"record_interval", c.record_interval},
          {"role_assignment", roles_name(c.role_assignment)},
          {"k_includes_parents", c.k_includes_parents}};
}

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Runs every configuration `repetitions` times, writing one CSV per run, one
/// aggregate CSV per k and a JSON manifest. Runs may execute on `workers`
/// threads; every output depends only on the configurations and seeds.
/// A failed run is recorded in the manifest and excluded from aggregates.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.grid.empty()) throw ConfigError("experiment grid is empty");
  if (spec.repetitions == 0) throw ConfigError("repetitions must be >= 1");
  std::set<std::pair<Rule, std::size_t>> seen;
  for (const auto& c : spec.grid) {
    c.validate();
    if (!seen.insert({c.rule, c.k}).second) {
      throw ConfigError(fmt::format("grid lists rule {} with k={} twice", rule_name(c.rule), c.k));
    }
  }
  namespace fs = std::filesystem;
  fs::create_directories(spec.output_dir);
  {
    // Fail before running anything when the directory is not writable.
    const auto probe = spec.output_dir / ".write_probe";
    std::ofstream out(probe);
    if (!out) throw std::runtime_error("output directory is not writable: " + spec.output_dir.string());
    out.close();
    fs::remove(probe);
  }
  const std::string started_at = detail::utc_timestamp();

  // An instance that fails to load fails only the runs that use it.
  std::map<std::string, std::shared_ptr<const TspInstance>> instances;
  std::map<std::string, std::string> load_errors;
  for (const auto& c : spec.grid) {
    if (instances.contains(c.instance_path) || load_errors.contains(c.instance_path)) continue;
    try {
      instances[c.instance_path] = std::make_shared<const TspInstance>(tsp::load_instance(c.instance_path));
    } catch (const std::exception& e) {
      load_errors[c.instance_path] = e.what();
    }
  }

  struct Job {
    std::size_t config;
    std::size_t rep;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < spec.grid.size(); ++c) {
    for (std::size_t r = 0; r < spec.repetitions; ++r) jobs.push_back({c, r});
  }
  std::vector<std::vector<GenerationStats>> stats(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::vector<bool> ok(jobs.size(), false);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        RunConfig cfg = spec.grid[jobs[j].config];
        cfg.seed = repetition_seed(cfg, jobs[j].rep);
        if (const auto err = load_errors.find(cfg.instance_path); err != load_errors.end()) {
          throw std::runtime_error(err->second);
        }
        auto record = evolve(cfg, *instances.at(cfg.instance_path));
        const auto path = spec.output_dir / run_file_name(cfg, jobs[j].rep);
        std::ofstream out(path, std::ios::binary);
        write_run_csv(out, record.stats);
        out.close();
        if (!out) throw std::runtime_error("failed writing " + path.string());
        stats[j] = std::move(record.stats);
        ok[j] = true;
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(spec.workers, static_cast<unsigned>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  ExperimentResult result;
  nlohmann::json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["started_at"] = started_at;
  manifest["repetitions"] = spec.repetitions;
  manifest["configs"] = nlohmann::json::array();
  for (const auto& c : spec.grid) manifest["configs"].push_back(config_json(c));
  manifest["seeds"] = nlohmann::json::array();
  manifest["failures"] = nlohmann::json::array();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& cfg = spec.grid[jobs[j].config];
    const auto file = run_file_name(cfg, jobs[j].rep);
    manifest["seeds"].push_back({{"rule", rule_name(cfg.rule)},
                                 {"k", cfg.k},
                                 {"rep", jobs[j].rep},
                                 {"seed", repetition_seed(cfg, jobs[j].rep)},
                                 {"file", file}});
    if (ok[j]) {
      result.run_files.push_back(spec.output_dir / file);
      result.stats[{cfg.rule, cfg.k}].push_back(stats[j]);
    } else {
      result.failures.push_back({std::string(rule_name(cfg.rule)), cfg.k, jobs[j].rep, errors[j]});
      manifest["failures"].push_back(
          {{"rule", rule_name(cfg.rule)}, {"k", cfg.k}, {"rep", jobs[j].rep}, {"error", errors[j]}});
    }
  }

  // One aggregate file per k, rules in grid order.
  std::vector<std::size_t> ks;
  for (const auto& c : spec.grid) {
    if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
  }
  for (std::size_t k : ks) {
    const auto path = spec.output_dir / aggregate_file_name(k);
    std::ofstream out(path, std::ios::binary);
    out << "generation,rule,k,mean_best_so_far,std_best_so_far,mean_std,mean_distinct\n";
    for (std::size_t c = 0; c < spec.grid.size(); ++c) {
      if (spec.grid[c].k != k) continue;
      std::vector<std::vector<GenerationStats>> runs;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].config == c && ok[j]) runs.push_back(stats[j]);
      }
      for (const auto& row : aggregate_runs(runs)) {
        out << fmt::format("{},{},{},{},{},{},{}\n", row.generation, rule_name(spec.grid[c].rule), k,
                           row.mean_best_so_far, row.std_best_so_far, row.mean_std, row.mean_distinct);
      }
    }
    out.close();
    if (!out) throw std::runtime_error("failed writing " + path.string());
    result.aggregate_files.push_back(path);
  }

  result.manifest = spec.output_dir / "manifest.json";
  std::ofstream mout(result.manifest, std::ios::binary);
  mout << manifest.dump(2) << '\n';
  mout.close();
  if (!mout) throw std::runtime_error("failed writing " + result.manifest.string());
  return result;
}

}  // namespace kmm
