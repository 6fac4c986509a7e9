// kga: command-line front end for the kinetic-market library.
//
//   kga market      wealth-exchange simulation, CSV time series + final histogram/Lorenz
//   kga evolve      one GA run on a TSPLIB instance
//   kga experiment  grid of rules x k, repeated runs, aggregates and manifest
//   kga plot        SVG line chart from a CSV file

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kmm/kmm.hpp"

namespace {

enum class LogLevel { debug = 0, info = 1, warn = 2 };

LogLevel log_level() {
  const char* env = std::getenv("KGA_LOG");
  if (env == nullptr) return LogLevel::warn;
  const std::string_view v(env);
  if (v == "debug") return LogLevel::debug;
  if (v == "info") return LogLevel::info;
  return LogLevel::warn;
}

template <class... Args>
void log(LogLevel level, fmt::format_string<Args...> format, Args&&... args) {
  static const LogLevel threshold = log_level();
  if (level < threshold) return;
  static constexpr const char* names[] = {"debug", "info", "warn"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] "
            << fmt::format(format, std::forward<Args>(args)...) << '\n';
}

// Without --seed, draw one from system entropy and print it so the run can be repeated.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed) return *seed;
  std::random_device rd;
  const std::uint64_t drawn = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  std::cout << "seed " << drawn << '\n';
  return drawn;
}

std::filesystem::path sibling(const std::filesystem::path& path, std::string_view suffix) {
  auto stem = path.stem().string();
  return path.parent_path() / (stem + std::string(suffix));
}

template <class Write>
void write_file(const std::filesystem::path& path, Write&& write) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string valid_rules() { return "kmm, bb, br"; }

kmm::Rule rule_or_throw(const std::string& name) {
  const auto rule = kmm::parse_rule(name);
  if (!rule) throw kmm::ConfigError(fmt::format("unknown rule '{}' (valid rules: {})", name, valid_rules()));
  return *rule;
}

kmm::PairRoles roles_or_throw(const std::string& name) {
  if (name == "coin-flip") return kmm::PairRoles::coin_flip;
  if (name == "worse-is-i") return kmm::PairRoles::worse_is_i;
  throw kmm::ConfigError(fmt::format("unknown role assignment '{}' (valid: coin-flip, worse-is-i)", name));
}

// ---------------------------------------------------------------------------

struct MarketArgs {
  std::size_t agents = 1000;
  std::uint64_t sweeps = 1000;
  std::string variant = "eq1";
  unsigned k = 1;
  std::optional<std::uint64_t> seed;
  std::string out = "market.csv";
  std::uint64_t record_every = 1;
  std::size_t bins = 50;
  std::string roles = "coin-flip";
  unsigned threads = 1;
};

int run_market(const MarketArgs& a) {
  namespace mk = kmm::market;
  mk::MarketConfig config;
  config.agents = a.agents;
  config.sweeps = a.sweeps;
  if (a.variant == "eq1") {
    config.variant = mk::Eq1{};
  } else if (a.variant == "sampled") {
    config.variant = mk::Sampled{a.k};
  } else {
    throw kmm::ConfigError(fmt::format("unknown variant '{}' (valid: eq1, sampled)", a.variant));
  }
  config.record_every = a.record_every;
  config.bins = a.bins;
  if (a.roles == "coin-flip") {
    config.options.roles = mk::RoleAssignment::coin_flip;
  } else if (a.roles == "first-is-i") {
    config.options.roles = mk::RoleAssignment::first_is_i;
  } else {
    throw kmm::ConfigError(fmt::format("unknown role assignment '{}' (valid: coin-flip, first-is-i)", a.roles));
  }
  config.options.threads = a.threads;
  config.validate();
  config.seed = resolve_seed(a.seed);

  log(LogLevel::info, "market: {} agents, {} sweeps, seed {}", config.agents, config.sweeps, config.seed);
  const auto run = mk::simulate_market(config);
  const std::filesystem::path out(a.out);
  write_file(out, [&](std::ostream& s) { mk::write_series_csv(s, run.series); });
  write_file(sibling(out, "_histogram.csv"),
             [&](std::ostream& s) { mk::write_histogram_csv(s, mk::histogram(run.final_state, config.bins)); });
  if (run.final_state.total() > 0.0) {
    write_file(sibling(out, "_lorenz.csv"),
               [&](std::ostream& s) { mk::write_lorenz_csv(s, mk::lorenz(run.final_state)); });
  }
  const auto g = mk::gini(run.final_state);
  std::cout << "gini " << (g ? fmt::format("{}", *g) : std::string("nan")) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvolveArgs {
  std::string instance;
  std::size_t pop = 100;
  std::size_t k = 10;
  std::string rule = "kmm";
  std::optional<std::uint64_t> seed;
  std::uint64_t budget = 2'000'000;
  std::string out = "run.csv";
  std::uint64_t record_every = 10;
  std::string roles = "coin-flip";
  bool k_includes_parents = false;
  bool trace = false;
};

int run_evolve(const EvolveArgs& a) {
  kmm::RunConfig config;
  config.instance_path = a.instance;
  config.population_size = a.pop;
  config.k = a.k;
  config.rule = rule_or_throw(a.rule);
  config.max_evaluations = a.budget;
  config.record_interval = a.record_every;
  config.role_assignment = roles_or_throw(a.roles);
  config.k_includes_parents = a.k_includes_parents;
  config.validate();
  const auto instance = kmm::tsp::load_instance(config.instance_path);
  config.seed = resolve_seed(a.seed);

  log(LogLevel::info, "evolve: {} rule={} k={} pop={} budget={} seed={}", instance.name(), a.rule, config.k,
      config.population_size, config.max_evaluations, config.seed);
  const std::filesystem::path out(a.out);
  std::optional<std::ofstream> trace;
  if (a.trace) {
    trace.emplace(sibling(out, ".trace.jsonl"), std::ios::binary);
    if (!*trace) throw std::runtime_error("cannot write trace file");
  }
  const auto record = kmm::evolve(config, instance, trace ? &*trace : nullptr);
  write_file(out, [&](std::ostream& s) { kmm::write_run_csv(s, record.stats); });
  if (trace) {
    trace->close();
    if (!*trace) throw std::runtime_error("failed writing trace file");
  }
  log(LogLevel::info, "evolve: {} generations in {:.2f}s", record.stats.back().generation, record.wall_time);
  std::cout << "best " << record.stats.back().best_so_far << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string instance;
  std::vector<std::string> rules{"kmm", "bb", "br"};
  std::vector<std::size_t> ks{2, 10};
  std::size_t reps = 10;
  std::size_t pop = 100;
  std::uint64_t budget = 2'000'000;
  std::uint64_t record_every = 10;
  std::optional<std::uint64_t> seed;
  std::string out = "experiment";
  unsigned workers = 0;
  std::string roles = "coin-flip";
  bool k_includes_parents = false;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  kmm::ExperimentSpec spec;
  spec.repetitions = a.reps;
  spec.output_dir = a.out;
  spec.workers = a.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.workers;
  for (std::size_t k : a.ks) {
    for (const auto& r : a.rules) {
      kmm::RunConfig c;
      c.instance_path = a.instance;
      c.population_size = a.pop;
      c.k = k;
      c.rule = rule_or_throw(r);
      c.max_evaluations = a.budget;
      c.record_interval = a.record_every;
      c.role_assignment = roles_or_throw(a.roles);
      c.k_includes_parents = a.k_includes_parents;
      c.validate();
      spec.grid.push_back(c);
    }
  }
  const std::uint64_t seed = resolve_seed(a.seed);
  for (auto& c : spec.grid) c.seed = seed;

  log(LogLevel::info, "experiment: {} configs x {} reps on {} workers", spec.grid.size(), spec.repetitions,
      spec.workers);
  const auto result = kmm::run_experiment(spec);
  for (const auto& [key, runs] : result.stats) {
    double sum = 0.0;
    for (const auto& r : runs) sum += static_cast<double>(r.back().best_so_far);
    std::cout << fmt::format("{} k={} mean_final_best {:.2f} ({} runs)\n", kmm::rule_name(key.first),
                             key.second, sum / static_cast<double>(runs.size()), runs.size());
  }
  for (const auto& f : result.failures) {
    log(LogLevel::warn, "run {} k={} rep={} failed: {}", f.rule, f.k, f.rep, f.message);
  }
  return result.failures.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string input;
  std::string x = "generation";
  std::vector<std::string> y;
  std::string title;
  std::string out = "plot.svg";
  bool log_y = false;
  std::string group_by;
};

int run_plot(const PlotArgs& a) {
  kmm::plot::PlotSpec spec;
  spec.input_csv = a.input;
  spec.x_column = a.x;
  for (const auto& y : a.y) {
    const auto colon = y.find(':');
    if (colon == std::string::npos) {
      spec.y_columns.push_back({y, y});
    } else {
      spec.y_columns.push_back({y.substr(0, colon), y.substr(colon + 1)});
    }
  }
  spec.title = a.title;
  spec.output_svg = a.out;
  spec.log_y = a.log_y;
  spec.group_by = a.group_by;
  kmm::plot::plot_csv(spec);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic-market simulation and family-competition GA experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kmm::kToolVersion);

  MarketArgs market;
  auto* m = app.add_subcommand("market", "Simulate the kinetic wealth-exchange market");
  m->add_option("--agents", market.agents, "Number of agents (even)")->capture_default_str();
  m->add_option("--sweeps", market.sweeps, "Number of sweeps")->capture_default_str();
  m->add_option("--variant", market.variant, "Exchange rule: eq1 or sampled")->capture_default_str();
  m->add_option("--k", market.k, "Samples per exchange for the sampled variant")->capture_default_str();
  m->add_option("--seed", market.seed, "Master seed (drawn and printed when absent)");
  m->add_option("--out", market.out, "Time-series CSV path")->capture_default_str();
  m->add_option("--record-every", market.record_every, "Recording interval in sweeps")->capture_default_str();
  m->add_option("--bins", market.bins, "Histogram bins")->capture_default_str();
  m->add_option("--roles", market.roles, "Role assignment: coin-flip or first-is-i")->capture_default_str();
  m->add_option("--threads", market.threads, "Threads per sweep")->capture_default_str();

  EvolveArgs evolve;
  auto* e = app.add_subcommand("evolve", "Run one GA on a TSPLIB instance");
  e->add_option("--instance", evolve.instance, "TSPLIB .tsp file")->required();
  e->add_option("--pop", evolve.pop, "Population size (even)")->capture_default_str();
  e->add_option("--k", evolve.k, "Offspring per family")->capture_default_str();
  e->add_option("--rule", evolve.rule, "Replacement rule: kmm, bb or br")->capture_default_str();
  e->add_option("--seed", evolve.seed, "Seed (drawn and printed when absent)");
  e->add_option("--budget", evolve.budget, "Offspring evaluation budget")->capture_default_str();
  e->add_option("--out", evolve.out, "Per-generation CSV path")->capture_default_str();
  e->add_option("--record-every", evolve.record_every, "Recording interval in generations")->capture_default_str();
  e->add_option("--roles", evolve.roles, "Parent roles: coin-flip or worse-is-i")->capture_default_str();
  e->add_flag("--k-includes-parents", evolve.k_includes_parents, "Count both parents in k");
  e->add_flag("--trace", evolve.trace, "Write one JSON line per replacement next to --out");

  ExperimentArgs experiment;
  auto* x = app.add_subcommand("experiment", "Run the rule x k grid with repetitions");
  x->add_option("--instance", experiment.instance, "TSPLIB .tsp file")->required();
  x->add_option("--rules", experiment.rules, "Comma-separated rules")->delimiter(',')->capture_default_str();
  x->add_option("--k", experiment.ks, "Comma-separated k values")->delimiter(',')->capture_default_str();
  x->add_option("--reps", experiment.reps, "Repetitions per configuration")->capture_default_str();
  x->add_option("--pop", experiment.pop, "Population size (even)")->capture_default_str();
  x->add_option("--budget", experiment.budget, "Offspring evaluation budget per run")->capture_default_str();
  x->add_option("--record-every", experiment.record_every, "Recording interval in generations")
      ->capture_default_str();
  x->add_option("--seed", experiment.seed, "Master seed (drawn and printed when absent)");
  x->add_option("--out", experiment.out, "Output directory")->capture_default_str();
  x->add_option("--workers", experiment.workers, "Parallel runs (0 = hardware concurrency)")
      ->capture_default_str();
  x->add_option("--roles", experiment.roles, "Parent roles: coin-flip or worse-is-i")->capture_default_str();
  x->add_flag("--k-includes-parents", experiment.k_includes_parents, "Count both parents in k");

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render CSV columns as an SVG line chart");
  p->add_option("--in", plot.input, "Input CSV")->required();
  p->add_option("--x", plot.x, "x column")->capture_default_str();
  p->add_option("--y", plot.y, "y column, optionally COLUMN:LABEL (repeatable)")->required();
  p->add_option("--title", plot.title, "Chart title");
  p->add_option("--out", plot.out, "Output SVG path")->capture_default_str();
  p->add_flag("--log-y", plot.log_y, "Logarithmic y axis");
  p->add_option("--group-by", plot.group_by, "Split each y column by this column's values");

  CLI11_PARSE(app, argc, argv);

  try {
    if (m->parsed()) return run_market(market);
    if (e->parsed()) return run_evolve(evolve);
    if (x->parsed()) return run_experiment_cmd(experiment);
    if (p->parsed()) return run_plot(plot);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
