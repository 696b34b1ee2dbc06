/**
 * gridrl — scenario runner for the randomized-control simulation toolkit.
 *
 * Subcommands:
 *   simulate     write per-path state CSVs for a built-in scenario
 *   covariation  realized-covariation report across solvers and meshes
 *   converge     mesh-refinement and moment-agreement diagnostic tables
 *   td0          run TD(0) policy evaluation on the analytic benchmark
 *   selftest     run the exact summation-identity suite
 *
 * Every run is reproducible: the data files a command writes are a pure
 * function of the resolved configuration and the seed, `--threads` only
 * changes how path work is scheduled, and each run ends with a
 * `manifest.json` listing every output file with its size and FNV-1a
 * checksum. Seed precedence: `--seed` flag, then the GRIDRL_SEED environment
 * variable, then the config file, then 0.
 *
 * Exit codes: 0 success, 2 configuration error, 3 numerical/divergence
 * error, 4 I/O error.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridrl/gridrl.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace gridrl;

constexpr const char* kVersion = "0.1.0";
constexpr double kTdPassTolerance = 0.01;

// ---------------------------------------------------------------------------
// Configuration resolution
// ---------------------------------------------------------------------------

/** One command's fully resolved settings (file + environment + flags). */
struct ScenarioConfig {
  std::string command;
  std::string scenario;
  std::map<std::string, double> params;     // scenario parameter overrides
  std::size_t partition_n = 0;              // 0 -> scenario default
  std::vector<double> partition_points;     // explicit grid; overrides partition_n
  std::size_t refine = 0;                   // 0 -> scenario default
  long long paths = -1;                     // -1 -> command default
  std::vector<std::size_t> meshes{4, 16, 64, 256};
  std::uint64_t seed = 0;
  bool seed_explicit = false;
  std::size_t threads = 1;
  std::string out_dir = "gridrl_out";
};

/** Flag storage for one subcommand; option pointers record what was set. */
struct CommandFlags {
  std::string scenario;
  std::string config_file;
  std::string out_dir;
  std::uint64_t seed = 0;
  long long paths = -1;
  std::size_t threads = 1;
  CLI::Option* scenario_opt = nullptr;
  CLI::Option* config_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* paths_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("GRIDRL_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  if (raw[0] == '-')
    throw ConfigError(std::string("GRIDRL_SEED must be a non-negative integer, got '") + raw + "'");
  errno = 0;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(raw, &end, 10);
  if (errno != 0 || end == raw || *end != '\0')
    throw ConfigError(std::string("GRIDRL_SEED must be a decimal integer, got '") + raw + "'");
  return static_cast<std::uint64_t>(value);
}

/** Read the JSON config file; unknown keys and wrong types are config errors. */
void apply_config_file(const std::string& path, ScenarioConfig& cfg, bool& file_seed_set) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
    if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "scenario") {
        cfg.scenario = value.get<std::string>();
      } else if (key == "params") {
        if (!value.is_object()) throw ConfigError("config: 'params' must be an object of numbers");
        for (const auto& [name, number] : value.items())
          cfg.params[name] = number.get<double>();
      } else if (key == "partition_n") {
        cfg.partition_n = value.get<std::size_t>();
      } else if (key == "partition_points") {
        cfg.partition_points = value.get<std::vector<double>>();
      } else if (key == "refine") {
        cfg.refine = value.get<std::size_t>();
      } else if (key == "paths") {
        cfg.paths = value.get<long long>();
      } else if (key == "meshes") {
        cfg.meshes = value.get<std::vector<std::size_t>>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
        file_seed_set = true;
      } else if (key == "threads") {
        cfg.threads = value.get<std::size_t>();
      } else if (key == "out") {
        cfg.out_dir = value.get<std::string>();
      } else {
        throw ConfigError("config: unknown key '" + key + "'");
      }
    }
  } catch (const ordered_json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

ScenarioConfig resolve_config(const CommandFlags& flags, const std::string& command,
                              const std::string& default_scenario) {
  ScenarioConfig cfg;
  cfg.command = command;
  cfg.scenario = default_scenario;
  bool file_seed_set = false;
  if (flags.config_opt != nullptr && flags.config_opt->count() > 0)
    apply_config_file(flags.config_file, cfg, file_seed_set);

  if (flags.scenario_opt != nullptr && flags.scenario_opt->count() > 0)
    cfg.scenario = flags.scenario;
  if (flags.paths_opt != nullptr && flags.paths_opt->count() > 0) cfg.paths = flags.paths;
  if (flags.threads_opt != nullptr && flags.threads_opt->count() > 0) cfg.threads = flags.threads;
  if (flags.out_opt != nullptr && flags.out_opt->count() > 0) cfg.out_dir = flags.out_dir;

  const auto env = seed_from_environment();
  if (flags.seed_opt != nullptr && flags.seed_opt->count() > 0) {
    cfg.seed = flags.seed;
    cfg.seed_explicit = true;
  } else if (env.has_value()) {
    cfg.seed = *env;
    cfg.seed_explicit = true;
  } else if (file_seed_set) {
    cfg.seed_explicit = true;
  }

  if (cfg.threads == 0) throw ConfigError(command + ": --threads must be >= 1");
  if (cfg.paths != -1 && cfg.paths < 0)
    throw ConfigError(command + ": --paths must be non-negative");
  return cfg;
}

/** Paths with the command's default applied; zero/low counts are rejected. */
std::size_t resolved_paths(const ScenarioConfig& cfg, std::size_t fallback, std::size_t minimum) {
  const long long raw = cfg.paths == -1 ? static_cast<long long>(fallback) : cfg.paths;
  if (raw < static_cast<long long>(minimum))
    throw ConfigError(cfg.command + ": need at least " + std::to_string(minimum) +
                      " path(s), got " + std::to_string(raw));
  return static_cast<std::size_t>(raw);
}

/** The control partition: explicit points if given, else a uniform grid. */
Partition resolved_partition(const ScenarioConfig& cfg, const Scenario& scenario) {
  if (!cfg.partition_points.empty()) {
    const Partition partition(cfg.partition_points);
    if (partition.horizon() != scenario.horizon)
      throw ConfigError(cfg.command + ": partition_points must end at the scenario horizon " +
                        format_number(scenario.horizon));
    return partition;
  }
  const std::size_t n = cfg.partition_n != 0 ? cfg.partition_n : scenario.default_partition_n;
  return Partition::uniform(scenario.horizon, n);
}

std::size_t resolved_refine(const ScenarioConfig& cfg, const Scenario& scenario) {
  return cfg.refine != 0 ? cfg.refine : scenario.default_refine;
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

std::string checksum_hex(std::uint64_t checksum) {
  char buffer[20];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(checksum));
  return buffer;
}

/** Collects the files of one run and writes the closing manifest. */
class RunWriter {
 public:
  explicit RunWriter(const std::string& out_dir) : dir_(out_dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec)
      throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  void emit(const std::string& name, const std::string& content) {
    files_.push_back(write_text_file((dir_ / name).string(), content));
    files_.back().path = name;  // manifests list names relative to the run directory
  }

  /** Append the outputs section and write manifest.json (not self-listed). */
  void finish(ordered_json manifest) const {
    ordered_json outputs = ordered_json::array();
    for (const auto& file : files_) {
      ordered_json row;
      row["file"] = file.path;
      row["bytes"] = file.bytes;
      row["fnv1a64"] = checksum_hex(file.checksum);
      outputs.push_back(std::move(row));
    }
    manifest["outputs"] = std::move(outputs);
    write_text_file((dir_ / "manifest.json").string(), manifest.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::vector<WrittenFile> files_;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/**
 * Manifest skeleton. The wall-clock entry is informational and varies between
 * runs; the reproducibility contract covers the files listed under `outputs`.
 */
ordered_json manifest_base(const ScenarioConfig& cfg, ordered_json config_echo,
                           Clock::time_point start) {
  ordered_json manifest;
  manifest["command"] = cfg.command;
  manifest["scenario"] = cfg.scenario;
  manifest["version"] = kVersion;
  manifest["seed"] = cfg.seed;
  manifest["wall_clock_seconds"] = seconds_since(start);
  manifest["config"] = std::move(config_echo);
  return manifest;
}

ordered_json echo_common(const ScenarioConfig& cfg) {
  ordered_json echo;
  echo["scenario"] = cfg.scenario;
  echo["params"] = cfg.params;
  if (!cfg.partition_points.empty()) echo["partition_points"] = cfg.partition_points;
  echo["seed"] = cfg.seed;
  echo["threads"] = cfg.threads;
  echo["out"] = cfg.out_dir;
  return echo;
}

// ---------------------------------------------------------------------------
// Shared numerics
// ---------------------------------------------------------------------------

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/** Two-pass mean and standard error, accumulated in slot order. */
MeanSe mean_and_se(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  if (values.size() < 2) throw ConfigError("mean_and_se: need at least two values");
  MeanSe out;
  for (const double v : values) out.mean += v;
  out.mean /= n;
  double ss = 0.0;
  for (const double v : values) ss += sq(v - out.mean);
  out.se = std::sqrt(ss / (n * (n - 1.0)));
  return out;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/** One recorded path as CSV: time, state components, and a 0/1 jump marker. */
std::string render_path_csv(const PathRecord& record, std::uint64_t seed) {
  std::vector<std::string> columns{"t"};
  const std::size_t m = record.states.empty() ? 0 : record.states.front().size();
  for (std::size_t r = 0; r < m; ++r) columns.push_back("x_" + std::to_string(r + 1));
  columns.push_back("jump_flag");
  CsvWriter csv(std::move(columns));
  std::size_t jp = 0;
  for (std::size_t k = 0; k < record.times.size(); ++k) {
    std::vector<std::string> cells;
    cells.reserve(m + 2);
    cells.push_back(format_number(record.times[k]));
    for (std::size_t r = 0; r < m; ++r) cells.push_back(format_number(record.states[k][r]));
    while (jp < record.jump_times.size() && record.jump_times[jp] < record.times[k]) ++jp;
    bool jumped = false;
    while (jp < record.jump_times.size() && record.jump_times[jp] == record.times[k]) {
      jumped = true;
      ++jp;
    }
    cells.push_back(jumped ? "1" : "0");
    csv.add_row(std::move(cells));
  }
  return csv.render(seed);
}

std::string path_file_name(const std::string& policy_id, std::size_t path_index) {
  char suffix[24];
  std::snprintf(suffix, sizeof(suffix), "%04zu", path_index);
  return "path_" + policy_id + "_" + suffix + ".csv";
}

int cmd_simulate(const ScenarioConfig& cfg) {
  const auto start = Clock::now();
  const auto scenario = make_scenario(cfg.scenario, cfg.params);
  const std::size_t paths = resolved_paths(cfg, 10, 1);
  SolverConfig solver(resolved_partition(cfg, scenario));
  solver.refine = resolved_refine(cfg, scenario);
  solver.u_rule = scenario.u_rule;

  // Solve in parallel into per-path slots, then write files in index order.
  const std::size_t n_policies = scenario.policies.size();
  std::vector<std::vector<std::string>> rendered(paths);
  parallel_for(paths, cfg.threads, [&](std::size_t i) {
    const auto records =
        solve_grid_sampling(scenario.model, scenario.policies, solver, cfg.seed, i);
    rendered[i].reserve(n_policies);
    for (const auto& record : records) rendered[i].push_back(render_path_csv(record, cfg.seed));
  });

  RunWriter writer(cfg.out_dir);
  for (std::size_t i = 0; i < paths; ++i)
    for (std::size_t k = 0; k < n_policies; ++k)
      writer.emit(path_file_name(scenario.policies[k].id, i), rendered[i][k]);

  ordered_json echo = echo_common(cfg);
  echo["paths"] = paths;
  echo["partition_n"] = solver.partition.intervals();
  echo["refine"] = solver.refine;
  writer.finish(manifest_base(cfg, std::move(echo), start));
  std::cout << "simulate: wrote " << paths * n_policies << " path files to " << cfg.out_dir
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// covariation
// ---------------------------------------------------------------------------

struct CovariationTargets {
  double pair = 0.0;         // sampled / limit dynamics (shared control draw)
  double exploratory = 0.0;  // averaged dynamics (deterministic diffusion)
};

/**
 * Quadrature targets for the realized covariation of the scenario's policy
 * pair at the horizon, with the state frozen at x0 (the command requires
 * state-independent coefficients, so freezing is exact).
 */
CovariationTargets covariation_targets(const Scenario& scenario) {
  const auto& model = scenario.model;
  const auto a_at = [&](const RandomizedPolicy& policy, double s, const Vec& u) {
    return model.a(s, model.x0, policy.h(s, model.x0, u))(0, 0);
  };
  const auto& [nodes, weights] = gauss_legendre(64);
  const double half = 0.5 * scenario.horizon;
  CovariationTargets targets;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double s = half * (1.0 + nodes[i]);
    const double w = half * weights[i];
    const auto& p1 = scenario.policies[0];
    const auto& p2 = scenario.policies[1];
    const double cross =
        scenario.u_rule.integrate([&](const Vec& u) { return a_at(p1, s, u) * a_at(p2, s, u); });
    const double own1 = scenario.u_rule.integrate([&](const Vec& u) { return sq(a_at(p1, s, u)); });
    const double own2 = scenario.u_rule.integrate([&](const Vec& u) { return sq(a_at(p2, s, u)); });
    targets.pair += w * cross;
    targets.exploratory += w * std::sqrt(own1) * std::sqrt(own2);
  }
  return targets;
}

/** Mean realized covariation of the first two systems over `paths` runs. */
template <typename Solve>
MeanSe covariation_estimate(std::size_t paths, std::size_t threads, Solve&& solve) {
  std::vector<double> slots(paths);
  parallel_for(paths, threads, [&](std::size_t i) {
    const auto records = solve(i);
    slots[i] = realized_covariation(records[0], records[1]);
  });
  return mean_and_se(slots);
}

int cmd_covariation(const ScenarioConfig& cfg) {
  const auto start = Clock::now();
  const auto scenario = make_scenario(cfg.scenario, cfg.params);
  if (scenario.policies.size() != 2)
    throw ConfigError("covariation: scenario must define exactly two policies");
  if (scenario.model.levy.has_jumps() || scenario.model.gamma)
    throw ConfigError("covariation: report requires a continuous (jump-free) model");
  if (!scenario.model.state_independent_coeffs)
    throw ConfigError("covariation: report requires state-independent coefficients");
  if (scenario.model.dims.m != 1 || scenario.model.dims.p != 1 || scenario.model.dims.d != 1)
    throw ConfigError("covariation: report requires a scalar model (m = p = d = 1)");
  if (cfg.meshes.empty()) throw ConfigError("covariation: need at least one mesh");

  const std::size_t paths = resolved_paths(cfg, 2000, 2);
  const std::size_t refine = resolved_refine(cfg, scenario);
  const auto targets = covariation_targets(scenario);

  CsvWriter csv({"solver", "mesh_n", "estimate", "target", "abs_error", "se"});
  const auto add_row = [&csv](const std::string& solver, std::size_t mesh_n, MeanSe est,
                              double target) {
    csv.add_row({solver, std::to_string(mesh_n), format_number(est.mean), format_number(target),
                 format_number(std::abs(est.mean - target)), format_number(est.se)});
  };

  for (const std::size_t mesh_n : cfg.meshes) {
    SolverConfig solver(Partition::uniform(scenario.horizon, mesh_n));
    solver.refine = refine;
    solver.u_rule = scenario.u_rule;
    const auto est = covariation_estimate(paths, cfg.threads, [&](std::size_t i) {
      return solve_grid_sampling(scenario.model, scenario.policies, solver, cfg.seed, i);
    });
    add_row("grid", mesh_n, est, targets.pair);
  }

  SolverConfig solver(resolved_partition(cfg, scenario));
  solver.refine = refine;
  solver.u_rule = scenario.u_rule;
  const auto table = prepare_limit_coefficients(scenario.model, scenario.policies, solver);
  const auto limit_est = covariation_estimate(paths, cfg.threads, [&](std::size_t i) {
    return solve_limit_joint(scenario.model, scenario.policies, solver, cfg.seed, i, &table);
  });
  add_row("limit", solver.partition.intervals(), limit_est, targets.pair);

  const auto expl_table = prepare_exploratory_coefficients(scenario.model, scenario.policies, solver);
  const auto expl_est = covariation_estimate(paths, cfg.threads, [&](std::size_t i) {
    return solve_exploratory_joint(scenario.model, scenario.policies, solver, cfg.seed, i,
                                   &expl_table);
  });
  add_row("exploratory", solver.partition.intervals(), expl_est, targets.exploratory);

  RunWriter writer(cfg.out_dir);
  writer.emit("covariation.csv", csv.render(cfg.seed));

  ordered_json echo = echo_common(cfg);
  echo["paths"] = paths;
  echo["partition_n"] = solver.partition.intervals();
  echo["refine"] = refine;
  echo["meshes"] = cfg.meshes;
  writer.finish(manifest_base(cfg, std::move(echo), start));
  std::cout << "covariation: pair target " << format_number(targets.pair)
            << ", exploratory target " << format_number(targets.exploratory) << ", report in "
            << cfg.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

int cmd_converge(const ScenarioConfig& cfg) {
  const auto start = Clock::now();
  const std::size_t paths = resolved_paths(cfg, 2000, 2);

  CsvWriter table({"bundle", "mesh_n", "estimate", "target", "abs_error", "mc_se"});
  for (const auto& name : convergence_case_names()) {
    auto diag = make_convergence_case(name, paths, cfg.seed);
    diag.meshes = cfg.meshes;
    const auto report = run_convergence_case(diag);
    for (const auto& row : report.rows)
      table.add_row({name, std::to_string(row.mesh_n), format_number(row.estimate),
                     format_number(row.target), format_number(row.abs_error),
                     format_number(row.mc_se)});
  }

  // Moment agreement between the sampled and limit dynamics on the
  // two-control benchmark restricted to its first policy.
  const auto scenario = make_scenario("two_controls", cfg.params);
  SolverConfig solver(resolved_partition(cfg, scenario));
  solver.refine = resolved_refine(cfg, scenario);
  solver.u_rule = scenario.u_rule;
  std::vector<MomentFunctional> functionals;
  for (int power = 1; power <= 4; ++power)
    functionals.push_back(state_moment("moment" + std::to_string(power), scenario.horizon, 0,
                                       [power](const Vec& x) {
                                         return std::pow(x[0], static_cast<double>(power));
                                       }));
  const auto rows = moment_compare(scenario.model, {scenario.policies[0]}, solver, functionals,
                                   paths, cfg.seed);
  CsvWriter moments(
      {"label", "grid_mean", "grid_se", "limit_mean", "limit_se", "abs_diff", "pooled_se"});
  for (const auto& row : rows)
    moments.add_row({row.label, format_number(row.grid_mean), format_number(row.grid_se),
                     format_number(row.limit_mean), format_number(row.limit_se),
                     format_number(row.abs_diff), format_number(row.pooled_se)});

  RunWriter writer(cfg.out_dir);
  writer.emit("convergence.csv", table.render(cfg.seed));
  writer.emit("moments.csv", moments.render(cfg.seed));

  ordered_json echo = echo_common(cfg);
  echo["paths"] = paths;
  echo["meshes"] = cfg.meshes;
  echo["partition_n"] = solver.partition.intervals();
  echo["refine"] = solver.refine;
  writer.finish(manifest_base(cfg, std::move(echo), start));
  std::cout << "converge: " << table.row_count() << " diagnostic rows, " << moments.row_count()
            << " moment rows in " << cfg.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// td0
// ---------------------------------------------------------------------------

int cmd_td0(const ScenarioConfig& cfg) {
  const auto start = Clock::now();
  if (cfg.scenario != "td0_bench")
    throw ConfigError("td0: only the td0_bench scenario defines an analytic target");
  const auto scenario = make_scenario(cfg.scenario, cfg.params);

  ValueModel value;
  value.terminal = scenario.terminal;
  const double horizon = scenario.horizon;
  value.basis = {[horizon](double t, const Vec&) { return horizon - t; }};
  value.theta = Vec{0.0};

  TDConfig td(SolverConfig(Partition::uniform(horizon, scenario.td_partition_n)));
  td.temperature = scenario.td_temperature;
  td.alpha0 = scenario.td_alpha0;
  td.k0 = scenario.td_k0;
  td.n_episodes = scenario.td_episodes;
  td.solver.refine = resolved_refine(cfg, scenario);
  td.solver.u_rule = scenario.u_rule;

  const auto result = run_td0(scenario.model, scenario.policies[0], value, td, cfg.seed);

  std::vector<std::string> columns{"episode"};
  for (std::size_t l = 0; l < value.basis.size(); ++l)
    columns.push_back("theta_" + std::to_string(l + 1));
  columns.push_back("increment_norm");
  CsvWriter trajectory(std::move(columns));
  for (std::size_t k = 0; k < result.trajectory.size(); ++k) {
    std::vector<std::string> cells{std::to_string(k + 1)};
    for (const double component : result.trajectory[k]) cells.push_back(format_number(component));
    cells.push_back(format_number(result.increment_norms[k]));
    trajectory.add_row(std::move(cells));
  }

  const double theta_hat = result.theta_averaged[0];
  const double abs_error = std::abs(theta_hat - scenario.td_theta_star);
  ordered_json report;
  report["theta_hat"] = result.theta_averaged;
  report["theta_last"] = result.theta;
  report["target"] = scenario.td_theta_star;
  report["abs_error"] = abs_error;
  report["tolerance"] = kTdPassTolerance;
  report["pass"] = abs_error < kTdPassTolerance;
  report["episodes"] = td.n_episodes;
  report["temperature"] = td.temperature;
  report["seed"] = cfg.seed;

  RunWriter writer(cfg.out_dir);
  writer.emit("td0_trajectory.csv", trajectory.render(cfg.seed));
  writer.emit("td0_report.json", report.dump(2) + "\n");

  ordered_json echo = echo_common(cfg);
  echo["partition_n"] = scenario.td_partition_n;
  echo["refine"] = td.solver.refine;
  echo["episodes"] = td.n_episodes;
  writer.finish(manifest_base(cfg, std::move(echo), start));
  std::cout << "td0: theta_hat " << format_number(theta_hat) << ", target "
            << format_number(scenario.td_theta_star) << ", abs_error " << format_number(abs_error)
            << (abs_error < kTdPassTolerance ? " (pass)" : " (fail)") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

int cmd_selftest(const ScenarioConfig& cfg) {
  const std::uint64_t seed = cfg.seed_explicit ? cfg.seed : 20240901ull;
  const auto checks = run_identity_checks(20, 1e-12, seed);
  bool all_pass = true;
  std::size_t events = 0;
  for (const auto& check : checks) {
    std::cout << "identity " << check.name << ": instances=" << check.instances
              << " max_rel_err=" << format_number(check.max_rel_error)
              << (check.pass ? " PASS" : " FAIL") << "\n";
    all_pass = all_pass && check.pass;
    events += check.events_seen;
  }
  std::cout << "selftest: " << checks.size() << " identities, " << events
            << " jump events exercised\n";
  if (!all_pass) throw NumericalError("selftest: at least one summation identity failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and policy-evaluation toolkit for randomized controls"};
  app.require_subcommand(1);

  const auto add_flags = [](CLI::App* cmd, CommandFlags& flags, bool with_scenario,
                            bool with_paths, bool with_threads, bool with_out) {
    if (with_scenario)
      flags.scenario_opt =
          cmd->add_option("--scenario", flags.scenario, "Built-in scenario id");
    flags.config_opt =
        cmd->add_option("--config", flags.config_file, "JSON configuration file");
    flags.seed_opt = cmd->add_option("--seed", flags.seed, "Master seed (decimal)");
    if (with_paths)
      flags.paths_opt = cmd->add_option("--paths", flags.paths, "Monte-Carlo path count");
    if (with_threads)
      flags.threads_opt =
          cmd->add_option("--threads", flags.threads, "Path-level worker threads");
    if (with_out)
      flags.out_opt = cmd->add_option("--out", flags.out_dir, "Output directory");
  };

  CommandFlags simulate_flags, covariation_flags, converge_flags, td0_flags, selftest_flags;
  CLI::App* simulate = app.add_subcommand("simulate", "Write per-path state CSVs");
  add_flags(simulate, simulate_flags, true, true, true, true);
  CLI::App* covariation = app.add_subcommand("covariation", "Realized-covariation report");
  add_flags(covariation, covariation_flags, true, true, true, true);
  CLI::App* converge = app.add_subcommand("converge", "Mesh and moment diagnostics");
  add_flags(converge, converge_flags, false, true, true, true);
  CLI::App* td0 = app.add_subcommand("td0", "TD(0) policy evaluation benchmark");
  add_flags(td0, td0_flags, true, false, false, true);
  CLI::App* selftest = app.add_subcommand("selftest", "Exact summation-identity suite");
  add_flags(selftest, selftest_flags, false, false, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed())
      return cmd_simulate(resolve_config(simulate_flags, "simulate", "two_controls"));
    if (covariation->parsed())
      return cmd_covariation(resolve_config(covariation_flags, "covariation", "two_controls"));
    if (converge->parsed())
      return cmd_converge(resolve_config(converge_flags, "converge", "two_controls"));
    if (td0->parsed()) return cmd_td0(resolve_config(td0_flags, "td0", "td0_bench"));
    if (selftest->parsed())
      return cmd_selftest(resolve_config(selftest_flags, "selftest", "two_controls"));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  }
  return 2;  // unreachable with require_subcommand(1)
}
