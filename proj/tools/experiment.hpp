#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedsim/config.hpp"
#include "feedsim/engine.hpp"

namespace feedsim::cli {

/// Mean and sample standard deviation (divisor n - 1; 0 for a single value).
struct Stat {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

Stat describe(const std::vector<double>& values);

/// Final-day value of a metric in a run summary, if it was defined.
std::optional<double> final_metric(const nlohmann::json& summary, const std::string& metric, const std::string& scope);

/// Dynamics seed of repetition `rep` under a master seed.
std::uint64_t repetition_seed(std::uint64_t master, int rep);

/// Runs `count` independent tasks on up to `jobs` threads.
void run_tasks(std::size_t count, int jobs, const std::function<void(std::size_t)>& task);

struct PolicyRuns {
  PolicyKind policy = PolicyKind::chrono;
  std::vector<RunResult> runs;
  std::map<std::pair<std::string, std::string>, Stat> stats;  ///< (metric, scope) -> stat

  std::optional<Stat> stat(const std::string& metric, const std::string& scope) const;
};

struct Comparison {
  std::filesystem::path dir;
  std::vector<PolicyRuns> policies;

  const PolicyRuns& at(PolicyKind policy) const;
};

/// One population drawn from the master seed is shared by every policy and
/// repetition; repetitions differ only in the dynamics seed. Writes
/// comparison.csv, runs.csv, gamma_values.csv and summary.json.
Comparison run_comparison(const SimConfig& base, const std::vector<PolicyKind>& policies, int reps,
                          const std::filesystem::path& out_root, int jobs = 1);

struct SweepAxis {
  std::string path;
  std::vector<nlohmann::json> values;
};

struct SweepPoint {
  std::vector<std::pair<std::string, nlohmann::json>> assignment;
  std::vector<RunResult> runs;
  std::string error;  ///< empty on success
};

struct SweepResult {
  std::filesystem::path dir;
  std::vector<SweepPoint> points;
  std::size_t failures = 0;
};

/// Cartesian product of the axes times `reps` repetitions. A failing grid
/// point is recorded and the sweep continues. Writes points.csv,
/// sweep.csv and summary.json.
SweepResult run_sweep(const nlohmann::json& base_tree, const std::filesystem::path& base_dir,
                      const std::vector<SweepAxis>& axes, int reps, const std::filesystem::path& out_root,
                      int jobs = 1);

/// Parses `path=[v1, v2, ...]` (JSON list) or `path=v1,v2` (JSON scalars).
SweepAxis parse_axis(const std::string& text);

}  // namespace feedsim::cli
