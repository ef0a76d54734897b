#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "feedsim/network.hpp"
#include "feedsim/policy.hpp"
#include "feedsim/population.hpp"
#include "feedsim/recommender.hpp"

namespace feedsim {

enum class OpinionUpdate { immediate, start_of_day };

struct PredictorConfig {
  LearnerConfig learner;
  int window_days = 7;
  std::size_t max_records = 500000;
};

struct AnalysisConfig {
  int window_days = 0;  ///< 0 = the whole run
  int leiden_restarts = 10;
  double resolution = 1.0;
  double top_quantile = 0.01;
  int community_interval = 0;  ///< community metrics every k days; 0 = final day only
};

struct OutputConfig {
  int metrics_interval = 1;
  int snapshot_interval = 0;  ///< 0 disables follow-graph snapshots
  bool message_log = false;
  bool checkpoint = true;
  bool gamma_per_agent = true;
};

struct SimConfig {
  std::optional<std::uint64_t> seed;
  int horizon_days = 60;
  PolicyKind policy = PolicyKind::chrono;
  PopulationSpec population;
  std::optional<std::filesystem::path> graph_file;
  RewireParams rewire;
  double read_base_prob = 0.5;
  std::optional<std::size_t> feed_cap;
  OpinionUpdate opinion_update = OpinionUpdate::immediate;
  PredictorConfig predictor;
  AnalysisConfig analysis;
  OutputConfig output;
  int threads = 1;

  /// Full configuration tree (defaults merged) this config was built from.
  nlohmann::json tree;
  /// Directory that relative file paths in `tree` resolve against.
  std::filesystem::path base_dir;

  std::uint64_t master_seed() const;  ///< throws ConfigError if unset
};

/// Every key with its default value.
nlohmann::json default_config_tree();

/// Overlays `user` onto the defaults. Unknown keys are errors. Trait and
/// acceptance entries replace the default wholesale.
nlohmann::json merge_config(const nlohmann::json& user);

/// Builds and validates a config from a merged tree. Relative file paths
/// resolve against `base_dir`.
SimConfig config_from_tree(const nlohmann::json& tree, const std::filesystem::path& base_dir = {});

SimConfig parse_config(const nlohmann::json& user, const std::filesystem::path& base_dir = {});
SimConfig load_config(const std::filesystem::path& path);

/// Writes `value` at a dotted path such as "population.traits.neg_bias".
/// Throws ConfigError unless the path exists in the default tree.
void set_config_path(nlohmann::json& tree, const std::string& dotted, const nlohmann::json& value);

/// FNV-1a of the canonical tree without seed and threads, as 16 hex digits.
std::string config_hash(const nlohmann::json& tree);

TraitSampler sampler_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace feedsim
