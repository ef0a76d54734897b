#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedsim/config.hpp"
#include "feedsim/messaging.hpp"
#include "feedsim/metrics.hpp"
#include "feedsim/population.hpp"
#include "feedsim/predictor.hpp"
#include "feedsim/recommender.hpp"

namespace feedsim {

/// One row of the long-format metrics table.
struct MetricRow {
  Day day = 0;
  std::string metric;
  std::string scope;
  double value = 0.0;
};

/// Per-agent bookkeeping for the day just simulated.
struct AgentDay {
  long publications = 0;
  long budget = 0;  ///< n_s drawn for the day
  long impressions = 0;
  long reads = 0;
  long retweets = 0;
  long opinion_updates = 0;
};

struct DayTotals {
  std::uint64_t published = 0;
  std::uint64_t impressions = 0;
  std::uint64_t reads = 0;
  std::uint64_t retweets = 0;
  std::uint64_t opinion_updates = 0;
  std::uint64_t rewires = 0;
  std::uint64_t rewire_fallbacks = 0;
};

class Simulation {
 public:
  /// Generates the population from the config's master seed.
  explicit Simulation(SimConfig config);
  /// Runs on a given population; `dynamics_seed` drives every stream of the
  /// daily loop while the population stays fixed.
  Simulation(SimConfig config, Population population, std::uint64_t dynamics_seed);

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;
  ~Simulation();

  /// Simulates day `day()` and advances the clock.
  void step();
  void run(int days);

  Day day() const noexcept { return day_; }
  const SimConfig& config() const noexcept { return config_; }
  std::uint64_t dynamics_seed() const noexcept { return seed_; }
  std::size_t num_agents() const noexcept { return traits_.size(); }

  const std::vector<AgentTraits>& traits() const noexcept { return traits_; }
  const std::vector<Opinion>& opinions() const noexcept { return opinions_; }
  const SubscriptionGraph& graph() const noexcept { return graph_; }
  const MessageStore& store() const noexcept { return store_; }
  const EngagementHistory& history() const noexcept { return history_; }
  const Predictor* predictor() const noexcept { return predictor_.get(); }
  const std::vector<AgentDay>& last_day() const noexcept { return agent_day_; }
  const DayTotals& last_totals() const noexcept { return totals_; }
  const DayTotals& cumulative_totals() const noexcept { return cumulative_; }
  const std::vector<std::size_t>& initial_in_degree() const noexcept { return in_degree0_; }
  const RngAccounting& rng_accounting() const noexcept { return rng_; }

  /// Exposure tallies over the analysis window, per reader.
  std::vector<ExposureCounts> exposure() const;
  GammaSummary gamma() const;

  /// Retweeter -> author graph over the analysis window.
  WeightedDigraph retweet_graph() const;
  WeightedDigraph follow_graph() const;

  /// Metrics describing the current state (end of day `day() - 1`).
  /// Community metrics are included when `with_communities` is set.
  std::vector<MetricRow> metrics(bool with_communities) const;

  /// Final-window aggregates keyed by metric then scope.
  nlohmann::json summary() const;

  /// Writes every publication, impression, read and retweet as CSV.
  void open_message_log(const std::filesystem::path& path);

  /// Called after every completed step; used by tests and writers.
  void on_step(std::function<void(const Simulation&)> callback) { observer_ = std::move(callback); }

  /// Binary checkpoint of the full state at a day boundary.
  void save_checkpoint(std::ostream& out) const;
  /// Restores a checkpoint written by a simulation with the same config.
  static Simulation load_checkpoint(std::istream& in, SimConfig config);

 private:
  struct ReaderResult;

  Simulation() = default;
  void init_common();
  void scroll(AgentId reader, Day t, const std::vector<std::uint32_t>& budgets, ReaderResult& out) const;
  template <class Archive>
  void serialize_state(Archive& ar);

  SimConfig config_;
  std::uint64_t seed_ = 0;
  Day day_ = 0;
  std::vector<AgentTraits> traits_;
  std::vector<Opinion> opinions_;
  SubscriptionGraph graph_;
  MessageStore store_;
  EngagementHistory history_;
  TrainingWindow window_;
  std::unique_ptr<Predictor> predictor_;
  std::vector<std::unordered_set<MessageId>> read_;
  // Exposure per reader: cumulative when the analysis window is the whole
  // run, otherwise one entry per day in the window.
  std::vector<ExposureCounts> exposure_total_;
  std::deque<std::vector<ExposureCounts>> exposure_days_;
  std::vector<std::size_t> in_degree0_;
  std::vector<AgentDay> agent_day_;
  DayTotals totals_;
  DayTotals cumulative_;
  RngAccounting rng_;
  std::unique_ptr<MessageLog> log_;
  std::function<void(const Simulation&)> observer_;
};

/// The population a config describes, drawn from its master seed.
Population make_population(const SimConfig& config);

struct RunOptions {
  std::filesystem::path out_root;
  std::string run_suffix;                  ///< appended to the run directory name
  std::optional<Population> population;    ///< shared population (compare)
  std::optional<std::uint64_t> dynamics_seed;
};

struct RunResult {
  std::filesystem::path dir;
  std::string run_id;
  nlohmann::json summary;
  double wall_seconds = 0.0;
};

/// Runs the configured horizon and writes metrics.csv, summary.json,
/// gamma_per_agent.csv, snapshots, the checkpoint and run.log under
/// `<out_root>/<config-hash>_s<seed><suffix>/`. On failure the summary is
/// written with status "incomplete" and the error is rethrown.
RunResult run_simulation(const SimConfig& config, const RunOptions& options);

/// Directory name for a run.
std::string run_id(const SimConfig& config, const std::string& suffix = "");

void write_metrics_csv(std::ostream& out, const std::string& run, const std::vector<MetricRow>& rows, bool header);

}  // namespace feedsim
