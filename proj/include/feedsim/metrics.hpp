#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feedsim/types.hpp"

namespace feedsim {

struct WeightedEdge {
  AgentId src;
  AgentId dst;
  double weight;
};

/// Directed weighted graph with parallel edges merged.
class WeightedDigraph {
 public:
  WeightedDigraph() = default;
  /// Merges duplicate (src, dst) pairs by summing weights. Non-positive
  /// weights are rejected with std::invalid_argument.
  WeightedDigraph(std::size_t n, std::vector<WeightedEdge> edges);

  std::size_t num_nodes() const noexcept { return n_; }
  std::span<const WeightedEdge> edges() const noexcept { return edges_; }
  double total_weight() const noexcept { return total_; }
  std::vector<double> out_strength() const;
  std::vector<double> in_strength() const;

 private:
  std::size_t n_ = 0;
  std::vector<WeightedEdge> edges_;  // sorted by (src, dst)
  double total_ = 0.0;
};

/// Community id per node.
using Partition = std::vector<std::uint32_t>;

/// Leicht-Newman directed modularity
///   Q = (1/m) sum_ij [A_ij - resolution * k_i^out k_j^in / m] [c_i = c_j].
/// Throws std::domain_error when the graph has no weight.
double directed_modularity(const WeightedDigraph& graph, const Partition& partition, double resolution = 1.0);

struct LeidenOptions {
  double resolution = 1.0;
  int restarts = 10;
  double randomness = 0.01;  ///< temperature of the refinement phase
  int max_passes = 10;       ///< repeated runs from the previous result within one restart
};

/// Leiden community detection maximizing directed modularity. The best of
/// `restarts` seeded runs is returned; every community is weakly connected
/// and ids are numbered by first appearance.
Partition detect_communities(const WeightedDigraph& graph, std::uint64_t seed, const LeidenOptions& options = {});

/// True if every community induces a weakly connected subgraph.
bool communities_weakly_connected(const WeightedDigraph& graph, const Partition& partition);

/// Renumbers communities 0..k-1 in order of first appearance.
Partition canonical_partition(const Partition& partition);

std::size_t community_count(const Partition& partition);

/// Mean over clusters of (cluster std / population std). Clusters of one
/// node contribute 0. Circular mode treats values as opinions on ]-1, 1]
/// and uses sqrt(-2 ln R) on the angles pi*x. nullopt if the population
/// spread is zero.
std::optional<double> diversity_intra(std::span<const double> values, const Partition& partition,
                                      bool circular = false);

/// Spread of the cluster means divided by the population spread. A single
/// cluster gives 0.
std::optional<double> diversity_inter(std::span<const double> values, const Partition& partition,
                                      bool circular = false);

/// Population standard deviation (divisor n).
double population_std(std::span<const double> values);
/// Circular standard deviation of opinions in angle units.
double circular_std(std::span<const double> opinions);
/// Circular mean of opinions, in ]-1, 1].
double circular_mean(std::span<const double> opinions);

/// Negative-content tallies for one reader over a window.
struct ExposureCounts {
  std::uint64_t impressions = 0;
  std::uint64_t negative_impressions = 0;
  std::uint64_t pool = 0;  ///< items authored or relayed by in-neighbors
  std::uint64_t negative_pool = 0;

  ExposureCounts& operator+=(const ExposureCounts& o) noexcept {
    impressions += o.impressions;
    negative_impressions += o.negative_impressions;
    pool += o.pool;
    negative_pool += o.negative_pool;
    return *this;
  }
};

/// Negative share of the timeline over negative share of the neighborhood.
/// nullopt without impressions or without negative neighborhood content.
std::optional<double> gamma_overexposure(const ExposureCounts& counts);

struct GammaSummary {
  std::vector<std::optional<double>> per_agent;
  std::size_t defined = 0;
  std::size_t no_impressions = 0;
  std::size_t no_negative_pool = 0;
  double mean = 0.0;  ///< over defined readers; NaN if none
  double std = 0.0;
};

GammaSummary summarize_gamma(std::span<const ExposureCounts> per_agent);

/// Intrinsic-negativity bins used by the social-power report.
struct NegativityBin {
  std::string label;
  double lo;
  double hi;
  bool lo_closed;
  bool hi_closed;

  bool contains(double x) const noexcept {
    return (lo_closed ? x >= lo : x > lo) && (hi_closed ? x <= hi : x < hi);
  }
};

/// {0}, ]0,.25], ].25,.5], ].5,.75], ].75,1[, {1}
std::vector<NegativityBin> default_negativity_bins();

struct SocialPowerRow {
  NegativityBin bin;
  std::size_t population = 0;
  std::size_t top = 0;
  double population_share = 0.0;
  double top_share = 0.0;
  std::optional<double> ratio;  ///< top_share / population_share
};

struct SocialPowerReport {
  std::vector<SocialPowerRow> rows;
  std::size_t eligible = 0;  ///< agents with at least one publication
  std::size_t top_size = 0;
  bool small_population = false;  ///< fewer than 100 eligible agents
};

/// Popularity = retweets received / messages published. Ranks eligible
/// agents by popularity (ties by ascending id), takes the top
/// max(1, round(quantile * eligible)) and compares bin shares.
SocialPowerReport social_power_report(std::span<const std::uint64_t> published,
                                      std::span<const std::uint64_t> retweets_received,
                                      std::span<const double> negativity, double quantile = 0.01,
                                      const std::vector<NegativityBin>& bins = default_negativity_bins());

}  // namespace feedsim
