#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "feedsim/opinion.hpp"
#include "feedsim/random.hpp"
#include "feedsim/types.hpp"

namespace feedsim {

/// A live subscription seen from the reader's side, with the reader's
/// accumulated disagreement toward the source.
struct Subscription {
  AgentId source;
  double delta = 0.0;
};

/// Directed follow graph. An edge source -> reader means the reader
/// subscribed to the source, so information flows source -> reader.
class SubscriptionGraph {
 public:
  SubscriptionGraph() = default;
  explicit SubscriptionGraph(std::size_t n) : in_(n), out_(n) {}

  std::size_t num_nodes() const noexcept { return in_.size(); }
  std::size_t num_edges() const noexcept { return edges_; }

  /// Adds source -> reader with delta 0. Returns false for self-loops and
  /// existing edges.
  bool add(AgentId source, AgentId reader);
  bool remove(AgentId source, AgentId reader);
  bool has(AgentId source, AgentId reader) const;

  /// In-neighborhood of the reader, sorted by source id.
  std::span<const Subscription> sources(AgentId reader) const { return in_[reader]; }
  std::span<Subscription> sources(AgentId reader) { return in_[reader]; }
  /// Followers of the source, sorted.
  std::span<const AgentId> followers(AgentId source) const { return out_[source]; }

  std::size_t in_degree(AgentId reader) const { return in_[reader].size(); }
  std::size_t out_degree(AgentId source) const { return out_[source].size(); }

  /// Disagreement of reader toward source; throws std::out_of_range if the
  /// subscription does not exist.
  double delta(AgentId source, AgentId reader) const;
  double& delta(AgentId source, AgentId reader);

  /// CSV edge list `src,dst`; node count is max id + 1 unless `n` is larger.
  static SubscriptionGraph load_edge_list(const std::filesystem::path& path, std::size_t n = 0);
  /// CSV `src,dst,delta`.
  void write_snapshot(const std::filesystem::path& path) const;

  template <class Archive>
  void serialize(Archive& ar);

 private:
  std::vector<std::vector<Subscription>> in_;
  std::vector<std::vector<AgentId>> out_;
  std::size_t edges_ = 0;
};

/// Which nodes count as second neighbors when replacing a broken subscription.
enum class SecondNeighborMode {
  read,        ///< sources of my sources
  undirected,  ///< neighbors of neighbors ignoring direction
};

struct RewireParams {
  double gamma = 0.9;  ///< daily discount
  double tau = 0.5;    ///< break threshold
  SecondNeighborMode mode = SecondNeighborMode::read;

  /// Throws ConfigError unless 0 < gamma < 1 and tau > 0.
  void validate() const;
};

/// gamma * (delta + n_reads * distance).
inline double discounted_disagreement(double delta, long n_reads, double distance, double gamma) noexcept {
  return gamma * (delta + static_cast<double>(n_reads) * distance);
}

/// Applies one day of disagreement accounting to the subscription
/// source -> reader using both agents' current opinions. Returns the new delta.
double update_disagreement(SubscriptionGraph& graph, std::span<const Opinion> opinions, AgentId reader,
                           AgentId source, long n_reads, const RewireParams& params);

struct Rewiring {
  AgentId removed;
  AgentId added;
  bool fallback = false;  ///< replacement drawn outside the second neighborhood
};

/// Drops every subscription of `reader` whose delta exceeds tau and replaces
/// each with a uniformly chosen second neighbor, preserving in-degree. Nodes
/// dropped in this call are never re-added in the same call. When no second
/// neighbor is eligible a random non-neighbor is used instead; when no node
/// at all is eligible the subscription is kept.
std::vector<Rewiring> prune_and_rewire(SubscriptionGraph& graph, AgentId reader, const RewireParams& params,
                                       Rng& rng);

}  // namespace feedsim
