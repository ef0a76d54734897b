#include "feedsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "feedsim/csv.hpp"
#include "feedsim/errors.hpp"

namespace feedsim {
namespace {

auto find_source(std::vector<Subscription>& subs, AgentId source) {
  return std::lower_bound(subs.begin(), subs.end(), source,
                          [](const Subscription& s, AgentId id) { return s.source < id; });
}

auto find_source(const std::vector<Subscription>& subs, AgentId source) {
  return std::lower_bound(subs.begin(), subs.end(), source,
                          [](const Subscription& s, AgentId id) { return s.source < id; });
}

}  // namespace

bool SubscriptionGraph::add(AgentId source, AgentId reader) {
  if (source == reader) return false;
  auto& subs = in_.at(reader);
  auto it = find_source(subs, source);
  if (it != subs.end() && it->source == source) return false;
  subs.insert(it, Subscription{source, 0.0});
  auto& fol = out_.at(source);
  fol.insert(std::lower_bound(fol.begin(), fol.end(), reader), reader);
  ++edges_;
  return true;
}

bool SubscriptionGraph::remove(AgentId source, AgentId reader) {
  auto& subs = in_.at(reader);
  auto it = find_source(subs, source);
  if (it == subs.end() || it->source != source) return false;
  subs.erase(it);
  auto& fol = out_.at(source);
  fol.erase(std::lower_bound(fol.begin(), fol.end(), reader));
  --edges_;
  return true;
}

bool SubscriptionGraph::has(AgentId source, AgentId reader) const {
  if (reader >= in_.size()) return false;
  const auto& subs = in_[reader];
  auto it = find_source(subs, source);
  return it != subs.end() && it->source == source;
}

double SubscriptionGraph::delta(AgentId source, AgentId reader) const {
  const auto& subs = in_.at(reader);
  auto it = find_source(subs, source);
  if (it == subs.end() || it->source != source) throw std::out_of_range("no such subscription");
  return it->delta;
}

double& SubscriptionGraph::delta(AgentId source, AgentId reader) {
  auto& subs = in_.at(reader);
  auto it = find_source(subs, source);
  if (it == subs.end() || it->source != source) throw std::out_of_range("no such subscription");
  return it->delta;
}

SubscriptionGraph SubscriptionGraph::load_edge_list(const std::filesystem::path& path, std::size_t n) {
  const auto table = read_csv(path);
  const int src = table.column("src");
  const int dst = table.column("dst");
  if (src < 0 || dst < 0) throw ConfigError(path.string() + ": expected header src,dst");
  std::vector<std::pair<AgentId, AgentId>> edges;
  std::size_t nodes = n;
  for (const auto& row : table.rows) {
    const auto s = parse_int(row[src], path.string());
    const auto d = parse_int(row[dst], path.string());
    if (s < 0 || d < 0) throw ConfigError(path.string() + ": negative node id");
    edges.emplace_back(static_cast<AgentId>(s), static_cast<AgentId>(d));
    nodes = std::max<std::size_t>(nodes, static_cast<std::size_t>(std::max(s, d)) + 1);
  }
  SubscriptionGraph graph(nodes);
  for (const auto& [s, d] : edges) graph.add(s, d);
  return graph;
}

void SubscriptionGraph::write_snapshot(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write graph snapshot: " + path.string());
  out << "src,dst,delta\n";
  for (AgentId reader = 0; reader < in_.size(); ++reader) {
    for (const auto& sub : in_[reader]) out << sub.source << ',' << reader << ',' << format_double(sub.delta) << '\n';
  }
  if (!out) throw IoError("failed writing graph snapshot: " + path.string());
}

void RewireParams::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("rewire.gamma must lie in ]0,1[");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("rewire.tau must be positive");
}

double update_disagreement(SubscriptionGraph& graph, std::span<const Opinion> opinions, AgentId reader,
                           AgentId source, long n_reads, const RewireParams& params) {
  double& delta = graph.delta(source, reader);
  delta = discounted_disagreement(delta, n_reads, circ_dist(opinions[reader], opinions[source]), params.gamma);
  return delta;
}

std::vector<Rewiring> prune_and_rewire(SubscriptionGraph& graph, AgentId reader, const RewireParams& params,
                                       Rng& rng) {
  std::vector<Rewiring> result;
  const std::size_t n = graph.num_nodes();
  if (n < 3) return result;

  std::vector<AgentId> broken;
  for (const auto& sub : graph.sources(reader)) {
    if (sub.delta > params.tau) broken.push_back(sub.source);
  }
  if (broken.empty()) return result;

  // A node is eligible if it is not the reader, not a current source and was
  // not dropped in this call.
  std::vector<AgentId> candidates;
  auto eligible = [&](AgentId v) {
    return v != reader && !graph.has(v, reader) && !std::binary_search(broken.begin(), broken.end(), v);
  };

  for (const AgentId old : broken) {
    const double old_delta = graph.delta(old, reader);
    graph.remove(old, reader);

    candidates.clear();
    auto collect = [&](AgentId neighbor) {
      for (const auto& s : graph.sources(neighbor)) {
        if (eligible(s.source)) candidates.push_back(s.source);
      }
      if (params.mode == SecondNeighborMode::undirected) {
        for (const AgentId f : graph.followers(neighbor)) {
          if (eligible(f)) candidates.push_back(f);
        }
      }
    };
    for (const auto& s : graph.sources(reader)) collect(s.source);
    if (params.mode == SecondNeighborMode::undirected) {
      for (const AgentId f : graph.followers(reader)) collect(f);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    bool fallback = false;
    if (candidates.empty()) {
      fallback = true;
      for (AgentId v = 0; v < n; ++v) {
        if (eligible(v)) candidates.push_back(v);
      }
    }
    if (candidates.empty()) {
      graph.add(old, reader);
      graph.delta(old, reader) = old_delta;
      continue;
    }
    const AgentId chosen = candidates[rng.below(candidates.size())];
    graph.add(chosen, reader);
    result.push_back({old, chosen, fallback});
  }
  return result;
}

}  // namespace feedsim
