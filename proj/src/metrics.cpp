#include "feedsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace feedsim {

WeightedDigraph::WeightedDigraph(std::size_t n, std::vector<WeightedEdge> edges) : n_(n) {
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw std::invalid_argument("edge endpoint out of range");
    if (!(e.weight > 0.0)) throw std::invalid_argument("edge weights must be positive");
  }
  std::sort(edges.begin(), edges.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) { return a.src != b.src ? a.src < b.src : a.dst < b.dst; });
  for (const auto& e : edges) {
    if (!edges_.empty() && edges_.back().src == e.src && edges_.back().dst == e.dst) {
      edges_.back().weight += e.weight;
    } else {
      edges_.push_back(e);
    }
    total_ += e.weight;
  }
}

std::vector<double> WeightedDigraph::out_strength() const {
  std::vector<double> k(n_, 0.0);
  for (const auto& e : edges_) k[e.src] += e.weight;
  return k;
}

std::vector<double> WeightedDigraph::in_strength() const {
  std::vector<double> k(n_, 0.0);
  for (const auto& e : edges_) k[e.dst] += e.weight;
  return k;
}

double directed_modularity(const WeightedDigraph& graph, const Partition& partition, double resolution) {
  if (partition.size() != graph.num_nodes()) throw std::invalid_argument("partition does not cover the graph");
  const double m = graph.total_weight();
  if (!(m > 0.0)) throw std::domain_error("modularity is undefined on a graph without edges");
  const std::size_t k = partition.empty() ? 0 : *std::max_element(partition.begin(), partition.end()) + 1;
  std::vector<double> internal(k, 0.0);
  std::vector<double> kout(k, 0.0);
  std::vector<double> kin(k, 0.0);
  for (const auto& e : graph.edges()) {
    if (partition[e.src] == partition[e.dst]) internal[partition[e.src]] += e.weight;
    kout[partition[e.src]] += e.weight;
    kin[partition[e.dst]] += e.weight;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) q += internal[c] / m - resolution * kout[c] * kin[c] / (m * m);
  return q;
}

Partition canonical_partition(const Partition& partition) {
  std::unordered_map<std::uint32_t, std::uint32_t> relabel;
  Partition out(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    auto [it, inserted] = relabel.try_emplace(partition[i], static_cast<std::uint32_t>(relabel.size()));
    out[i] = it->second;
  }
  return out;
}

std::size_t community_count(const Partition& partition) {
  if (partition.empty()) return 0;
  std::vector<std::uint32_t> ids(partition);
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

namespace {

std::pair<double, double> resultant(std::span<const double> opinions) {
  double c = 0.0;
  double s = 0.0;
  for (const double o : opinions) {
    c += std::cos(std::numbers::pi * o);
    s += std::sin(std::numbers::pi * o);
  }
  const double n = static_cast<double>(opinions.size());
  return {c / n, s / n};
}

std::vector<std::vector<double>> group(std::span<const double> values, const Partition& partition) {
  if (values.size() != partition.size()) throw std::invalid_argument("values and partition differ in length");
  const std::size_t k = partition.empty() ? 0 : *std::max_element(partition.begin(), partition.end()) + 1;
  std::vector<std::vector<double>> groups(k);
  for (std::size_t i = 0; i < values.size(); ++i) groups[partition[i]].push_back(values[i]);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

double spread(std::span<const double> values, bool circular) {
  return circular ? circular_std(values) : population_std(values);
}

std::optional<double> population_spread(std::span<const double> values, bool circular) {
  const double s = spread(values, circular);
  if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
  return s;
}

}  // namespace

double circular_std(std::span<const double> opinions) {
  if (opinions.empty()) return 0.0;
  const auto [c, s] = resultant(opinions);
  const double r = std::min(1.0, std::hypot(c, s));
  if (r <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(-2.0 * std::log(r));
}

double circular_mean(std::span<const double> opinions) {
  const auto [c, s] = resultant(opinions);
  const double x = std::atan2(s, c) / std::numbers::pi;
  return x <= -1.0 ? 1.0 : x;
}

std::optional<double> diversity_intra(std::span<const double> values, const Partition& partition, bool circular) {
  const auto pop = population_spread(values, circular);
  if (!pop) return std::nullopt;
  const auto groups = group(values, partition);
  double total = 0.0;
  for (const auto& g : groups) total += g.size() > 1 ? spread(g, circular) / *pop : 0.0;
  return total / static_cast<double>(groups.size());
}

std::optional<double> diversity_inter(std::span<const double> values, const Partition& partition, bool circular) {
  const auto pop = population_spread(values, circular);
  if (!pop) return std::nullopt;
  const auto groups = group(values, partition);
  if (groups.size() < 2) return 0.0;
  std::vector<double> means;
  for (const auto& g : groups) {
    means.push_back(circular ? circular_mean(g)
                             : std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size()));
  }
  return spread(means, circular) / *pop;
}

std::optional<double> gamma_overexposure(const ExposureCounts& c) {
  if (c.impressions == 0 || c.pool == 0 || c.negative_pool == 0) return std::nullopt;
  const double perceived = static_cast<double>(c.negative_impressions) / static_cast<double>(c.impressions);
  const double real = static_cast<double>(c.negative_pool) / static_cast<double>(c.pool);
  return perceived / real;
}

GammaSummary summarize_gamma(std::span<const ExposureCounts> per_agent) {
  GammaSummary s;
  s.per_agent.reserve(per_agent.size());
  std::vector<double> values;
  for (const auto& c : per_agent) {
    const auto g = gamma_overexposure(c);
    s.per_agent.push_back(g);
    if (g) {
      values.push_back(*g);
    } else if (c.impressions == 0) {
      ++s.no_impressions;
    } else {
      ++s.no_negative_pool;
    }
  }
  s.defined = values.size();
  if (values.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    s.std = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.std = population_std(values);
  }
  return s;
}

std::vector<NegativityBin> default_negativity_bins() {
  return {
      {"0", 0.0, 0.0, true, true},          {"0-0.25", 0.0, 0.25, false, true},
      {"0.25-0.5", 0.25, 0.5, false, true}, {"0.5-0.75", 0.5, 0.75, false, true},
      {"0.75-1", 0.75, 1.0, false, false},  {"1", 1.0, 1.0, true, true},
  };
}

SocialPowerReport social_power_report(std::span<const std::uint64_t> published,
                                      std::span<const std::uint64_t> retweets_received,
                                      std::span<const double> negativity, double quantile,
                                      const std::vector<NegativityBin>& bins) {
  if (published.size() != retweets_received.size() || published.size() != negativity.size()) {
    throw std::invalid_argument("social_power_report: inputs differ in length");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < published.size(); ++i) {
    if (published[i] > 0) eligible.push_back(i);
  }
  SocialPowerReport report;
  report.eligible = eligible.size();
  report.small_population = eligible.size() < 100;
  for (const auto& b : bins) {
    SocialPowerRow row;
    row.bin = b;
    report.rows.push_back(row);
  }
  if (eligible.empty()) return report;

  auto popularity = [&](std::size_t i) {
    return static_cast<double>(retweets_received[i]) / static_cast<double>(published[i]);
  };
  std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    const double pa = popularity(a);
    const double pb = popularity(b);
    if (pa != pb) return pa > pb;
    return a < b;
  });
  report.top_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(quantile * static_cast<double>(eligible.size()))));
  report.top_size = std::min(report.top_size, eligible.size());

  for (std::size_t rank = 0; rank < eligible.size(); ++rank) {
    const double nu = negativity[eligible[rank]];
    for (auto& row : report.rows) {
      if (!row.bin.contains(nu)) continue;
      ++row.population;
      if (rank < report.top_size) ++row.top;
      break;
    }
  }
  for (auto& row : report.rows) {
    row.population_share = static_cast<double>(row.population) / static_cast<double>(eligible.size());
    row.top_share = static_cast<double>(row.top) / static_cast<double>(report.top_size);
    if (row.population > 0) row.ratio = row.top_share / row.population_share;
  }
  return report;
}

}  // namespace feedsim
